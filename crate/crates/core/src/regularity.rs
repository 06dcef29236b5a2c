//! Regularity scale `r_f(x)`, bad sets and `L^p` sweeps with divergence
//! detection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::geom::{self, dist, linear_fit, norm};
use crate::models::ManifoldMap;
use crate::quadrature::{gauss_legendre_on, BallRule, SphereRule};

/// Regularity scale at one point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegularityScale {
    pub r: f64,
    pub cap: f64,
    /// The bound was limited by a declared singularity rather than by the
    /// derivative condition or the domain.
    pub singular_limited: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityField {
    pub points: Vec<Vec<f64>>,
    pub r_f: Vec<f64>,
    pub cap: Vec<f64>,
}

impl RegularityField {
    /// `{x : r_f(x) ≤ r}`.
    pub fn bad_set(&self, r: f64) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .zip(&self.r_f)
            .filter(|(_, rf)| **rf <= r)
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(["x", "r_f", "cap"])?;
        for ((p, r), c) in self.points.iter().zip(&self.r_f).zip(&self.cap) {
            w.write_record([
                crate::stratification::coord_string(p),
                r.to_string(),
                c.to_string(),
            ])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpIntegrand {
    #[default]
    /// `|∇f|^p`
    Gradient,
    /// `r_f^{-p}`
    InverseRegularity,
    /// `|A|^p` on a hypersurface
    ShapeOperator,
    /// `r_I^{-p}` on a hypersurface
    InverseCurrentRegularity,
}

impl LpIntegrand {
    pub fn name(&self) -> &'static str {
        match self {
            LpIntegrand::Gradient => "gradient",
            LpIntegrand::InverseRegularity => "inverse-regularity",
            LpIntegrand::ShapeOperator => "shape-operator",
            LpIntegrand::InverseCurrentRegularity => "inverse-current-regularity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Convergent,
    /// `V(ε) ≈ rate · ln(1/ε) + c`.
    DivergentLog { rate: f64 },
    /// `V(ε) ≈ c · ε^{-exponent}`.
    DivergentPower { exponent: f64 },
}

impl Verdict {
    pub fn is_convergent(&self) -> bool {
        matches!(self, Verdict::Convergent)
    }

    pub fn letter(&self) -> char {
        if self.is_convergent() {
            'C'
        } else {
            'D'
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LpResult {
    pub p: f64,
    pub integrand: LpIntegrand,
    /// Tail-extrapolated integral when convergent, else the value at the
    /// finest cutoff.
    pub value: f64,
    pub error: f64,
    /// `(ε, ∫_{B_1 \ B_ε(sing)})` from coarse to fine.
    pub sweep: Vec<(f64, f64)>,
    /// `α` in the fitted shell decay `S_i ∝ 2^{-iα}`.
    pub tail_exponent: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpnessTable {
    pub k: usize,
    pub rows: Vec<LpResult>,
    pub expected: String,
    pub observed: String,
}

impl SharpnessTable {
    pub fn matches(&self) -> bool {
        self.expected == self.observed
    }
}

/// Regularity-scale and `L^p` engine for one domain dimension.
#[derive(Debug, Clone)]
pub struct Regularity {
    n: usize,
    /// Points of `B_1(0)` where the supremum is sampled.
    net: Vec<Vec<f64>>,
    lp_radial: usize,
    lp_sphere: usize,
    rf_radial: usize,
    rf_sphere: usize,
    cutoff_min_exp: u32,
    cutoff_max_exp: u32,
    alpha_tol: f64,
}

impl Regularity {
    pub fn new(n: usize, cfg: &AnalysisConfig) -> Self {
        let sph = SphereRule::product(n, 3);
        let mut net = vec![vec![0.0; n]];
        for shell in [1.0 / 3.0, 2.0 / 3.0, 1.0] {
            for d in &sph.directions {
                net.push(geom::scale(d, shell));
            }
        }
        Regularity {
            n,
            net,
            lp_radial: cfg.lp_radial,
            lp_sphere: cfg.lp_sphere,
            rf_radial: cfg.rf_radial,
            rf_sphere: cfg.rf_sphere,
            cutoff_min_exp: cfg.cutoff_min_exp,
            cutoff_max_exp: cfg.cutoff_max_exp,
            alpha_tol: cfg.divergence_alpha,
        }
    }

    /// Sampled `sup_{B_r(x)} (r|∇f| + r²|∇²f|)`; infinite when a declared
    /// singularity lies in the closed ball.
    fn sup_quantity(&self, map: &ManifoldMap, x: &[f64], r: f64) -> f64 {
        let q = |y: &[f64]| r * map.gradient_norm_sq(y).sqrt() + r * r * map.hessian_norm(y);
        let mut candidates: Vec<Vec<f64>> = self
            .net
            .iter()
            .map(|z| geom::add_scaled(x, r, z))
            .collect();
        if let Some(s) = map.nearest_singular(x) {
            let d = dist(&s, x);
            if d <= r {
                return f64::INFINITY;
            }
            let toward = geom::scale(&geom::sub(&s, x), r / d);
            candidates.push(geom::add_scaled(x, 1.0, &toward));
        }
        let (mut best, mut worst) = (candidates[0].clone(), f64::NEG_INFINITY);
        for c in candidates {
            let v = q(&c);
            if v > worst {
                worst = v;
                best = c;
            }
        }
        // pattern search around the worst sample, kept inside the ball
        let mut step = r / 4.0;
        for _ in 0..6 {
            let mut moved = true;
            while moved {
                moved = false;
                for i in 0..self.n {
                    for sgn in [1.0, -1.0] {
                        let mut y = best.clone();
                        y[i] += sgn * step;
                        let off = geom::sub(&y, x);
                        let d = norm(&off);
                        if d > r {
                            y = geom::add_scaled(x, r / d, &off);
                        }
                        if map.singular_distance(&y) == Some(0.0) {
                            return f64::INFINITY;
                        }
                        let v = q(&y);
                        if v > worst {
                            worst = v;
                            best = y;
                            moved = true;
                        }
                    }
                }
            }
            step *= 0.5;
        }
        worst
    }

    /// Largest `r ≤ R − |x|` with `sup_{B_r(x)} (r|∇f| + r²|∇²f|) ≤ 1`.
    ///
    /// Bisection runs to a relative tolerance of `1e-4`, which is finer than
    /// `1e-4·cap` everywhere; scales below `1e-12·cap` are reported as 0.
    pub fn regularity_scale(&self, map: &ManifoldMap, x: &[f64]) -> Result<RegularityScale> {
        if norm(x) > map.radius() * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain {
                norm: norm(x),
                radius: map.radius(),
            });
        }
        let cap = (map.radius() - norm(x)).max(0.0);
        let sing = map.singular_distance(x);
        let mut upper = cap;
        let mut singular_limited = false;
        if let Some(d) = sing {
            if d < upper {
                upper = d;
                singular_limited = true;
            }
        }
        let zero = RegularityScale {
            r: 0.0,
            cap,
            singular_limited,
        };
        if upper <= 0.0 {
            return Ok(zero);
        }
        let ok = |r: f64| self.sup_quantity(map, x, r) <= 1.0;
        let top = if singular_limited {
            upper * (1.0 - 1e-9)
        } else {
            upper
        };
        if ok(top) {
            return Ok(RegularityScale {
                r: top,
                cap,
                singular_limited,
            });
        }
        let floor = 1e-12 * cap.max(f64::MIN_POSITIVE);
        let mut hi = top;
        let mut lo = hi * 0.5;
        while !ok(lo) {
            hi = lo;
            lo *= 0.5;
            if lo < floor {
                return Ok(zero);
            }
        }
        while hi - lo > 1e-4 * lo {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(RegularityScale {
            r: lo,
            cap,
            singular_limited,
        })
    }

    pub fn regularity_field(&self, map: &ManifoldMap, grid: &[Vec<f64>]) -> Result<RegularityField> {
        let rows: Vec<RegularityScale> = grid
            .par_iter()
            .map(|x| self.regularity_scale(map, x))
            .collect::<Result<_>>()?;
        Ok(RegularityField {
            points: grid.to_vec(),
            r_f: rows.iter().map(|s| s.r).collect(),
            cap: rows.iter().map(|s| s.cap).collect(),
        })
    }

    /// `{x ∈ grid : r_f(x) ≤ r}`.
    pub fn bad_set(&self, map: &ManifoldMap, grid: &[Vec<f64>], r: f64) -> Result<Vec<Vec<f64>>> {
        Ok(self.regularity_field(map, grid)?.bad_set(r))
    }

    fn integrand_value(&self, map: &ManifoldMap, which: LpIntegrand, p: f64, y: &[f64]) -> f64 {
        match which {
            LpIntegrand::Gradient => map.gradient_norm_sq(y).powf(p / 2.0),
            LpIntegrand::InverseRegularity => match self.regularity_scale(map, y) {
                Ok(s) if s.r > 0.0 => s.r.powf(-p),
                _ => f64::INFINITY,
            },
            LpIntegrand::ShapeOperator | LpIntegrand::InverseCurrentRegularity => f64::NAN,
        }
    }

    /// `∫_{B_1(0) \ B_ε(sing)} g` with `g = |∇f|^p` or `r_f^{-p}`, over the
    /// cutoff sweep `ε = 2^{-cmin} … 2^{-cmax}`.
    ///
    /// The integral is split into dyadic shells about the singular point;
    /// a power law fitted to the innermost shells decides convergence and
    /// supplies the geometric tail when convergent. Maps whose singular set
    /// is not a point inside `B_1` are integrated without a cutoff.
    pub fn lp_integral(&self, map: &ManifoldMap, p: f64, which: LpIntegrand) -> Result<LpResult> {
        if !(p > 0.0) {
            return Err(Error::Config(format!("p must be positive, got {p}")));
        }
        if map.domain_dim() != self.n || map.radius() < 1.0 {
            return Err(Error::InvalidModel("lp sweeps need a map on B_1 ⊂ R^n".into()));
        }
        let (radial, sphere) = match which {
            LpIntegrand::Gradient => (self.lp_radial, self.lp_sphere),
            LpIntegrand::InverseRegularity => (self.rf_radial, self.rf_sphere),
            _ => return Err(Error::Config("hypersurface integrand on a map".into())),
        };
        let origin = vec![0.0; self.n];
        let pole = map
            .singular_points()
            .into_iter()
            .find(|s| norm(s) < 1.0 - 1e-9);
        let cmin = self.cutoff_min_exp as i32;
        let cmax = self.cutoff_max_exp as i32;
        let Some(pole) = pole else {
            let g = |y: &[f64]| self.integrand_value(map, which, p, y);
            let hi = BallRule::new(self.n, radial, sphere).integrate(&origin, 1.0, None, g);
            let lo = BallRule::new(self.n, (radial / 2).max(1), (sphere / 2).max(1))
                .integrate(&origin, 1.0, None, g);
            let sweep = (cmin..=cmax).map(|i| (0.5f64.powi(i), hi)).collect();
            return Ok(LpResult {
                p,
                integrand: which,
                value: hi,
                error: (hi - lo).abs(),
                sweep,
                tail_exponent: f64::INFINITY,
                verdict: Verdict::Convergent,
            });
        };

        let shells_hi = self.shells(map, which, p, &pole, radial, sphere, cmin, cmax);
        let shells_lo = self.shells(
            map,
            which,
            p,
            &pole,
            (radial / 2).max(2),
            (sphere / 2).max(1),
            cmin,
            cmax,
        );
        let lo_total = shells_lo.0 + shells_lo.1.iter().sum::<f64>();
        Ok(assemble_sweep(
            p,
            which,
            shells_hi.0,
            &shells_hi.1,
            lo_total,
            cmin,
            self.alpha_tol,
        ))
    }

    /// Outer part (`ρ ≥ 2^{-cmin}`) and inner dyadic shells
    /// `[2^{-(i+1)}, 2^{-i}]`, `i = cmin..cmax`, in polar coordinates about
    /// `pole`, clipped to `B_1(0)`.
    #[allow(clippy::too_many_arguments)]
    fn shells(
        &self,
        map: &ManifoldMap,
        which: LpIntegrand,
        p: f64,
        pole: &[f64],
        radial: usize,
        sphere: usize,
        cmin: i32,
        cmax: i32,
    ) -> (f64, Vec<f64>) {
        let n = self.n;
        let rule = SphereRule::product(n, sphere);
        let dd = geom::dot(pole, pole);
        let exits: Vec<f64> = rule
            .directions
            .iter()
            .map(|w| {
                let b = geom::dot(pole, w);
                -b + (b * b - dd + 1.0).max(0.0).sqrt()
            })
            .collect();
        let segment = |a: f64, b: f64| -> f64 {
            let jobs: Vec<(usize, f64)> = rule
                .directions
                .iter()
                .enumerate()
                .filter_map(|(i, _)| {
                    let top = b.min(exits[i]);
                    (top > a).then_some((i, top))
                })
                .collect();
            let parts: Vec<f64> = jobs
                .par_iter()
                .map(|&(i, top)| {
                    let (rs, ws) = gauss_legendre_on(radial, a, top);
                    let w = &rule.directions[i];
                    let mut s = 0.0;
                    for (rho, wr) in rs.iter().zip(&ws) {
                        let y = geom::add_scaled(pole, *rho, w);
                        s += wr * rho.powi(n as i32 - 1) * self.integrand_value(map, which, p, &y);
                    }
                    rule.weights[i] * s
                })
                .collect();
            parts.iter().sum()
        };
        let mut outer = 0.0;
        let mut a = 0.5f64.powi(cmin);
        while a < 2.0 {
            outer += segment(a, 2.0 * a);
            a *= 2.0;
        }
        let inner = (cmin..cmax)
            .map(|i| segment(0.5f64.powi(i + 1), 0.5f64.powi(i)))
            .collect();
        (outer, inner)
    }

    /// `lp_integral` at `p ∈ {2+k−0.5, 2+k−0.1, 2+k, 2+k+0.1}`; the sharp
    /// exponent predicts `C, C, D, D` for the radial map on `B^{k+2}`.
    pub fn lp_sharpness_sweep(&self, map: &ManifoldMap, k: usize, which: LpIntegrand) -> Result<SharpnessTable> {
        let base = 2.0 + k as f64;
        let rows = [base - 0.5, base - 0.1, base, base + 0.1]
            .iter()
            .map(|&p| self.lp_integral(map, p, which))
            .collect::<Result<Vec<_>>>()?;
        let observed = rows.iter().map(|r| r.verdict.letter()).collect();
        Ok(SharpnessTable {
            k,
            rows,
            expected: "CCDD".into(),
            observed,
        })
    }
}

/// Turn an outer integral and dyadic inner shells into a cutoff sweep and
/// a verdict. `lo_total` is a lower-order evaluation of the same total.
///
/// A power law `S_i ∝ 2^{-iα}` is fitted to the innermost shells; `α`
/// above `alpha_tol` is convergent and supplies a geometric tail.
pub(crate) fn assemble_sweep(
    p: f64,
    which: LpIntegrand,
    outer: f64,
    inner: &[f64],
    lo_total: f64,
    cmin: i32,
    alpha_tol: f64,
) -> LpResult {
    let mut sweep = vec![(0.5f64.powi(cmin), outer)];
    let mut v = outer;
    for (i, s) in inner.iter().enumerate() {
        v += s;
        sweep.push((0.5f64.powi(cmin + i as i32 + 1), v));
    }
    let finest = v;
    let error = (finest - lo_total).abs();
    if inner.iter().all(|s| *s == 0.0) {
        return LpResult {
            p,
            integrand: which,
            value: finest,
            error,
            sweep,
            tail_exponent: f64::INFINITY,
            verdict: Verdict::Convergent,
        };
    }
    let tail = inner.len().min(5);
    let start = inner.len() - tail;
    let xs: Vec<f64> = (start..inner.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = inner[start..]
        .iter()
        .map(|s| s.max(f64::MIN_POSITIVE).ln())
        .collect();
    let alpha = -linear_fit(&xs, &ys).0 / std::f64::consts::LN_2;
    let (value, verdict) = if alpha > alpha_tol {
        let q = 0.5f64.powf(alpha);
        let last = *inner.last().expect("nonempty shells");
        (finest + last * q / (1.0 - q), Verdict::Convergent)
    } else if alpha >= -alpha_tol {
        let pts = &sweep[sweep.len() - tail..];
        let xs: Vec<f64> = pts.iter().map(|(e, _)| (1.0 / e).ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|(_, v)| *v).collect();
        (finest, Verdict::DivergentLog {
            rate: linear_fit(&xs, &ys).0,
        })
    } else {
        (finest, Verdict::DivergentPower { exponent: -alpha })
    };
    LpResult {
        p,
        integrand: which,
        value,
        error,
        sweep,
        tail_exponent: alpha,
        verdict,
    }
}

/// Write `(p, integrand, value, error, verdict, rate)` rows.
pub fn write_lp_csv<W: std::io::Write>(rows: &[LpResult], w: &mut csv::Writer<W>) -> Result<()> {
    w.write_record(["p", "integrand", "value", "error", "verdict", "rate"])?;
    for r in rows {
        let (verdict, rate) = match r.verdict {
            Verdict::Convergent => ("convergent", String::new()),
            Verdict::DivergentLog { rate } => ("divergent-log", rate.to_string()),
            Verdict::DivergentPower { exponent } => ("divergent-power", exponent.to_string()),
        };
        w.write_record([
            r.p.to_string(),
            r.integrand.name().to_string(),
            r.value.to_string(),
            r.error.to_string(),
            verdict.to_string(),
            rate,
        ])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{constant, geodesic, radial};
    use std::f64::consts::PI;

    fn engine() -> Regularity {
        Regularity::new(3, &AnalysisConfig::default())
    }

    /// `β = t/(1+t)` with `√2 t + √6 t² = 1`: the supremum sits at the
    /// ball point nearest the origin.
    fn radial_beta() -> f64 {
        let (a, b) = (6f64.sqrt(), 2f64.sqrt());
        let t = (-b + (b * b + 4.0 * a).sqrt()) / (2.0 * a);
        t / (1.0 + t)
    }

    #[test]
    fn constant_and_geodesic_scales() {
        let g = engine();
        let c = constant(3, &[1.0, 0.0]).unwrap();
        let s = g.regularity_scale(&c, &[0.5, 0.0, 0.0]).unwrap();
        assert_eq!(s.r, 1.5);
        let geo = geodesic(&[2.0, 0.0, 0.0]).unwrap();
        let s = g.regularity_scale(&geo, &[0.0; 3]).unwrap();
        assert!((s.r - (5f64.sqrt() - 1.0) / 4.0).abs() < 1e-4, "{s:?}");
    }

    #[test]
    fn radial_scale_is_proportional() {
        let g = engine();
        let f = radial(3).unwrap();
        let beta = radial_beta();
        assert!((beta - 0.2920).abs() < 1e-4);
        for x in [[0.5, 0.0, 0.0], [0.1, -0.2, 0.05], [0.0, 0.0, 0.01]] {
            let s = g.regularity_scale(&f, &x).unwrap();
            assert!((s.r / norm(&x) - beta).abs() < 1e-3 * beta, "{s:?}");
        }
        assert_eq!(g.regularity_scale(&f, &[0.0; 3]).unwrap().r, 0.0);
    }

    #[test]
    fn rescaled_scale() {
        let g = engine();
        let f = radial(3).unwrap();
        let y = [0.4, 0.1, 0.0];
        let r = 0.5;
        let a = g.regularity_scale(&f.rescale(&y, r).unwrap(), &[0.0; 3]).unwrap().r;
        let b = g.regularity_scale(&f, &y).unwrap().r / r;
        assert!((a - b).abs() < 1e-3 * b);
    }

    #[test]
    fn bad_sets() {
        let g = engine();
        let grid = crate::stratification::lattice_ball(3, 0.25, 1.0);
        let c = constant(3, &[1.0, 0.0]).unwrap();
        assert!(g.bad_set(&c, &grid, 0.5).unwrap().is_empty());
        let f = radial(3).unwrap();
        let field = g.regularity_field(&f, &grid).unwrap();
        let small = field.bad_set(0.1);
        let big = field.bad_set(0.2);
        assert!(small.iter().all(|p| big.contains(p)));
        assert!(small.iter().all(|p| norm(p) <= 0.1 / radial_beta() + 1e-9));
        assert_eq!(field.bad_set(2.0).len(), grid.len());
    }

    #[test]
    fn radial_gradient_lp() {
        let g = engine();
        let f = radial(3).unwrap();
        for p in [2.0, 2.5, 2.9] {
            let res = g.lp_integral(&f, p, LpIntegrand::Gradient).unwrap();
            let exact = 4.0 * PI * 2f64.powf(p / 2.0) / (3.0 - p);
            assert!(res.verdict.is_convergent(), "{res:?}");
            assert!((res.value - exact).abs() < 1e-3 * exact, "p={p}: {} vs {exact}", res.value);
        }
        let res = g.lp_integral(&f, 3.0, LpIntegrand::Gradient).unwrap();
        let rate = 4.0 * PI * 2f64.powf(1.5);
        match res.verdict {
            Verdict::DivergentLog { rate: r } => assert!((r - rate).abs() < 1e-3 * rate),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn constant_lp_is_zero() {
        let g = engine();
        let c = constant(3, &[1.0, 0.0]).unwrap();
        let t = g.lp_sharpness_sweep(&c, 1, LpIntegrand::Gradient).unwrap();
        assert!(t.rows.iter().all(|r| r.verdict.is_convergent() && r.value == 0.0));
    }

    #[test]
    fn inverse_regularity_dominates_gradient() {
        let g = engine();
        let f = radial(3).unwrap();
        for p in [2.0, 2.5] {
            let a = g.lp_integral(&f, p, LpIntegrand::Gradient).unwrap();
            let b = g.lp_integral(&f, p, LpIntegrand::InverseRegularity).unwrap();
            assert!(b.verdict.is_convergent());
            assert!(b.value >= a.value - a.error - b.error, "{} < {}", b.value, a.value);
            // r_f = β|x| gives ∫ (β ρ)^{-p} = 4π β^{-p}/(3−p)
            let exact = 4.0 * PI * radial_beta().powf(-p) / (3.0 - p);
            assert!((b.value - exact).abs() < 2e-3 * exact, "{} vs {exact}", b.value);
        }
    }
}
