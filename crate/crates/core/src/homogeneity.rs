//! Homogeneity defects `D_k(y, r)`: the mean squared chordal distance from
//! `z ↦ f(y + r z)` on `B_1` to the best k-homogeneous map, searched over a
//! Grassmannian net with local rotation refinement.
//!
//! For a fixed plane `V` the optimal link is explicit: on each ray family
//! `{v + tσ}` the L²-best constant is the weighted average `ḡ(σ)`, projected
//! to the sphere. Since `|f| = |h| = 1` the residual of one family is
//! `2W(1 − |ḡ(σ)|)`, so only running averages are accumulated.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::geom::{self, dot, norm};
use crate::models::{make_homogeneous, HomogeneousModel, Link, ManifoldMap};
use crate::quadrature::{gauss_legendre_on, SphereRule};

/// Orthonormal k-frame.
pub type Frame = Vec<Vec<f64>>;

/// Below this norm the averaged link value is treated as unprojectable.
const PROJECTION_FLOOR: f64 = 1e-8;

/// Quadrature on `B_1 ⊂ R^n` adapted to a splitting `R^k ⊕ R^d`: nodes
/// `v + tσ` with `v ∈ B^k`, `t ∈ (0, √(1−|v|²))` and `σ ∈ S^{d−1}`.
#[derive(Debug, Clone)]
struct PlaneRule {
    /// `(v, t, weight)` with the Jacobian `t^{d−1}` folded in.
    vt: Vec<(Vec<f64>, f64, f64)>,
    vt_weight: f64,
    sigma: Option<SphereRule>,
    /// Plain ball nodes, used when `d = 0`.
    ball: Vec<(Vec<f64>, f64)>,
    total: f64,
}

impl PlaneRule {
    fn new(n: usize, k: usize, order: usize) -> Self {
        let d = n - k;
        if d == 0 {
            let (rs, wr) = gauss_legendre_on(order, 0.0, 1.0);
            let sph = SphereRule::product(n, order.div_ceil(2).max(1));
            let mut ball = Vec::with_capacity(rs.len() * sph.len());
            for (r, w) in rs.iter().zip(&wr) {
                for (s, ws) in sph.directions.iter().zip(&sph.weights) {
                    ball.push((geom::scale(s, *r), w * ws * r.powi(n as i32 - 1)));
                }
            }
            let total = ball.iter().map(|b| b.1).sum();
            return PlaneRule {
                vt: Vec::new(),
                vt_weight: 0.0,
                sigma: None,
                ball,
                total,
            };
        }
        // nodes in B^k with weights
        let vs: Vec<(Vec<f64>, f64)> = match k {
            0 => vec![(Vec::new(), 1.0)],
            1 => {
                let (x, w) = gauss_legendre_on(order, -1.0, 1.0);
                x.into_iter().zip(w).map(|(x, w)| (vec![x], w)).collect()
            }
            _ => {
                let (ss, ws) = gauss_legendre_on(order, 0.0, 1.0);
                let sph = SphereRule::product(k, order.div_ceil(2).max(1));
                let mut out = Vec::new();
                for (s, w) in ss.iter().zip(&ws) {
                    for (o, wo) in sph.directions.iter().zip(&sph.weights) {
                        out.push((geom::scale(o, *s), w * wo * s.powi(k as i32 - 1)));
                    }
                }
                out
            }
        };
        let mut vt = Vec::new();
        for (v, wv) in vs {
            let top = (1.0 - dot(&v, &v)).max(0.0).sqrt();
            let (ts, wt) = gauss_legendre_on(order, 0.0, top);
            for (t, w) in ts.into_iter().zip(wt) {
                vt.push((v.clone(), t, wv * w * t.powi(d as i32 - 1)));
            }
        }
        let vt_weight: f64 = vt.iter().map(|x| x.2).sum();
        let sigma = SphereRule::product(d, order);
        let total = vt_weight * sigma.total_weight();
        PlaneRule {
            vt,
            vt_weight,
            sigma: Some(sigma),
            ball: Vec::new(),
            total,
        }
    }

    fn node_count(&self) -> usize {
        match &self.sigma {
            Some(s) => s.len() * self.vt.len(),
            None => self.ball.len(),
        }
    }
}

/// Outcome of fitting one plane.
#[derive(Debug, Clone)]
struct PlaneFit {
    defect: f64,
    projection_failures: usize,
    /// `(σ, h(σ))` for `d ≥ 1`; the best constant for `d = 0`.
    link: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SearchDiagnostics {
    pub candidates_tried: usize,
    pub net_size: usize,
    /// Typical angular spacing of the net, in radians.
    pub net_resolution: f64,
    pub refinement_steps: usize,
    pub refinement_converged: bool,
    /// Set when refinement was still improving at the end of its budget.
    pub budget_exceeded: bool,
    pub early_exit: bool,
    pub projection_failures: usize,
    pub quadrature_nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectResult {
    pub k: usize,
    pub defect: f64,
    pub base: Vec<f64>,
    pub radius: f64,
    pub frame: Frame,
    pub complement: Frame,
    pub diagnostics: SearchDiagnostics,
    #[serde(skip)]
    link: Vec<(Vec<f64>, Vec<f64>)>,
}

impl DefectResult {
    /// The fitted k-homogeneous model (the link is tabulated at the
    /// quadrature directions).
    pub fn best_model(&self) -> Result<HomogeneousModel> {
        let link = if self.complement.is_empty() {
            Link::Constant(self.link[0].1.clone())
        } else {
            let (directions, values) = self.link.iter().cloned().unzip();
            Link::Tabulated { directions, values }
        };
        let mut model = make_homogeneous(&self.base, &self.frame, link)?;
        // keep the complement basis the link was tabulated in
        model.complement = self.complement.clone();
        Ok(model)
    }
}

/// Labels of the high/low nonhomogeneity split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HlLabel {
    High,
    Low,
    OutOfDomain,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeSplitReport {
    /// `D_k(y, r/γ)`.
    pub d_k_at_y: f64,
    /// `D_0(z, 2r)`.
    pub d0_at_z: f64,
    /// `D_{k+1}(y, r)`.
    pub d_k1_at_y: f64,
    pub augmented_plane: Frame,
    /// Distance of `z` from `y + V`.
    pub off_plane_distance: f64,
    /// `z` is closer to the plane than the configured margin τ.
    pub below_tau: bool,
    pub result: DefectResult,
}

/// Defect search engine for one domain dimension.
#[derive(Debug, Clone)]
pub struct Homogeneity {
    n: usize,
    rules: Vec<PlaneRule>,
    net_size: usize,
    refine_top: usize,
    golden_iters: usize,
    refine_sweeps: usize,
    tau: f64,
}

impl Homogeneity {
    pub fn new(n: usize, cfg: &AnalysisConfig) -> Self {
        let rules = (0..=n).map(|k| PlaneRule::new(n, k, cfg.defect_order)).collect();
        Homogeneity {
            n,
            rules,
            net_size: cfg.net_size,
            refine_top: cfg.refine_top,
            golden_iters: cfg.golden_iters,
            refine_sweeps: cfg.refine_sweeps,
            tau: cfg.tau,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Net size for `(n, k)`: the base size for a 2-dimensional
    /// Grassmannian, scaled by `dim Gr(k, n) / 2`.
    pub fn net_size_for(&self, k: usize) -> usize {
        let dim = k * (self.n - k);
        if dim == 0 {
            0
        } else {
            (self.net_size * dim).div_ceil(2).max(1)
        }
    }

    fn check(&self, map: &ManifoldMap, y: &[f64], r: f64) -> Result<()> {
        if y.len() != self.n || map.domain_dim() != self.n {
            return Err(Error::InvalidModel(format!(
                "engine built for n = {}, map has n = {}",
                self.n,
                map.domain_dim()
            )));
        }
        let room = map.radius() - norm(y);
        if !(r > 0.0) || r > room * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain {
                norm: norm(y) + r,
                radius: map.radius(),
            });
        }
        Ok(())
    }

    /// Fit the best homogeneous map for a fixed plane.
    fn fit(
        &self,
        map: &ManifoldMap,
        y: &[f64],
        r: f64,
        frame: &[Vec<f64>],
        complement: &[Vec<f64>],
        keep_link: bool,
    ) -> PlaneFit {
        let n = self.n;
        let rule = &self.rules[frame.len()];
        let m1 = map.embed_dim();
        let mut x = vec![0.0; n];
        let mut val = vec![0.0; m1];
        let mut acc = vec![0.0; m1];
        let Some(sigma) = &rule.sigma else {
            for (z, w) in &rule.ball {
                for i in 0..n {
                    x[i] = y[i] + r * z[i];
                }
                map.value_into(&x, &mut val);
                for j in 0..m1 {
                    acc[j] += w * val[j];
                }
            }
            let g: Vec<f64> = acc.iter().map(|a| a / rule.total).collect();
            let gn = norm(&g);
            let (h, failed) = project(&g, gn);
            return PlaneFit {
                defect: 2.0 * (1.0 - if failed { 0.0 } else { gn }),
                projection_failures: failed as usize,
                link: vec![(Vec::new(), h)],
            };
        };
        // plane offsets E·v, shared across σ
        let offsets: Vec<Vec<f64>> = rule
            .vt
            .iter()
            .map(|(v, _, _)| {
                let mut p = vec![0.0; n];
                for (a, e) in frame.iter().enumerate() {
                    for i in 0..n {
                        p[i] += v[a] * e[i];
                    }
                }
                p
            })
            .collect();
        let mut residual = 0.0;
        let mut failures = 0;
        let mut link = Vec::new();
        let mut dir = vec![0.0; n];
        for (s, ws) in sigma.directions.iter().zip(&sigma.weights) {
            dir.iter_mut().for_each(|v| *v = 0.0);
            for (b, c) in complement.iter().enumerate() {
                for i in 0..n {
                    dir[i] += s[b] * c[i];
                }
            }
            acc.iter_mut().for_each(|v| *v = 0.0);
            for ((_, t, w), off) in rule.vt.iter().zip(&offsets) {
                for i in 0..n {
                    x[i] = y[i] + r * (off[i] + t * dir[i]);
                }
                map.value_into(&x, &mut val);
                for j in 0..m1 {
                    acc[j] += w * val[j];
                }
            }
            let g: Vec<f64> = acc.iter().map(|a| a / rule.vt_weight).collect();
            let gn = norm(&g);
            let (h, failed) = project(&g, gn);
            failures += failed as usize;
            residual += ws * 2.0 * rule.vt_weight * (1.0 - if failed { 0.0 } else { gn });
            if keep_link {
                link.push((s.clone(), h));
            }
        }
        PlaneFit {
            defect: (residual / rule.total).max(0.0),
            projection_failures: failures,
            link,
        }
    }

    fn result_for(
        &self,
        map: &ManifoldMap,
        y: &[f64],
        r: f64,
        frame: Frame,
        mut diagnostics: SearchDiagnostics,
    ) -> DefectResult {
        let complement = geom::complement(&frame, self.n);
        let fit = self.fit(map, y, r, &frame, &complement, true);
        diagnostics.projection_failures = fit.projection_failures;
        diagnostics.quadrature_nodes = self.rules[frame.len()].node_count();
        DefectResult {
            k: frame.len(),
            defect: fit.defect,
            base: y.to_vec(),
            radius: r,
            frame,
            complement,
            diagnostics,
            link: fit.link,
        }
    }

    /// `D_0(y, r)` with the radially averaged link.
    pub fn best_zero_homogeneous(&self, map: &ManifoldMap, y: &[f64], r: f64) -> Result<DefectResult> {
        self.check(map, y, r)?;
        Ok(self.result_for(map, y, r, Vec::new(), SearchDiagnostics::default()))
    }

    pub fn homogeneity_defect(&self, map: &ManifoldMap, y: &[f64], r: f64, k: usize) -> Result<DefectResult> {
        self.search(map, y, r, k, &[], None)
    }

    /// Full search: `seeds` are tried before the net; with `stop_below` the
    /// search returns the first candidate at or below that value.
    pub fn search(
        &self,
        map: &ManifoldMap,
        y: &[f64],
        r: f64,
        k: usize,
        seeds: &[Frame],
        stop_below: Option<f64>,
    ) -> Result<DefectResult> {
        self.check(map, y, r)?;
        let n = self.n;
        if k > n {
            return Err(Error::InvalidModel(format!("k = {k} exceeds n = {n}")));
        }
        if k == 0 || k == n {
            let frame = if k == 0 {
                Vec::new()
            } else {
                (0..n).map(|i| geom::unit(n, i)).collect()
            };
            return Ok(self.result_for(map, y, r, frame, SearchDiagnostics::default()));
        }
        let net_size = self.net_size_for(k);
        let dim = (k * (n - k)) as f64;
        let resolution = std::f64::consts::FRAC_PI_2 * (net_size.max(1) as f64).powf(-1.0 / dim);
        let mut candidates: Vec<Frame> = seeds
            .iter()
            .map(|s| geom::gram_schmidt(s, 1e-10))
            .filter(|s| s.len() == k)
            .collect();
        candidates.extend(grassmann_net(n, k, net_size));
        let mut diag = SearchDiagnostics {
            net_size,
            net_resolution: resolution,
            ..Default::default()
        };

        let objective = |frame: &Frame| {
            let c = geom::complement(frame, n);
            self.fit(map, y, r, frame, &c, false).defect
        };

        // evaluate in chunks so an early exit stays deterministic
        let chunk = 16;
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(candidates.len());
        for (ci, block) in candidates.chunks(chunk).enumerate() {
            let vals: Vec<f64> = block.par_iter().map(&objective).collect();
            for (i, v) in vals.into_iter().enumerate() {
                scored.push((v, ci * chunk + i));
            }
            diag.candidates_tried = scored.len();
            if let Some(th) = stop_below {
                if let Some(&(_, idx)) = scored.iter().find(|(v, _)| *v <= th) {
                    diag.early_exit = true;
                    diag.refinement_converged = true;
                    return Ok(self.result_for(map, y, r, candidates[idx].clone(), diag));
                }
            }
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut best: Option<(f64, Frame)> = None;
        let mut converged = true;
        for &(v0, idx) in scored.iter().take(self.refine_top.max(1)) {
            let (v, frame, steps, ok) =
                self.refine(&objective, candidates[idx].clone(), v0, resolution, stop_below);
            diag.refinement_steps += steps;
            converged &= ok;
            if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                best = Some((v, frame));
            }
            if stop_below.map_or(false, |th| v <= th) {
                diag.early_exit = true;
                break;
            }
        }
        diag.refinement_converged = converged;
        diag.budget_exceeded = !converged;
        let (_, frame) = best.expect("at least one candidate");
        Ok(self.result_for(map, y, r, frame, diag))
    }

    /// Golden-section search over each Givens angle mixing a frame vector
    /// with a complement vector.
    fn refine<F>(
        &self,
        objective: &F,
        mut frame: Frame,
        mut value: f64,
        step: f64,
        stop_below: Option<f64>,
    ) -> (f64, Frame, usize, bool)
    where
        F: Fn(&Frame) -> f64,
    {
        let n = self.n;
        let k = frame.len();
        let mut steps = 0;
        let mut h = step;
        let mut last_gain = f64::INFINITY;
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..self.refine_sweeps {
            let start = value;
            for a in 0..k {
                for b in 0..(n - k) {
                    let comp = geom::complement(&frame, n);
                    let rotate = |theta: f64| -> Frame {
                        let (s, c) = theta.sin_cos();
                        let mut f = frame.clone();
                        f[a] = (0..n).map(|i| c * frame[a][i] + s * comp[b][i]).collect();
                        f
                    };
                    let (mut lo, mut hi) = (-h, h);
                    let mut x1 = hi - phi * (hi - lo);
                    let mut x2 = lo + phi * (hi - lo);
                    let mut f1 = objective(&rotate(x1));
                    let mut f2 = objective(&rotate(x2));
                    for _ in 0..self.golden_iters {
                        steps += 1;
                        if f1 <= f2 {
                            hi = x2;
                            x2 = x1;
                            f2 = f1;
                            x1 = hi - phi * (hi - lo);
                            f1 = objective(&rotate(x1));
                        } else {
                            lo = x1;
                            x1 = x2;
                            f1 = f2;
                            x2 = lo + phi * (hi - lo);
                            f2 = objective(&rotate(x2));
                        }
                    }
                    let (xb, fb) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
                    if fb < value {
                        value = fb;
                        frame = geom::gram_schmidt(&rotate(xb), 1e-12);
                    }
                    if stop_below.map_or(false, |th| value <= th) {
                        return (value, frame, steps, true);
                    }
                }
            }
            last_gain = start - value;
            h *= 0.5;
        }
        let converged = last_gain <= 1e-9 + 1e-6 * value.abs();
        (value, frame, steps, converged)
    }

    /// `N_t(f, B_r(x)) = D_0(x, t r)`.
    pub fn nonhomogeneity(&self, map: &ManifoldMap, x: &[f64], r: f64, t: f64) -> Result<f64> {
        Ok(self.best_zero_homogeneous(map, x, t * r)?.defect)
    }

    /// High/low split of grid points by `N_t ≥ eps`.
    pub fn classify_hl(
        &self,
        map: &ManifoldMap,
        grid: &[Vec<f64>],
        t: f64,
        r: f64,
        eps: f64,
    ) -> Result<Vec<HlLabel>> {
        grid.par_iter()
            .map(|x| {
                if norm(x) + t * r > map.radius() * (1.0 + 1e-12) {
                    return Ok(HlLabel::OutOfDomain);
                }
                let d = self.nonhomogeneity(map, x, r, t)?;
                Ok(if d >= eps { HlLabel::High } else { HlLabel::Low })
            })
            .collect()
    }

    /// Numerical cone splitting: `D_k(y, r/γ)`, `D_0(z, 2r)` and then
    /// `D_{k+1}(y, r)` seeded with `span{z − y, V}`.
    pub fn cone_splitting_check(
        &self,
        map: &ManifoldMap,
        y: &[f64],
        z: &[f64],
        plane: &[Vec<f64>],
        r: f64,
        gamma: f64,
    ) -> Result<ConeSplitReport> {
        let n = self.n;
        let frame = geom::gram_schmidt(plane, 1e-10);
        if frame.len() != plane.len() {
            return Err(Error::DegenerateFrame {
                gram_det: geom::gram_determinant(plane),
            });
        }
        if frame.len() >= n {
            return Err(Error::InvalidModel("plane already spans R^n".into()));
        }
        let mut w = geom::sub(z, y);
        for e in &frame {
            let c = dot(&w, e);
            for i in 0..n {
                w[i] -= c * e[i];
            }
        }
        let off = norm(&w);
        if off < 1e-8 {
            return Err(Error::PlaneDegenerate { distance: off });
        }
        let k = frame.len();
        let d_k = self.homogeneity_defect(map, y, r / gamma, k)?.defect;
        let d_0 = self.best_zero_homogeneous(map, z, 2.0 * r)?.defect;
        let mut augmented = frame.clone();
        augmented.push(geom::scale(&w, 1.0 / off));
        let result = self.search(map, y, r, k + 1, &[augmented.clone()], None)?;
        Ok(ConeSplitReport {
            d_k_at_y: d_k,
            d0_at_z: d_0,
            d_k1_at_y: result.defect,
            augmented_plane: augmented,
            off_plane_distance: off,
            below_tau: off < self.tau,
            result,
        })
    }
}

fn project(g: &[f64], gn: f64) -> (Vec<f64>, bool) {
    if gn < PROJECTION_FLOOR {
        (geom::unit(g.len(), 0), true)
    } else {
        (geom::scale(g, 1.0 / gn), false)
    }
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut c = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    inv = out;
    inv
}

/// Deterministic k-frames: Halton points mapped to Gaussians by Box-Muller,
/// then orthonormalized.
pub fn grassmann_net(n: usize, k: usize, count: usize) -> Vec<Frame> {
    let dims = n * k;
    let pairs = dims.div_ceil(2);
    let primes = first_primes(2 * pairs);
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    while out.len() < count {
        let mut g = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let u1 = radical_inverse(index, primes[2 * p]);
            let u2 = radical_inverse(index, primes[2 * p + 1]);
            let rad = (-2.0 * u1.ln()).sqrt();
            let ang = std::f64::consts::TAU * u2;
            g.push(rad * ang.cos());
            g.push(rad * ang.sin());
        }
        index += 1;
        let vecs: Vec<Vec<f64>> = (0..k).map(|a| g[a * n..(a + 1) * n].to_vec()).collect();
        let frame = geom::gram_schmidt(&vecs, 1e-8);
        if frame.len() == k {
            out.push(frame);
        }
    }
    out
}
