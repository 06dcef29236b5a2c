//! Normalized Dirichlet energy `θ_r(x) = r^{2-n} ∫_{B_r(x)} |∇f|^2`, its
//! scale-to-scale drops and L² distances between maps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::geom::{self, derive_seed, dist, norm, unit_ball_volume};
use crate::models::ManifoldMap;
use crate::quadrature::{integrate_ball_mc, BallQuadrature, Estimate, PoleShellRule, SlicedBallRule};

/// `|∇f|^2(x)`, the squared Frobenius norm of `Df(x)`.
pub fn dirichlet_density(map: &ManifoldMap, x: &[f64]) -> Result<f64> {
    if norm(x) > map.radius() * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain {
            norm: norm(x),
            radius: map.radius(),
        });
    }
    if map.singular_distance(x) == Some(0.0) {
        return Err(Error::SingularPoint);
    }
    Ok(map.gradient_norm_sq(x))
}

/// A declared singular point strictly inside `B_r(center)`, used as the
/// pole of the polar coordinates.
pub fn pole_inside(map: &ManifoldMap, center: &[f64], r: f64) -> Option<Vec<f64>> {
    map.singular_points()
        .into_iter()
        .find(|p| dist(p, center) < r * (1.0 - 1e-9))
}

/// The part of the singular set of `map` that the quadrature about
/// `B_r(center)` should adapt to.
enum Singularity {
    Point(Vec<f64>),
    Plane {
        base: Vec<f64>,
        frame: Vec<Vec<f64>>,
        complement: Vec<Vec<f64>>,
    },
}

fn singularity(map: &ManifoldMap, center: &[f64], r: f64) -> Option<Singularity> {
    if let Some((base, frame)) = map.singular_plane() {
        let complement = geom::complement(&frame, center.len());
        let v = geom::sub(center, &base);
        let off: f64 = complement.iter().map(|c| geom::dot(c, &v).powi(2)).sum::<f64>().sqrt();
        return (off < 1.5 * r).then_some(Singularity::Plane {
            base,
            frame,
            complement,
        });
    }
    // nearby poles outside the ball still spoil a rule centered at `center`
    map.singular_points()
        .into_iter()
        .filter(|p| dist(p, center) < 1.5 * r)
        .min_by(|a, b| dist(a, center).total_cmp(&dist(b, center)))
        .map(Singularity::Point)
}

/// Ball quadrature for one domain dimension: a product rule in low
/// dimension, stratified Monte Carlo above four.
#[derive(Debug, Clone)]
pub struct EnergyQuadrature {
    n: usize,
    rule: Option<BallQuadrature>,
    mc_samples: usize,
    seed: u64,
    tolerance: f64,
    radial: usize,
    sphere: usize,
}

impl EnergyQuadrature {
    pub fn new(n: usize, cfg: &AnalysisConfig) -> Self {
        let rule = match n {
            0..=3 => Some(BallQuadrature::new(n, cfg.theta_radial, cfg.theta_sphere)),
            4 => Some(BallQuadrature::new(
                n,
                cfg.theta_radial,
                (cfg.theta_sphere * 2 / 3).max(2),
            )),
            _ => None,
        };
        EnergyQuadrature {
            n,
            rule,
            mc_samples: cfg.mc_samples,
            seed: cfg.seed,
            tolerance: cfg.tolerance,
            radial: cfg.theta_radial,
            sphere: cfg.theta_sphere,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `∫_{B_r(center)} g`, with polar coordinates about `pole`.
    pub fn integrate<F>(&self, center: &[f64], r: f64, pole: Option<&[f64]>, g: F) -> Estimate
    where
        F: Fn(&[f64]) -> f64,
    {
        match &self.rule {
            Some(q) => q.estimate(center, r, pole, g),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, center, r));
                integrate_ball_mc(center, r, self.mc_samples, &mut rng, g)
            }
        }
    }

    /// `∫ g` over the shell `{inner ≤ |y − center| ≤ outer}` (a ball when
    /// `inner = 0`), in polar coordinates about the singular set of `map`
    /// when it is close, otherwise about `center`.
    fn integrate_region<F>(&self, map: &ManifoldMap, center: &[f64], inner: f64, outer: f64, g: F) -> Estimate
    where
        F: Fn(&[f64]) -> f64,
    {
        let pair = |hi: f64, lo: f64| Estimate {
            value: hi,
            error: (hi - lo).abs(),
        };
        let (m, s) = (self.radial, self.sphere);
        match singularity(map, center, outer) {
            Some(Singularity::Plane {
                base,
                frame,
                complement,
            }) if frame.len() + 2 <= self.n => {
                let k = frame.len();
                // smooth in these coordinates; modest orders suffice
                let (m, s) = ((m / 4).max(4), (s / 2).max(2));
                let run = |rule: SlicedBallRule| {
                    rule.integrate_shell(center, inner, outer, &base, &frame, &complement, &g)
                };
                pair(
                    run(SlicedBallRule::new(self.n, k, m, m, s)),
                    run(SlicedBallRule::new(self.n, k, m / 2, m / 2, (s / 2).max(1))),
                )
            }
            Some(Singularity::Point(p)) if self.n >= 2 && self.n <= 4 => {
                let s = if self.n == 4 { (s * 2 / 3).max(2) } else { s };
                let c = geom::sub(center, &p);
                let run = |rule: PoleShellRule| {
                    rule.integrate_shell(&c, inner, outer, |y| {
                        let mut z = [0.0; 16];
                        for i in 0..y.len() {
                            z[i] = p[i] + y[i];
                        }
                        g(&z[..y.len()])
                    })
                };
                pair(
                    run(PoleShellRule::new(self.n, m, s)),
                    run(PoleShellRule::new(self.n, (m / 2).max(1), (s / 2).max(1))),
                )
            }
            _ => {
                let pole = pole_inside(map, center, outer);
                let e = self.integrate(center, outer, pole.as_deref(), &g);
                if inner > 0.0 {
                    let pole = pole_inside(map, center, inner);
                    e.minus(self.integrate(center, inner, pole.as_deref(), &g))
                } else {
                    e
                }
            }
        }
    }

    fn check_ball(&self, map: &ManifoldMap, x: &[f64], r: f64) -> Result<()> {
        if !(r > 0.0) || norm(x) + r > map.radius() * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain {
                norm: norm(x) + r,
                radius: map.radius(),
            });
        }
        Ok(())
    }

    fn check_error(&self, e: Estimate) -> Result<Estimate> {
        if e.error > self.tolerance * (1.0 + e.value.abs()) || !e.value.is_finite() {
            return Err(Error::QuadratureFailure {
                value: e.value,
                error: e.error,
                tolerance: self.tolerance,
            });
        }
        Ok(e)
    }

    /// `∫_{B_r(x)} |∇f|^2`.
    pub fn dirichlet_integral(&self, map: &ManifoldMap, x: &[f64], r: f64) -> Result<Estimate> {
        self.check_ball(map, x, r)?;
        let e = self.integrate_region(map, x, 0.0, r, |y| map.gradient_norm_sq(y));
        self.check_error(e)
    }

    /// `θ_r(x)`.
    pub fn theta(&self, map: &ManifoldMap, x: &[f64], r: f64) -> Result<Estimate> {
        let e = self.dirichlet_integral(map, x, r)?;
        Ok(e.scaled(r.powi(2 - self.n as i32)))
    }

    /// `W_{s,t}(x) = θ_t(x) − θ_s(x)`.
    pub fn monotonicity_drop(&self, map: &ManifoldMap, x: &[f64], s: f64, t: f64) -> Result<Estimate> {
        if !(s > 0.0 && s < t) {
            return Err(Error::Config(format!("need 0 < s < t, got s={s}, t={t}")));
        }
        Ok(self.theta(map, x, t)?.minus(self.theta(map, x, s)?))
    }

    /// `2 ∫_{B_t(x) \ B_s(x)} |y−x|^{2−n} |∂_ν f|^2` with `ν` the unit
    /// radial direction from `x`; equals `W_{s,t}` for stationary maps.
    pub fn radial_defect(&self, map: &ManifoldMap, x: &[f64], s: f64, t: f64) -> Result<Estimate> {
        if !(s > 0.0 && s < t) {
            return Err(Error::Config(format!("need 0 < s < t, got s={s}, t={t}")));
        }
        self.check_ball(map, x, t)?;
        let n = self.n;
        let integrand = |y: &[f64]| {
            let mut d = [0.0; 16];
            let d = &mut d[..n];
            for i in 0..n {
                d[i] = y[i] - x[i];
            }
            let rr = norm(d);
            if rr == 0.0 {
                return 0.0;
            }
            // 2 |Df·(y−x)|² / |y−x|^n
            2.0 * map.directional_norm_sq(y, d) / rr.powi(n as i32)
        };
        self.check_error(self.integrate_region(map, x, s, t, integrand))
    }

    /// Mean over `B_1` of `|f(c + r z) − g(c + r z)|^2`.
    pub fn l2_map_distance(
        &self,
        f: &ManifoldMap,
        g: &ManifoldMap,
        center: &[f64],
        r: f64,
    ) -> Result<Estimate> {
        self.check_ball(f, center, r)?;
        self.check_ball(g, center, r)?;
        let pole = pole_inside(f, center, r).or_else(|| pole_inside(g, center, r));
        let m1 = f.embed_dim();
        let e = self.integrate(center, r, pole.as_deref(), |y| {
            let mut a = [0.0; 16];
            let mut b = [0.0; 16];
            f.value_into(y, &mut a[..m1]);
            g.value_into(y, &mut b[..m1]);
            (0..m1).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
        });
        let vol = unit_ball_volume(self.n) * r.powi(self.n as i32);
        Ok(e.scaled(1.0 / vol))
    }

    /// θ on the ladder `r0·γ^j`, `j = 0..=j_max`.
    pub fn profile(
        &self,
        map: &ManifoldMap,
        x: &[f64],
        r0: f64,
        gamma: f64,
        j_max: usize,
    ) -> Result<EnergyProfile> {
        let radii: Vec<f64> = (0..=j_max).map(|j| r0 * gamma.powi(j as i32)).collect();
        let theta = radii
            .iter()
            .map(|&r| self.theta(map, x, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(EnergyProfile {
            center: x.to_vec(),
            radii,
            theta,
        })
    }
}

/// θ at a geometric ladder of radii (largest first) about one center.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub theta: Vec<Estimate>,
}

impl EnergyProfile {
    /// Largest violation of monotonicity beyond `slack` times the combined
    /// error, over consecutive ladder entries; zero when monotone.
    pub fn monotonicity_violation(&self, slack: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.theta.windows(2) {
            // radii decrease along the ladder, so θ should not increase
            let (outer, inner) = (w[0], w[1]);
            let excess = inner.value - outer.value - slack * (inner.error + outer.error);
            worst = worst.max(excess);
        }
        worst
    }

    /// CSV rows `center, r, theta, err`; the center is written as a
    /// space-separated coordinate list.
    pub fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let c = self
            .center
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        for (r, t) in self.radii.iter().zip(&self.theta) {
            w.write_record([c.clone(), r.to_string(), t.value.to_string(), t.error.to_string()])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{constant, geodesic, radial};
    use std::f64::consts::PI;

    /// `∫_{B_r(x)} 2/dist(·, L)²` for the line `L = ℝe₃ ⊂ ℝ⁴` and `x` at
    /// distance `delta` from it: slices along `L` are 3-balls of radius
    /// `ρ = √(r² − a²)`, and on each the sphere `|b| = t` meets the slice in
    /// a cap of known area.
    fn line_energy_oracle(delta: f64, r: f64) -> f64 {
        use crate::quadrature::gauss_legendre_on;
        let slice = |rho: f64| -> f64 {
            let mut total = 0.0;
            let inner = (rho - delta).max(0.0);
            if rho > delta {
                total += 2.0 * 4.0 * PI * inner;
            }
            let (ts, wt) = gauss_legendre_on(400, (rho - delta).abs(), rho + delta);
            for (t, w) in ts.iter().zip(&wt) {
                let c = (t * t + delta * delta - rho * rho) / (2.0 * t * delta);
                total += w * 2.0 * 2.0 * PI * (1.0 - c);
            }
            total
        };
        let (phis, wp) = gauss_legendre_on(400, -PI / 2.0, PI / 2.0);
        phis.iter()
            .zip(&wp)
            .map(|(p, w)| w * r * p.cos() * slice(r * p.cos()))
            .sum()
    }

    #[test]
    fn theta_near_a_singular_line() {
        use crate::geom::unit;
        use crate::models::{make_homogeneous, Link};
        let m = make_homogeneous(&[0.0; 4], &[unit(4, 3)], Link::Identity)
            .unwrap()
            .into_map(2.0);
        let q = EnergyQuadrature::new(4, &AnalysisConfig::default());
        let t = q.theta(&m, &[0.0, 0.0, 0.0, 0.3], 0.5).unwrap();
        assert!((t.value - 4.0 * PI * PI).abs() < 1e-8, "{t:?}");
        for (delta, r) in [(0.1, 0.5), (0.3, 0.25), (0.2, 0.21)] {
            let x = [delta, 0.0, 0.0, 0.1];
            let got = q.dirichlet_integral(&m, &x, r).unwrap();
            let exact = line_energy_oracle(delta, r);
            assert!((got.value - exact).abs() < 1e-4 * exact, "{delta} {r}: {got:?} vs {exact}");
        }
    }

    fn eq() -> EnergyQuadrature {
        EnergyQuadrature::new(3, &AnalysisConfig::default())
    }

    #[test]
    fn density_examples() {
        let f = radial(3).unwrap();
        assert!((dirichlet_density(&f, &[0.5, 0.0, 0.0]).unwrap() - 8.0).abs() < 1e-12);
        assert!(matches!(
            dirichlet_density(&f, &[0.0; 3]),
            Err(Error::SingularPoint)
        ));
        let g = geodesic(&[1.0, 2.0, 0.0]).unwrap();
        assert!((dirichlet_density(&g, &[0.3, 0.1, 0.0]).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn theta_examples() {
        let q = eq();
        let f = radial(3).unwrap();
        for r in [1.0, 0.5, 0.01] {
            let t = q.theta(&f, &[0.0; 3], r).unwrap();
            assert!((t.value - 8.0 * PI).abs() < 1e-10, "{t:?}");
        }
        let g = geodesic(&[1.0, 0.0, 0.0]).unwrap();
        let t = q.theta(&g, &[0.0; 3], 1.0).unwrap();
        assert!((t.value - 4.0 * PI / 3.0).abs() < 1e-10);
        let c = constant(3, &[0.0, 1.0]).unwrap();
        assert_eq!(q.theta(&c, &[0.1, 0.2, 0.3], 0.5).unwrap().value, 0.0);
    }

    #[test]
    fn theta_off_center_radial() {
        // θ_1 at x with the singular point inside, against a dense oracle
        // integrating 2/|y|² in polar coordinates about the origin
        let q = eq();
        let f = radial(3).unwrap();
        let x = [0.3, 0.0, 0.0];
        let t = q.theta(&f, &x, 1.0).unwrap();
        // ∫_{B_1(x)} 2/|y|^2 = 2 ∫_{S²} exit(ω) dω, exit from the origin
        let (u, w) = crate::quadrature::gauss_legendre_on(200, -1.0, 1.0);
        let a = 0.3;
        let oracle: f64 = u
            .iter()
            .zip(&w)
            .map(|(c, w)| {
                let b = -a * c;
                let exit = -b + (b * b - a * a + 1.0).sqrt();
                w * 2.0 * PI * 2.0 * exit
            })
            .sum();
        assert!((t.value - oracle).abs() < 1e-8, "{} vs {oracle}", t.value);
        assert!(t.value < 8.0 * PI);
    }

    #[test]
    fn drops_and_defects() {
        let q = eq();
        let g = geodesic(&[1.0, 0.0, 0.0]).unwrap();
        let w = q.monotonicity_drop(&g, &[0.0; 3], 0.5, 1.0).unwrap();
        assert!((w.value - PI).abs() < 1e-10);
        let d = q.radial_defect(&g, &[0.0; 3], 0.5, 1.0).unwrap();
        assert!((d.value - PI).abs() < 1e-8, "{d:?}");
        let f = radial(3).unwrap();
        assert!(q.radial_defect(&f, &[0.0; 3], 0.25, 1.0).unwrap().value.abs() < 1e-12);
        assert!(q.monotonicity_drop(&f, &[0.0; 3], 0.25, 1.0).unwrap().value.abs() < 1e-10);
    }

    #[test]
    fn drop_matches_defect_off_center() {
        let q = eq();
        let f = radial(3).unwrap();
        let x = [0.2, -0.1, 0.3];
        let w = q.monotonicity_drop(&f, &x, 0.25, 1.0).unwrap();
        let d = q.radial_defect(&f, &x, 0.25, 1.0).unwrap();
        assert!(w.value > 0.0);
        assert!((w.value - d.value).abs() <= 3.0 * (w.error + d.error) + 1e-9, "{w:?} {d:?}");
    }

    #[test]
    fn l2_distance_examples() {
        let q = eq();
        let a = constant(3, &[1.0, 0.0]).unwrap();
        let b = constant(3, &[-1.0, 0.0]).unwrap();
        let d = q.l2_map_distance(&a, &b, &[0.0; 3], 1.0).unwrap();
        assert!((d.value - 4.0).abs() < 1e-12);
        let f = radial(3).unwrap();
        assert!(q.l2_map_distance(&f, &f, &[0.0; 3], 1.0).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn radial_vs_best_constant() {
        // the best constant for x/|x| on B_1 is any unit vector (zero mean):
        // mean |x̂ − w|² = 2 for every unit w
        let q = eq();
        let f = radial(3).unwrap();
        let w = constant(3, &[0.0, 0.0, 1.0]).unwrap();
        let d = q.l2_map_distance(&f, &w, &[0.0; 3], 1.0).unwrap();
        assert!((d.value - 2.0).abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn profile_rows() {
        let q = eq();
        let f = radial(3).unwrap();
        let p = q.profile(&f, &[0.1, 0.0, 0.0], 1.0, 0.5, 4).unwrap();
        assert_eq!(p.radii.len(), 5);
        assert_eq!(p.monotonicity_violation(3.0), 0.0);
        let mut w = csv::Writer::from_writer(vec![]);
        p.write_csv(&mut w).unwrap();
        let s = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(s.lines().count(), 5);
    }

    #[test]
    fn out_of_domain() {
        let q = eq();
        let f = radial(3).unwrap();
        assert!(matches!(
            q.theta(&f, &[1.5, 0.0, 0.0], 1.0),
            Err(Error::OutOfDomain { .. })
        ));
    }
}
