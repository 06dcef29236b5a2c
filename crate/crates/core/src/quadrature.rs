//! Gauss-Legendre rules, product rules on spheres, and polar ball quadrature.
//!
//! Ball integrals are taken in polar coordinates about a *pole*: either the
//! ball center or a declared singular point inside the ball. For a pole `p`
//! inside `B_R(c)` every ray `p + ρω` leaves the ball exactly once, at a
//! distance that depends smoothly on `ω`, so point singularities of the
//! form `|y - p|^{-a}` with `a < n` are absorbed by the Jacobian `ρ^{n-1}`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geom::{dot, unit_ball_volume, unit_sphere_area};

/// A quadrature value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }

    pub fn scaled(self, s: f64) -> Self {
        Estimate {
            value: self.value * s,
            error: self.error * s.abs(),
        }
    }

    pub fn minus(self, other: Estimate) -> Self {
        Estimate {
            value: self.value - other.value,
            error: self.error + other.error,
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            nodes[0] = 0.0;
            weights[0] = 2.0;
            break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    (
        x.iter().map(|t| m + h * t).collect(),
        w.iter().map(|wi| wi * h).collect(),
    )
}

/// Gauss rule for the weight `(1 − u²)^{λ − 1/2}` on `[-1, 1]` with total
/// mass `mu0` (Golub-Welsch).
pub fn gauss_gegenbauer(n: usize, lambda: f64, mu0: f64) -> (Vec<f64>, Vec<f64>) {
    if (lambda - 0.5).abs() < 1e-15 {
        let (x, w) = gauss_legendre(n);
        return (x, w.iter().map(|w| w * mu0 / 2.0).collect());
    }
    let jac = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            (k * (k + 2.0 * lambda - 1.0) / (4.0 * (k + lambda) * (k + lambda - 1.0))).sqrt()
        } else {
            0.0
        }
    });
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Product rule on the unit sphere `S^{d-1} ⊂ R^d`.
///
/// Nested polar angles use Gauss-Legendre nodes, the last azimuth a
/// half-offset uniform rule. `S^0` is the two-point counting measure.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn product(dim: usize, order: usize) -> Self {
        assert!(dim >= 1 && order >= 1);
        match dim {
            1 => SphereRule {
                dim,
                directions: vec![vec![1.0], vec![-1.0]],
                weights: vec![1.0, 1.0],
            },
            2 => {
                let m = 2 * order;
                let h = 2.0 * PI / m as f64;
                let directions = (0..m)
                    .map(|j| {
                        let a = (j as f64 + 0.5) * h;
                        vec![a.cos(), a.sin()]
                    })
                    .collect();
                SphereRule {
                    dim,
                    directions,
                    weights: vec![h; m],
                }
            }
            _ => {
                // u = cos φ carries the weight (1 − u²)^{(dim−3)/2}
                let sub = SphereRule::product(dim - 1, order);
                let lambda = (dim as f64 - 2.0) / 2.0;
                let mu0 = unit_sphere_area(dim) / sub.total_weight();
                let (us, wu) = gauss_gegenbauer(order, lambda, mu0);
                let mut directions = Vec::with_capacity(order * sub.len());
                let mut weights = Vec::with_capacity(order * sub.len());
                for (u, wp) in us.iter().zip(&wu) {
                    let s = (1.0 - u * u).max(0.0).sqrt();
                    for (d, w) in sub.directions.iter().zip(&sub.weights) {
                        let mut v: Vec<f64> = d.iter().map(|x| x * s).collect();
                        v.push(*u);
                        directions.push(v);
                        weights.push(wp * w);
                    }
                }
                SphereRule {
                    dim,
                    directions,
                    weights,
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Polar rule for balls in R^n: radial Gauss-Legendre on (0, 1) times a
/// sphere rule.
#[derive(Debug, Clone)]
pub struct BallRule {
    pub n: usize,
    pub radial_nodes: Vec<f64>,
    pub radial_weights: Vec<f64>,
    pub sphere: SphereRule,
}

impl BallRule {
    pub fn new(n: usize, radial: usize, sphere_order: usize) -> Self {
        let (radial_nodes, radial_weights) = gauss_legendre_on(radial, 0.0, 1.0);
        BallRule {
            n,
            radial_nodes,
            radial_weights,
            sphere: SphereRule::product(n, sphere_order),
        }
    }

    pub fn node_count(&self) -> usize {
        self.radial_nodes.len() * self.sphere.len()
    }

    /// `∫_{B_radius(center)} f`, in polar coordinates about `pole` (which
    /// must lie in the open ball) or about the center.
    pub fn integrate<F>(&self, center: &[f64], radius: f64, pole: Option<&[f64]>, mut f: F) -> f64
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = self.n;
        let p = pole.unwrap_or(center);
        let d: Vec<f64> = p.iter().zip(center).map(|(a, b)| a - b).collect();
        let dd = dot(&d, &d);
        let mut y = vec![0.0; n];
        let mut total = 0.0;
        for (omega, wo) in self.sphere.directions.iter().zip(&self.sphere.weights) {
            let b = dot(&d, omega);
            let exit = -b + (b * b - dd + radius * radius).max(0.0).sqrt();
            let mut ray = 0.0;
            for (t, wt) in self.radial_nodes.iter().zip(&self.radial_weights) {
                let rho = exit * t;
                for i in 0..n {
                    y[i] = p[i] + rho * omega[i];
                }
                ray += wt * rho.powi(n as i32 - 1) * f(&y);
            }
            total += wo * exit * ray;
        }
        total
    }
}

/// Pair of ball rules used for a value / error estimate.
#[derive(Debug, Clone)]
pub struct BallQuadrature {
    pub high: BallRule,
    pub low: BallRule,
}

impl BallQuadrature {
    /// High-order rule with `radial` nodes and sphere order `sphere_order`;
    /// the companion rule halves both.
    pub fn new(n: usize, radial: usize, sphere_order: usize) -> Self {
        BallQuadrature {
            high: BallRule::new(n, radial, sphere_order),
            low: BallRule::new(n, (radial / 2).max(1), (sphere_order / 2).max(1)),
        }
    }

    pub fn estimate<F>(&self, center: &[f64], radius: f64, pole: Option<&[f64]>, f: F) -> Estimate
    where
        F: Fn(&[f64]) -> f64,
    {
        let hi = self.high.integrate(center, radius, pole, &f);
        let lo = self.low.integrate(center, radius, pole, &f);
        Estimate {
            value: hi,
            error: (hi - lo).abs(),
        }
    }
}

/// Polar rule about a point `0` for shells `{s ≤ |y − c| ≤ ρ} ⊂ R^d`
/// (`d ≥ 2`, `s = 0` for balls) with the pole anywhere. The polar axis
/// points at `c`, so every ray meets the spheres at parameters depending on
/// its polar angle `ψ` alone. The angle is split where rays graze a sphere,
/// and pieces ending at a grazing angle `α` use `sin ψ = sin α sin θ`, which
/// removes the square roots there.
#[derive(Debug, Clone)]
pub struct PoleShellRule {
    pub d: usize,
    angle_nodes: Vec<f64>,
    angle_weights: Vec<f64>,
    radial_nodes: Vec<f64>,
    radial_weights: Vec<f64>,
    link: SphereRule,
}

impl PoleShellRule {
    pub fn new(d: usize, radial: usize, angular: usize) -> Self {
        assert!(d >= 2);
        let (angle_nodes, angle_weights) = gauss_legendre_on(angular, 0.0, 1.0);
        let (radial_nodes, radial_weights) = gauss_legendre_on(radial, 0.0, 1.0);
        PoleShellRule {
            d,
            angle_nodes,
            angle_weights,
            radial_nodes,
            radial_weights,
            link: SphereRule::product(d - 1, (angular / 2).max(1)),
        }
    }

    pub fn integrate<F>(&self, c: &[f64], rho: f64, f: F) -> f64
    where
        F: FnMut(&[f64]) -> f64,
    {
        self.integrate_shell(c, 0.0, rho, f)
    }

    pub fn integrate_shell<F>(&self, c: &[f64], inner: f64, outer: f64, mut f: F) -> f64
    where
        F: FnMut(&[f64]) -> f64,
    {
        let d = self.d;
        let delta = dot(c, c).sqrt();
        let axis = if delta > 0.0 {
            c.iter().map(|v| v / delta).collect()
        } else {
            let mut e = vec![0.0; d];
            e[d - 1] = 1.0;
            e
        };
        let perp = crate::geom::complement(std::slice::from_ref(&axis), d);
        // ray ∩ B_R(c) as a parameter interval
        let hit = |radius: f64, cs: f64, sn: f64| -> Option<(f64, f64)> {
            let disc = radius * radius - delta * delta * sn * sn;
            if disc < 0.0 {
                return None;
            }
            let q = disc.sqrt();
            let hi = delta * cs + q;
            (hi > 0.0).then(|| ((delta * cs - q).max(0.0), hi))
        };
        let mut grazing = Vec::new();
        let mut cuts = vec![0.0];
        let mut end = PI;
        for radius in [inner, outer] {
            if radius <= 0.0 {
                continue;
            }
            if delta >= radius {
                let a = (radius / delta).asin();
                grazing.push(a);
                cuts.push(a);
                if radius == outer {
                    end = a;
                }
            } else {
                cuts.push(PI / 2.0);
            }
        }
        cuts.retain(|&a| a < end);
        cuts.push(end);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let mut y = vec![0.0; d];
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let sub = grazing.iter().find(|&&g| g == b).map(|g| g.sin());
            for (u, wu) in self.angle_nodes.iter().zip(&self.angle_weights) {
                let (sn, cs, jac) = match sub {
                    Some(sa) => {
                        let t0 = (a.sin() / sa).min(1.0).asin();
                        let theta = t0 + (PI / 2.0 - t0) * u;
                        let (st, ct) = theta.sin_cos();
                        let sn = sa * st;
                        let cs = (1.0 - sn * sn).max(0.0).sqrt();
                        let jac = if cs > 0.0 { sa * ct / cs } else { 1.0 };
                        (sn, cs, jac * (PI / 2.0 - t0))
                    }
                    None => {
                        let (sn, cs) = (a + (b - a) * u).sin_cos();
                        (sn, cs, b - a)
                    }
                };
                let Some((lo, hi)) = hit(outer, cs, sn) else {
                    continue;
                };
                let mut segs = [(lo, hi), (0.0, 0.0)];
                if inner > 0.0 {
                    if let Some((il, ih)) = hit(inner, cs, sn) {
                        segs = [(lo, il.max(lo)), (ih.min(hi), hi)];
                    }
                }
                let mut ray_total = 0.0;
                for (om, wo) in self.link.directions.iter().zip(&self.link.weights) {
                    let mut dir = [0.0; 16];
                    for i in 0..d {
                        let mut s = cs * axis[i];
                        for (j, p) in perp.iter().enumerate() {
                            s += sn * om[j] * p[i];
                        }
                        dir[i] = s;
                    }
                    let mut acc = 0.0;
                    for &(t0, t1) in &segs {
                        if t1 <= t0 {
                            continue;
                        }
                        let mut seg = 0.0;
                        for (v, wv) in self.radial_nodes.iter().zip(&self.radial_weights) {
                            let t = t0 + (t1 - t0) * v;
                            for i in 0..d {
                                y[i] = t * dir[i];
                            }
                            seg += wv * t.powi(d as i32 - 1) * f(&y);
                        }
                        acc += seg * (t1 - t0);
                    }
                    ray_total += wo * acc;
                }
                total += wu * jac * sn.powi(d as i32 - 2) * ray_total;
            }
        }
        total
    }
}

/// Rule for balls cut by a singular affine `k`-plane `L`. The ball is sliced
/// orthogonally to `L`; every slice is a `d`-ball (`d = n − k ≥ 2`)
/// integrated in polar coordinates about its intersection with `L`, which
/// cancels singularities like `dist(·, L)^{-2}` when `d ≥ 3`. Along `L` the
/// slices are placed by `|a| = r sin φ`, split where the slice boundary
/// crosses `L`.
#[derive(Debug, Clone)]
pub struct SlicedBallRule {
    pub k: usize,
    outer_nodes: Vec<f64>,
    outer_weights: Vec<f64>,
    plane_sphere: Option<SphereRule>,
    inner: PoleShellRule,
}

impl SlicedBallRule {
    pub fn new(n: usize, k: usize, outer: usize, radial: usize, angular: usize) -> Self {
        assert!(k >= 1 && k + 2 <= n);
        let (outer_nodes, outer_weights) = gauss_legendre_on(outer, 0.0, 1.0);
        SlicedBallRule {
            k,
            outer_nodes,
            outer_weights,
            plane_sphere: (k >= 2).then(|| SphereRule::product(k, (angular / 2).max(1))),
            inner: PoleShellRule::new(n - k, radial, angular),
        }
    }

    /// `∫_{B_radius(center)} f` for the plane through `base` spanned by the
    /// orthonormal `frame`, with orthonormal `complement`.
    pub fn integrate<F>(
        &self,
        center: &[f64],
        radius: f64,
        base: &[f64],
        frame: &[Vec<f64>],
        complement: &[Vec<f64>],
        f: F,
    ) -> f64
    where
        F: FnMut(&[f64]) -> f64,
    {
        self.integrate_shell(center, 0.0, radius, base, frame, complement, f)
    }

    /// Same over the shell `{inner ≤ |y − center| ≤ outer}`.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_shell<F>(
        &self,
        center: &[f64],
        inner: f64,
        outer: f64,
        base: &[f64],
        frame: &[Vec<f64>],
        complement: &[Vec<f64>],
        mut f: F,
    ) -> f64
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = center.len();
        let radius = outer;
        let v: Vec<f64> = center.iter().zip(base).map(|(c, b)| c - b).collect();
        let a0: Vec<f64> = frame.iter().map(|e| dot(e, &v)).collect();
        let b0: Vec<f64> = complement.iter().map(|c| dot(c, &v)).collect();
        let delta = dot(&b0, &b0).sqrt();
        // φ ∈ [0, π/2] with |a| = r sin φ, split where a slice boundary
        // crosses L and where slices leave the inner ball
        let half = PI / 2.0;
        let mut cuts = vec![0.0, half];
        let mut at = |a: f64| {
            let phi = (a / radius).clamp(0.0, 1.0).asin();
            if phi > 1e-12 && phi < half - 1e-12 {
                cuts.push(phi);
            }
        };
        if delta < outer {
            at((outer * outer - delta * delta).sqrt());
        }
        if inner > 0.0 {
            at(inner);
            if delta < inner {
                at((inner * inner - delta * delta).sqrt());
            }
        }
        cuts.sort_by(|a, b| a.total_cmp(b));
        let mut y = vec![0.0; n];
        let mut slice = |a: &[f64], rho: f64, f: &mut F| -> f64 {
            let aa: f64 = a.iter().map(|x| x * x).sum();
            let hole = (inner * inner - aa).max(0.0).sqrt();
            self.inner.integrate_shell(&b0, hole, rho, |b| {
                for i in 0..n {
                    let mut s = base[i];
                    for (j, e) in frame.iter().enumerate() {
                        s += (a0[j] + a[j]) * e[i];
                    }
                    for (j, c) in complement.iter().enumerate() {
                        s += b[j] * c[i];
                    }
                    y[i] = s;
                }
                f(&y)
            })
        };
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            for (t, wt) in self.outer_nodes.iter().zip(&self.outer_weights) {
                let phi = lo + (hi - lo) * t;
                let (s, c) = (radius * phi.sin(), radius * phi.cos());
                let jac = wt * (hi - lo) * c;
                match &self.plane_sphere {
                    None => {
                        total += jac * (slice(&[s], c, &mut f) + slice(&[-s], c, &mut f));
                    }
                    Some(sph) => {
                        let radial = jac * s.powi(self.k as i32 - 1);
                        for (d, wd) in sph.directions.iter().zip(&sph.weights) {
                            let a: Vec<f64> = d.iter().map(|x| x * s).collect();
                            total += radial * wd * slice(&a, c, &mut f);
                        }
                    }
                }
            }
        }
        total
    }
}

/// Radially stratified Monte-Carlo estimate of `∫_{B_radius(center)} f`.
pub fn integrate_ball_mc<F>(
    center: &[f64],
    radius: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
    f: F,
) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let n = center.len();
    let strata = 16usize;
    let per = (samples / strata).max(2);
    let vol = unit_ball_volume(n) * radius.powi(n as i32);
    let mut value = 0.0;
    let mut var = 0.0;
    let mut y = vec![0.0; n];
    let mut g = vec![0.0; n];
    for s in 0..strata {
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..per {
            let u: f64 = (s as f64 + rng.gen::<f64>()) / strata as f64;
            let rho = radius * u.powf(1.0 / n as f64);
            let mut gn: f64 = 0.0;
            for gi in g.iter_mut() {
                *gi = rng.sample(StandardNormal);
                gn += *gi * *gi;
            }
            let gn = gn.sqrt();
            for i in 0..n {
                y[i] = center[i] + rho * g[i] / gn;
            }
            let v = f(&y);
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / per as f64;
        let sv = (sum2 / per as f64 - mean * mean).max(0.0) * per as f64 / (per as f64 - 1.0);
        let w = vol / strata as f64;
        value += w * mean;
        var += w * w * sv / per as f64;
    }
    Estimate {
        value,
        error: var.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{unit_ball_volume, unit_sphere_area};
    use rand::SeedableRng;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        // exact through degree 9
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((q - 2.0 / 9.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(64);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((q - (1f64.exp() - (-1f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn sphere_rules_have_correct_area() {
        for d in 1..=6 {
            let r = SphereRule::product(d, 6);
            let exact = if d == 1 { 2.0 } else { unit_sphere_area(d) };
            assert!((r.total_weight() - exact).abs() < 1e-10, "d = {d}");
        }
    }

    #[test]
    fn sphere_rule_second_moment() {
        // ∫_{S^2} x_3^2 = 4π/3
        let r = SphereRule::product(3, 8);
        let q: f64 = r
            .directions
            .iter()
            .zip(&r.weights)
            .map(|(d, w)| w * d[2] * d[2])
            .sum();
        assert!((q - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn off_center_pole_gives_ball_volume() {
        let rule = BallRule::new(3, 16, 12);
        let c = [0.1, -0.2, 0.3];
        let pole = [0.5, -0.1, 0.1];
        let v = rule.integrate(&c, 0.9, Some(&pole), |_| 1.0);
        assert!((v - unit_ball_volume(3) * 0.729).abs() < 1e-9, "{v}");
    }

    #[test]
    fn singular_integrand_about_pole() {
        // ∫_{B_1(c)} |y - p|^{-2} with p inside: compare poles.
        let rule = BallRule::new(3, 32, 24);
        let c = [0.0, 0.0, 0.0];
        let p = [0.3, 0.0, 0.0];
        let v = rule.integrate(&c, 1.0, Some(&p), |y| {
            1.0 / crate::geom::dist_sq(y, &p)
        });
        // closed form: ∫ over unit ball of 1/|y-p|^2 = 2π( (1-a^2)/(2a) ln((1+a)/(1-a)) + 1 )
        let a: f64 = 0.3;
        let exact = 2.0 * PI * ((1.0 - a * a) / (2.0 * a) * ((1.0 + a) / (1.0 - a)).ln() + 1.0);
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
    }

    #[test]
    fn monte_carlo_ball_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = integrate_ball_mc(&[0.0; 5], 1.0, 20_000, &mut rng, |y| y[0] * y[0]);
        // ∫_{B^5} x_1^2 = ω_5 / 7
        let exact = unit_ball_volume(5) / 7.0;
        assert!((est.value - exact).abs() < 4.0 * est.error, "{est:?} vs {exact}");
    }

    #[test]
    fn pole_rule_volumes() {
        for d in [2, 3] {
            let rule = PoleShellRule::new(d, 8, 16);
            let vol = unit_ball_volume(d) * 0.5f64.powi(d as i32);
            for delta in [0.0, 0.2, 0.4999, 0.5, 0.7] {
                let mut c = vec![0.0; d];
                c[0] = delta;
                let v = rule.integrate(&c, 0.5, |_| 1.0);
                // near-tangent poles cost a few digits
                assert!((v - vol).abs() < 1e-7 * vol, "d = {d}, δ = {delta}: {v}");
            }
        }
        // ∫_{B_1(c)} |y|^{-2} in R³ with |c| = 2: 2π ∫ (1 − cos θ*) dt over t ∈ [1, 3]
        let rule = PoleShellRule::new(3, 16, 24);
        let v = rule.integrate(&[0.0, 2.0, 0.0], 1.0, |y| 1.0 / dot(y, y));
        let (ts, wt) = gauss_legendre_on(200, 1.0, 3.0);
        let oracle: f64 = ts
            .iter()
            .zip(&wt)
            .map(|(t, w)| w * 2.0 * PI * (1.0 - (t * t + 3.0) / (4.0 * t)))
            .sum();
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }

    #[test]
    fn pole_shell_volumes() {
        let rule = PoleShellRule::new(3, 8, 16);
        let shell = 4.0 * PI / 3.0 * (1.0 - 0.125);
        for delta in [0.0, 0.3, 0.5, 0.7, 1.0, 1.6] {
            let v = rule.integrate_shell(&[delta, 0.0, 0.0], 0.5, 1.0, |_| 1.0);
            assert!((v - shell).abs() < 1e-7 * shell, "δ = {delta}: {v}");
        }
        // the sliced rule agrees on a 4-ball shell with the line through 0
        let sliced = SlicedBallRule::new(4, 1, 12, 8, 12);
        let e = |i| {
            let mut v = vec![0.0; 4];
            v[i] = 1.0;
            v
        };
        let vol = unit_ball_volume(4) * (1.0 - 0.5f64.powi(4));
        for c in [[0.0, 0.0, 0.0, 0.2], [0.3, 0.1, 0.0, 0.0], [0.9, 0.0, 0.0, 0.0]] {
            let v = sliced.integrate_shell(&c, 0.5, 1.0, &[0.0; 4], &[e(3)], &[e(0), e(1), e(2)], |_| 1.0);
            assert!((v - vol).abs() < 1e-6 * vol, "{c:?}: {v} vs {vol}");
        }
    }
}
