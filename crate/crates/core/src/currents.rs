//! Explicitly parametrized hypersurfaces: mass density, a binned conical
//! defect, the second fundamental form, the current regularity scale and
//! `L^p` integrability of `|A|`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::geom::{self, derive_seed, dist, dot, norm, unit_ball_volume, unit_sphere_area};
use crate::homogeneity::grassmann_net;
use crate::quadrature::{gauss_legendre_on, Estimate, SphereRule};
use crate::regularity::{assemble_sweep, LpIntegrand, LpResult, RegularityScale, Verdict};
use crate::stratification::{uniform_in_ball, PointIndex, TubeEstimate};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Hyperplane { point: Vec<f64>, normal: Vec<f64> },
    Sphere { center: Vec<f64>, radius: f64 },
    /// `{x : Σ_{i≠axis} x_i² = radius²}`
    Cylinder { axis: usize, radius: f64 },
    /// `{|u| = |v|} ⊂ R^4 × R^4`, translated to `vertex`.
    Simons { vertex: Vec<f64> },
}

/// A single-sheet hypersurface in `R^n` restricted to `B_R(0)`, `R` the
/// working radius.
#[derive(Debug, Clone, Serialize)]
pub struct HypersurfaceModel {
    n: usize,
    shape: Shape,
    working_radius: f64,
    mass_bound: f64,
}

/// Area-uniform points of `M ∩ B_r(x)`; each carries area `weight`.
#[derive(Debug, Clone)]
pub struct BallSample {
    pub points: Vec<Vec<f64>>,
    pub weight: f64,
    pub proposals: usize,
}

impl BallSample {
    pub fn area(&self) -> f64 {
        self.weight * self.points.len() as f64
    }
}

/// Density `θ_r(x) = r^{-k} |M|(B_r(x))` on a ladder of radii, largest
/// first.
#[derive(Debug, Clone, Serialize)]
pub struct MassProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub theta: Vec<Estimate>,
}

impl MassProfile {
    /// Largest increase of θ toward smaller radii beyond `slack` times the
    /// combined error.
    pub fn monotonicity_violation(&self, slack: f64) -> f64 {
        self.theta
            .windows(2)
            .map(|w| w[1].value - w[0].value - slack * (w[0].error + w[1].error))
            .fold(0.0, f64::max)
    }

    /// Largest `|θ_r − θ_{r0}|` along the ladder.
    pub fn spread(&self) -> f64 {
        let first = self.theta[0].value;
        self.theta.iter().map(|t| (t.value - first).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(["r", "theta", "err"])?;
        for (r, t) in self.radii.iter().zip(&self.theta) {
            w.write_record([r.to_string(), t.value.to_string(), t.error.to_string()])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConicalDefect {
    pub ell: usize,
    /// Binned total variation to the best candidate, in `[0, 1]`.
    pub defect: f64,
    pub best: String,
    pub candidates: usize,
    pub accepted: usize,
    /// Fewer than 64 samples landed in the ball.
    pub budget_exceeded: bool,
}

const RADIAL_BINS: usize = 4;

/// `|S^m| ∩ {angle to a pole ≤ α}` on the unit sphere `S^m ⊂ R^{m+1}`.
pub fn cap_area(m: usize, alpha: f64) -> f64 {
    let alpha = alpha.clamp(0.0, PI);
    if m == 1 {
        return 2.0 * alpha;
    }
    let (xs, ws) = gauss_legendre_on(48, 0.0, alpha);
    let s: f64 = xs
        .iter()
        .zip(&ws)
        .map(|(x, w)| w * x.sin().powi(m as i32 - 1))
        .sum();
    unit_sphere_area(m) * s
}

/// `∫_0^M f`, substituting `φ = M − τ²` so that square-root edges at `M`
/// become smooth.
fn edge_integral<F: Fn(f64) -> f64>(m: f64, nodes: usize, f: F) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    let (ts, ws) = gauss_legendre_on(nodes, 0.0, m.sqrt());
    ts.iter().zip(&ws).map(|(t, w)| w * 2.0 * t * f(m - t * t)).sum()
}

fn plain_integral<F: Fn(f64) -> f64>(a: f64, b: f64, nodes: usize, f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (xs, ws) = gauss_legendre_on(nodes, a, b);
    xs.iter().zip(&ws).map(|(x, w)| w * f(*x)).sum()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform point of the cap of half-angle `alpha` about `pole` on the unit
/// sphere of `R^{m+1}`.
fn sample_cap(rng: &mut ChaCha8Rng, pole: &[f64], alpha: f64) -> Vec<f64> {
    let d = pole.len();
    if alpha >= PI {
        loop {
            if let Some(v) = geom::normalized(&gaussian(rng, d)) {
                return v;
            }
        }
    }
    let m = d - 1;
    let phi = if m == 1 {
        rng.gen::<f64>() * alpha
    } else {
        let top = alpha.min(PI / 2.0).sin().powi(m as i32 - 1);
        loop {
            let phi = rng.gen::<f64>() * alpha;
            if rng.gen::<f64>() * top <= phi.sin().powi(m as i32 - 1) {
                break phi;
            }
        }
    };
    let w = loop {
        let g = gaussian(rng, d);
        let g = geom::add_scaled(&g, -dot(&g, pole), pole);
        if let Some(w) = geom::normalized(&g) {
            break w;
        }
    };
    let (s, c) = phi.sin_cos();
    pole.iter().zip(&w).map(|(p, w)| c * p + s * w).collect()
}

fn direction_or_first(v: &[f64]) -> Vec<f64> {
    geom::normalized(v).unwrap_or_else(|| geom::unit(v.len(), 0))
}

/// Cap half-angle on a sphere of radius `rad` about 0 seen from a center at
/// distance `d`: points `rad·ω` with `|rad·ω − c| ≤ r`. `None` when empty.
fn visible_angle(rad: f64, d: f64, r: f64) -> Option<f64> {
    if d == 0.0 {
        return (rad <= r).then_some(PI);
    }
    let c0 = (rad * rad + d * d - r * r) / (2.0 * rad * d);
    if c0 > 1.0 {
        None
    } else {
        Some(c0.max(-1.0).acos())
    }
}

fn split_uv(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (x[..4].to_vec(), x[4..].to_vec())
}

/// `∫ ρ^6 dρ / 7` over the `ρ` with `|ρ(ω₁,ω₂)/√2 − x| ≤ r`, given
/// `c_i = cos` of the angles to `u₀`, `v₀`.
fn simons_radial(a: f64, b: f64, x2: f64, r: f64, c1: f64, c2: f64) -> f64 {
    let s = std::f64::consts::SQRT_2 * (a * c1 + b * c2);
    let disc = s * s - 4.0 * (x2 - r * r);
    if disc < 0.0 {
        return 0.0;
    }
    let q = disc.sqrt();
    let hi = 0.5 * (s + q);
    let lo = (0.5 * (s - q)).max(0.0);
    if hi <= 0.0 {
        return 0.0;
    }
    (hi.powi(7) - lo.powi(7)) / 7.0
}

fn simons_mass(xb: &[f64], r: f64, nodes: usize) -> f64 {
    let (u0, v0) = split_uv(xb);
    let (mut a, mut b) = (norm(&u0), norm(&v0));
    if b > a {
        std::mem::swap(&mut a, &mut b);
    }
    let x2 = a * a + b * b;
    // area element ρ^6/8 dρ dω₁ dω₂, zonal reduction dω = 4π sin²φ dφ
    let factor = 2.0 * PI * PI;
    if x2 == 0.0 {
        return factor * (PI / 2.0).powi(2) * r.powi(7) / 7.0;
    }
    let sin2 = |p: f64| p.sin().powi(2);
    if x2 <= r * r {
        let total = plain_integral(0.0, PI, nodes, |p1| {
            sin2(p1) * plain_integral(0.0, PI, nodes, |p2| sin2(p2) * simons_radial(a, b, x2, r, p1.cos(), p2.cos()))
        });
        return factor * total;
    }
    let k = std::f64::consts::SQRT_2 * (x2 - r * r).sqrt();
    if (k - b) / a >= 1.0 {
        return 0.0;
    }
    let p1_max = ((k - b) / a).max(-1.0).acos();
    let inner = |p1: f64| -> f64 {
        let c1 = p1.cos();
        if b == 0.0 {
            return if a * c1 >= k {
                simons_radial(a, b, x2, r, c1, 1.0) * PI / 2.0
            } else {
                0.0
            };
        }
        let t = (k - a * c1) / b;
        if t >= 1.0 {
            return 0.0;
        }
        let p2_max = t.max(-1.0).acos();
        edge_integral(p2_max, nodes, |p2| sin2(p2) * simons_radial(a, b, x2, r, c1, p2.cos()))
    };
    // below `p1_kink` the whole φ₂ range is admissible
    let kink = if b > 0.0 && (k + b) / a < 1.0 {
        ((k + b) / a).max(-1.0).acos().min(p1_max)
    } else {
        0.0
    };
    let full = plain_integral(0.0, kink, nodes, |p1| sin2(p1) * inner(p1));
    let edge = edge_integral(p1_max - kink, nodes, |t| {
        let p1 = kink + t;
        sin2(p1) * inner(p1)
    });
    factor * (full + edge)
}

/// Smallest `|y|` over `y ∈ C ∩ B_r(x)`, `C` the Simons cone at the origin.
fn simons_rho_min(xb: &[f64], r: f64) -> Option<f64> {
    let x = norm(xb);
    if x <= r {
        return Some(0.0);
    }
    let (u0, v0) = split_uv(xb);
    let s = std::f64::consts::SQRT_2 * (norm(&u0) + norm(&v0));
    let disc = s * s - 4.0 * (x * x - r * r);
    (disc >= 0.0).then(|| 0.5 * (s - disc.sqrt()))
}

impl HypersurfaceModel {
    fn build(n: usize, shape: Shape) -> Result<Self> {
        let mut m = HypersurfaceModel {
            n,
            shape,
            working_radius: DEFAULT_WORKING_RADIUS,
            mass_bound: 0.0,
        };
        m.mass_bound = m.mass(&vec![0.0; n], m.working_radius)?.value;
        Ok(m)
    }

    pub fn with_working_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidModel(format!("working radius {radius}")));
        }
        self.working_radius = radius;
        self.mass_bound = self.mass(&vec![0.0; self.n], radius)?.value;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the hypersurface, `n − 1`.
    pub fn k(&self) -> usize {
        self.n - 1
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn working_radius(&self) -> f64 {
        self.working_radius
    }

    /// Mass inside the working ball.
    pub fn mass_bound(&self) -> f64 {
        self.mass_bound
    }

    pub fn id(&self) -> String {
        match &self.shape {
            Shape::Hyperplane { .. } => format!("hyperplane({})", self.n),
            Shape::Sphere { radius, .. } => format!("sphere({},{})", self.n, radius),
            Shape::Cylinder { axis, .. } => format!("cylinder({},{})", self.n, axis),
            Shape::Simons { .. } => "simons-cone".into(),
        }
    }

    /// Zero mean curvature.
    pub fn is_minimal(&self) -> bool {
        matches!(self.shape, Shape::Hyperplane { .. } | Shape::Simons { .. })
    }

    pub fn singular_points(&self) -> Vec<Vec<f64>> {
        match &self.shape {
            Shape::Simons { vertex } => vec![vertex.clone()],
            _ => Vec::new(),
        }
    }

    fn singular_distance(&self, x: &[f64]) -> Option<f64> {
        match &self.shape {
            Shape::Simons { vertex } => Some(dist(x, vertex)),
            _ => None,
        }
    }

    /// Nearest point of the hypersurface (for the Simons cone, the nearest
    /// point in the `(|u|, |v|)` plane).
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Hyperplane { point, normal } => {
                geom::add_scaled(x, -dot(&geom::sub(x, point), normal), normal)
            }
            Shape::Sphere { center, radius } => {
                let d = geom::sub(x, center);
                geom::add_scaled(center, *radius, &direction_or_first(&d))
            }
            Shape::Cylinder { axis, radius } => {
                let mut cross = x.to_vec();
                cross[*axis] = 0.0;
                let mut dir = geom::normalized(&cross).unwrap_or_else(|| {
                    geom::unit(self.n, if *axis == 0 { 1 } else { 0 })
                });
                for v in dir.iter_mut() {
                    *v *= radius;
                }
                dir[*axis] = x[*axis];
                dir
            }
            Shape::Simons { vertex } => {
                let (u, v) = split_uv(&geom::sub(x, vertex));
                let t = 0.5 * (norm(&u) + norm(&v));
                let mut y = geom::scale(&direction_or_first(&u), t);
                y.extend(geom::scale(&direction_or_first(&v), t));
                geom::add_scaled(vertex, 1.0, &y)
            }
        }
    }

    /// Gradient of the defining function.
    fn level_gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Hyperplane { normal, .. } => normal.clone(),
            Shape::Sphere { center, .. } => geom::scale(&geom::sub(x, center), 2.0),
            Shape::Cylinder { axis, .. } => {
                let mut g = geom::scale(x, 2.0);
                g[*axis] = 0.0;
                g
            }
            Shape::Simons { vertex } => {
                let mut g = geom::scale(&geom::sub(x, vertex), 2.0);
                for v in &mut g[4..] {
                    *v = -*v;
                }
                g
            }
        }
    }

    /// Unit normal, extended off the surface as the normalized gradient of
    /// the defining function.
    pub fn normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.level_gradient(x);
        if norm(&g) < 1e-300 {
            return Err(Error::SingularPoint);
        }
        Ok(geom::scale(&g, 1.0 / norm(&g)))
    }

    /// `|A|(x)`, Frobenius norm of the second fundamental form, for `x` on
    /// the surface.
    pub fn shape_norm(&self, x: &[f64]) -> Result<f64> {
        match &self.shape {
            Shape::Hyperplane { .. } => Ok(0.0),
            Shape::Sphere { radius, .. } => Ok(((self.n - 1) as f64).sqrt() / radius),
            Shape::Cylinder { radius, .. } => Ok(((self.n - 2) as f64).sqrt() / radius),
            Shape::Simons { vertex } => {
                let rho = dist(x, vertex);
                if rho < 1e-12 {
                    Err(Error::SingularPoint)
                } else {
                    Ok(6f64.sqrt() / rho)
                }
            }
        }
    }

    /// Shape operator `⟨D_{e_i} ν, e_j⟩` in an orthonormal tangent basis, by
    /// central differences of the normal.
    pub fn shape_operator_fd(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let nu = self.normal(x)?;
        let h = 1e-4
            * match self.singular_distance(x) {
                Some(d) if d < 1e-12 => return Err(Error::SingularPoint),
                Some(d) => d.min(1.0),
                None => 1.0,
            };
        let tangents = geom::complement(&[nu], self.n);
        let k = tangents.len();
        let mut a = DMatrix::zeros(k, k);
        for (i, e) in tangents.iter().enumerate() {
            let plus = self.normal(&geom::add_scaled(x, h, e))?;
            let minus = self.normal(&geom::add_scaled(x, -h, e))?;
            let d: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect();
            for (j, f) in tangents.iter().enumerate() {
                a[(i, j)] = dot(&d, f);
            }
        }
        Ok(a)
    }

    pub fn fd_shape_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.shape_operator_fd(x)?.norm())
    }

    /// Trace of the shape operator.
    pub fn mean_curvature(&self, x: &[f64]) -> Result<f64> {
        Ok(self.shape_operator_fd(x)?.trace())
    }

    /// `|M|(B_r(x))` by chart quadrature. The error is the difference to a
    /// half-order evaluation.
    pub fn mass(&self, x: &[f64], r: f64) -> Result<Estimate> {
        if x.len() != self.n {
            return Err(Error::InvalidModel(format!(
                "point of dimension {} for a model in R^{}",
                x.len(),
                self.n
            )));
        }
        if r <= 0.0 {
            return Ok(Estimate::exact(0.0));
        }
        let n = self.n;
        match &self.shape {
            Shape::Hyperplane { point, normal } => {
                let h = dot(&geom::sub(x, point), normal).abs();
                let rho2 = r * r - h * h;
                let v = if rho2 > 0.0 {
                    unit_ball_volume(n - 1) * rho2.powf((n - 1) as f64 / 2.0)
                } else {
                    0.0
                };
                Ok(Estimate::exact(v))
            }
            Shape::Sphere { center, radius } => {
                let d = dist(x, center);
                let v = match visible_angle(*radius, d, r) {
                    Some(alpha) => radius.powi(n as i32 - 1) * cap_area(n - 1, alpha),
                    None => 0.0,
                };
                Ok(Estimate::exact(v))
            }
            Shape::Cylinder { axis, radius } => {
                let hi = self.cylinder_mass(x, r, *axis, *radius, 64);
                let lo = self.cylinder_mass(x, r, *axis, *radius, 32);
                Ok(Estimate {
                    value: hi,
                    error: (hi - lo).abs(),
                })
            }
            Shape::Simons { vertex } => {
                let xb = geom::sub(x, vertex);
                let hi = simons_mass(&xb, r, 64);
                let lo = simons_mass(&xb, r, 32);
                Ok(Estimate {
                    value: hi,
                    error: (hi - lo).abs(),
                })
            }
        }
    }

    fn cylinder_mass(&self, x: &[f64], r: f64, axis: usize, rc: f64, nodes: usize) -> f64 {
        let m = self.n - 2;
        let mut cross = x.to_vec();
        cross[axis] = 0.0;
        let d = norm(&cross);
        // length of the axial chord through the ball over a cross-section point
        let chord = |phi: f64| {
            let q = r * r - rc * rc - d * d + 2.0 * rc * d * phi.cos();
            2.0 * q.max(0.0).sqrt()
        };
        let scale = rc.powi(m as i32);
        if d == 0.0 {
            return scale * unit_sphere_area(m + 1) * chord(0.0);
        }
        let Some(phi_max) = visible_angle(rc, d, r) else {
            return 0.0;
        };
        scale * unit_sphere_area(m) * edge_integral(phi_max, nodes, |p| chord(p) * p.sin().powi(m as i32 - 1))
    }

    /// `θ_r(x) = r^{-k} |M|(B_r(x))`.
    pub fn density(&self, x: &[f64], r: f64) -> Result<Estimate> {
        if r <= 0.0 {
            return Err(Error::Config(format!("density radius must be positive, got {r}")));
        }
        Ok(self.mass(x, r)?.scaled(r.powi(-(self.k() as i32))))
    }

    /// Density on the ladder `r0·γ^j`, `j = 0..=j_max`.
    pub fn mass_profile(&self, x: &[f64], r0: f64, gamma: f64, j_max: usize) -> Result<MassProfile> {
        let radii: Vec<f64> = (0..=j_max).map(|j| r0 * gamma.powi(j as i32)).collect();
        let theta = radii
            .iter()
            .map(|&r| self.density(x, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(MassProfile {
            center: x.to_vec(),
            radii,
            theta,
        })
    }

    /// `count` proposals from a region containing `M ∩ B_r(x)` with known
    /// area, kept when they land in the ball.
    pub fn sample_ball(&self, x: &[f64], r: f64, count: usize, rng: &mut ChaCha8Rng) -> BallSample {
        let n = self.n;
        let empty = BallSample {
            points: Vec::new(),
            weight: 0.0,
            proposals: count,
        };
        if count == 0 || r <= 0.0 {
            return empty;
        }
        let (area, points): (f64, Vec<Vec<f64>>) = match &self.shape {
            Shape::Hyperplane { point, normal } => {
                let h = dot(&geom::sub(x, point), normal);
                if h.abs() >= r {
                    return empty;
                }
                let c = geom::add_scaled(x, -h, normal);
                let rho = (r * r - h * h).sqrt();
                let basis = geom::complement(&[normal.clone()], n);
                let pts = (0..count)
                    .map(|_| {
                        let u = uniform_in_ball(rng, n - 1);
                        let mut y = c.clone();
                        for (ui, b) in u.iter().zip(&basis) {
                            for (yj, bj) in y.iter_mut().zip(b) {
                                *yj += rho * ui * bj;
                            }
                        }
                        y
                    })
                    .collect();
                (unit_ball_volume(n - 1) * rho.powi(n as i32 - 1), pts)
            }
            Shape::Sphere { center, radius } => {
                let off = geom::sub(x, center);
                let Some(alpha) = visible_angle(*radius, norm(&off), r) else {
                    return empty;
                };
                let pole = direction_or_first(&off);
                let pts = (0..count)
                    .map(|_| geom::add_scaled(center, *radius, &sample_cap(rng, &pole, alpha)))
                    .collect();
                (radius.powi(n as i32 - 1) * cap_area(n - 1, alpha), pts)
            }
            Shape::Cylinder { axis, radius } => {
                let cross: Vec<f64> = (0..n).filter(|&i| i != *axis).map(|i| x[i]).collect();
                let Some(alpha) = visible_angle(*radius, norm(&cross), r) else {
                    return empty;
                };
                let pole = direction_or_first(&cross);
                let pts = (0..count)
                    .map(|_| {
                        let w = sample_cap(rng, &pole, alpha);
                        let t = x[*axis] + r * (2.0 * rng.gen::<f64>() - 1.0);
                        let mut it = w.iter();
                        (0..n)
                            .map(|i| if i == *axis { t } else { radius * it.next().unwrap() })
                            .collect()
                    })
                    .collect();
                let area = radius.powi(n as i32 - 2) * cap_area(n - 2, alpha) * 2.0 * r;
                (area, pts)
            }
            Shape::Simons { vertex } => {
                let xb = geom::sub(x, vertex);
                let (u0, v0) = split_uv(&xb);
                let (a, b) = (norm(&u0), norm(&v0));
                let big = norm(&xb);
                let lo = (big - r).max(0.0);
                let hi = big + r;
                let angle = |c: f64| if c > r { (r / c).asin() } else { PI };
                let (au, av) = (angle(a), angle(b));
                let (pu, pv) = (direction_or_first(&u0), direction_or_first(&v0));
                let (l7, h7) = (lo.powi(7), hi.powi(7));
                let pts = (0..count)
                    .map(|_| {
                        let rho = (l7 + rng.gen::<f64>() * (h7 - l7)).powf(1.0 / 7.0);
                        let s = rho * std::f64::consts::FRAC_1_SQRT_2;
                        let mut y = geom::scale(&sample_cap(rng, &pu, au), s);
                        y.extend(geom::scale(&sample_cap(rng, &pv, av), s));
                        geom::add_scaled(vertex, 1.0, &y)
                    })
                    .collect();
                ((h7 - l7) / 56.0 * cap_area(3, au) * cap_area(3, av), pts)
            }
        };
        let r2 = r * r;
        BallSample {
            points: points
                .into_iter()
                .filter(|y| geom::dist_sq(y, x) <= r2)
                .collect(),
            weight: area / count as f64,
            proposals: count,
        }
    }

    /// Rescaled mass of `M ∩ B_r(x)` in (radial shell, sector, normal)
    /// bins, from `cfg.conical_samples` proposals seeded by `seed`.
    fn binned(&self, x: &[f64], r: f64, samples: usize, seed: u64) -> (Vec<f64>, usize) {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = self.sample_ball(x, r, samples, &mut rng);
        let mut bins = vec![0.0; RADIAL_BINS * 2 * n * n];
        let w = sample.weight / r.powi(self.k() as i32);
        for y in &sample.points {
            let Ok(nu) = self.normal(y) else { continue };
            let z = geom::scale(&geom::sub(y, x), 1.0 / r);
            let rz = norm(&z);
            let shell = if rz > 0.0 {
                ((-rz.log2()).floor().max(0.0) as usize).min(RADIAL_BINS - 1)
            } else {
                RADIAL_BINS - 1
            };
            let argmax = |v: &[f64]| {
                (0..v.len())
                    .max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()))
                    .unwrap_or(0)
            };
            let si = argmax(&z);
            let sector = 2 * si + usize::from(z[si] < 0.0);
            let cell = argmax(&nu);
            bins[(shell * 2 * n + sector) * n + cell] += w;
        }
        (bins, sample.points.len())
    }

    /// Surrogate for the distance of the rescaled measure `|M|_{x,r}` to the
    /// `ℓ`-conical measures: the least binned total variation, relative to
    /// the larger total mass, over hyperplanes through `x` (tangent plane
    /// and a deterministic net) and, when `ℓ` does not exceed its spine
    /// dimension, the model's own cone moved to vertex `x`. All candidates
    /// share the sampling seed.
    pub fn conical_defect(&self, x: &[f64], r: f64, ell: usize, cfg: &AnalysisConfig) -> Result<ConicalDefect> {
        let n = self.n;
        if ell > self.k() {
            return Err(Error::Config(format!("ell = {ell} exceeds k = {}", self.k())));
        }
        let seed = derive_seed(cfg.seed, x, r);
        let samples = cfg.conical_samples;
        let (mine, accepted) = self.binned(x, r, samples, seed);
        let mut candidates: Vec<(String, HypersurfaceModel)> = Vec::new();
        let on_surface = self.project(x);
        if let Ok(nu) = self.normal(&on_surface) {
            if self.shape_norm(&on_surface).is_ok() {
                candidates.push(("tangent-plane".into(), plane_model(x, &nu)?));
            }
        }
        for (i, frame) in grassmann_net(n, 1, cfg.conical_net).into_iter().enumerate() {
            candidates.push((format!("net-plane-{i}"), plane_model(x, &frame[0])?));
        }
        if let Shape::Simons { .. } = self.shape {
            if ell == 0 {
                let cone = HypersurfaceModel {
                    n,
                    shape: Shape::Simons { vertex: x.to_vec() },
                    working_radius: self.working_radius,
                    mass_bound: self.mass_bound,
                };
                candidates.push(("own-cone".into(), cone));
            }
        }
        let tv = |other: &[f64]| -> f64 {
            let total = mine.iter().sum::<f64>().max(other.iter().sum::<f64>());
            if total == 0.0 {
                return 0.0;
            }
            0.5 * mine.iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>() / total
        };
        let scored: Vec<(f64, String)> = candidates
            .par_iter()
            .map(|(name, m)| (tv(&m.binned(x, r, samples, seed).0), name.clone()))
            .collect();
        let (defect, best) = scored
            .into_iter()
            .fold((f64::INFINITY, String::new()), |acc, c| if c.0 < acc.0 { c } else { acc });
        Ok(ConicalDefect {
            ell,
            defect,
            best,
            candidates: candidates.len(),
            accepted,
            budget_exceeded: accepted < 64,
        })
    }

    /// `sup_{B_r(x) ∩ M} |A|`. Curvature is constant on the smooth catalog
    /// surfaces; on the Simons cone it is largest at the point nearest the
    /// vertex.
    fn shape_sup(&self, x: &[f64], r: f64) -> f64 {
        match &self.shape {
            Shape::Simons { vertex } => match simons_rho_min(&geom::sub(x, vertex), r) {
                Some(rho) if rho > 0.0 => 6f64.sqrt() / rho,
                Some(_) => f64::INFINITY,
                None => 0.0,
            },
            _ => self.shape_norm(x).unwrap_or(0.0),
        }
    }

    /// Largest `r ≤ R − |x|` with `r · sup_{B_r(x) ∩ M} |A| ≤ 1` (single
    /// sheet, `N = 1`), bisected to relative tolerance `1e-4`.
    pub fn current_regularity_scale(&self, x: &[f64]) -> Result<RegularityScale> {
        let cap = (self.working_radius - norm(x)).max(0.0);
        let sd = self.singular_distance(x);
        let singular_limited = sd.is_some_and(|d| d < cap);
        let result = |r| RegularityScale {
            r,
            cap,
            singular_limited,
        };
        if cap == 0.0 || sd == Some(0.0) {
            return Ok(result(0.0));
        }
        let ok = |r: f64| r * self.shape_sup(x, r) <= 1.0;
        if ok(cap) {
            return Ok(result(cap));
        }
        if !matches!(self.shape, Shape::Simons { .. }) {
            // constant curvature: the condition is r·κ ≤ 1
            let kappa = self.shape_sup(x, cap);
            return Ok(result(cap.min(1.0 / kappa)));
        }
        let mut hi = sd.unwrap_or(cap).min(cap);
        let mut lo = hi / 64.0;
        while !ok(lo) {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-12 * cap {
                return Ok(result(0.0));
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
        Ok(result(lo))
    }

    /// `∫_{M ∩ B_1 \ B_ε(sing)} g dH^k` with `g = |A|^p` or `r_I^{-p}`,
    /// over the cutoff sweep of `cfg`. On the Simons cone the integral runs
    /// over dyadic shells about the vertex with a product rule on the link;
    /// elsewhere it is a Monte Carlo average over `M ∩ B_1`.
    pub fn lp_a(&self, p: f64, which: LpIntegrand, cfg: &AnalysisConfig) -> Result<LpResult> {
        if !(p > 0.0) {
            return Err(Error::Config(format!("p must be positive, got {p}")));
        }
        let g = |y: &[f64]| -> f64 {
            match which {
                LpIntegrand::ShapeOperator => self.shape_norm(y).map_or(f64::INFINITY, |a| a.powf(p)),
                LpIntegrand::InverseCurrentRegularity => match self.current_regularity_scale(y) {
                    Ok(s) if s.r > 0.0 => s.r.powf(-p),
                    _ => f64::INFINITY,
                },
                _ => f64::NAN,
            }
        };
        if !matches!(which, LpIntegrand::ShapeOperator | LpIntegrand::InverseCurrentRegularity) {
            return Err(Error::Config("map integrand on a hypersurface".into()));
        }
        let cmin = cfg.cutoff_min_exp as i32;
        let cmax = cfg.cutoff_max_exp as i32;
        let vertex = match &self.shape {
            Shape::Simons { vertex } if norm(vertex) < 1.0 - 1e-9 => Some(vertex.clone()),
            _ => None,
        };
        let Some(vertex) = vertex else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[p], 1.0));
            let sample = self.sample_ball(&vec![0.0; self.n], 1.0, cfg.mc_samples, &mut rng);
            let vals: Vec<f64> = sample.points.iter().map(|y| g(y)).collect();
            let k = sample.proposals as f64;
            let sum: f64 = vals.iter().sum();
            let sum2: f64 = vals.iter().map(|v| v * v).sum();
            let mean = sum / k;
            let var = (sum2 / k - mean * mean).max(0.0);
            let value = sample.weight * sum;
            let error = sample.weight * k * (var / k).sqrt();
            return Ok(LpResult {
                p,
                integrand: which,
                value,
                error,
                sweep: (cmin..=cmax).map(|i| (0.5f64.powi(i), value)).collect(),
                tail_exponent: f64::INFINITY,
                verdict: Verdict::Convergent,
            });
        };
        let radial = match which {
            LpIntegrand::ShapeOperator => cfg.lp_radial,
            _ => cfg.rf_radial,
        };
        let link = cfg.rf_sphere.max(1);
        let hi = simons_shells(&vertex, &g, radial, link, cmin, cmax);
        let lo = simons_shells(&vertex, &g, (radial / 2).max(2), (link - 1).max(1), cmin, cmax);
        let lo_total = lo.0 + lo.1.iter().sum::<f64>();
        Ok(assemble_sweep(p, which, hi.0, &hi.1, lo_total, cmin, cfg.divergence_alpha))
    }

    /// `|M|(T_r(S) ∩ B_1)` by Karp–Luby sampling over the balls `B_r(s)`.
    pub fn current_tube_mass(&self, set: &[Vec<f64>], r: f64, samples: usize, seed: u64) -> Result<TubeEstimate> {
        let zero = TubeEstimate {
            r,
            volume: 0.0,
            error: 0.0,
            samples,
        };
        if set.is_empty() || samples == 0 {
            return Ok(zero);
        }
        let masses = set
            .iter()
            .map(|s| self.mass(s, r).map(|e| e.value))
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = masses.iter().sum();
        if total == 0.0 {
            return Ok(zero);
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        let index = PointIndex::new(self.n, set);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[set.len() as f64], r));
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..samples {
            let t = rng.gen::<f64>() * total;
            let i = cumulative.partition_point(|c| *c < t).min(set.len() - 1);
            let y = (0..10_000)
                .find_map(|_| self.sample_ball(&set[i], r, 1, &mut rng).points.pop());
            let w = match y {
                Some(y) if norm(&y) <= 1.0 => 1.0 / index.count_within(&y, r).max(1) as f64,
                _ => 0.0,
            };
            sum += w;
            sum2 += w * w;
        }
        let k = samples as f64;
        let mean = sum / k;
        let var = (sum2 / k - mean * mean).max(0.0);
        Ok(TubeEstimate {
            r,
            volume: total * mean,
            error: total * (var / k).sqrt(),
            samples,
        })
    }
}

/// Outer part (`ρ ≥ 2^{-cmin}`) and inner dyadic shells of
/// `∫_{C ∩ B_1} g`, `C` the Simons cone at `vertex`, in the chart
/// `ρ(ω₁, ω₂)/√2` with area element `ρ^6/8`.
fn simons_shells<G: Fn(&[f64]) -> f64 + Sync>(
    vertex: &[f64],
    g: &G,
    radial: usize,
    link: usize,
    cmin: i32,
    cmax: i32,
) -> (f64, Vec<f64>) {
    let s3 = SphereRule::product(4, link);
    let pairs: Vec<(usize, usize)> = (0..s3.len())
        .flat_map(|i| (0..s3.len()).map(move |j| (i, j)))
        .collect();
    let segment = |a: f64, b: f64| -> f64 {
        let (rs, ws) = gauss_legendre_on(radial, a, b);
        let parts: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let mut dir = s3.directions[i].clone();
                dir.extend_from_slice(&s3.directions[j]);
                let mut s = 0.0;
                for (rho, wr) in rs.iter().zip(&ws) {
                    let y = geom::add_scaled(vertex, rho * std::f64::consts::FRAC_1_SQRT_2, &dir);
                    if norm(&y) <= 1.0 {
                        s += wr * rho.powi(6) / 8.0 * g(&y);
                    }
                }
                s3.weights[i] * s3.weights[j] * s
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

fn plane_model(point: &[f64], normal: &[f64]) -> Result<HypersurfaceModel> {
    let normal = geom::normalized(normal).ok_or_else(|| Error::InvalidModel("zero normal".into()))?;
    Ok(HypersurfaceModel {
        n: point.len(),
        shape: Shape::Hyperplane {
            point: point.to_vec(),
            normal,
        },
        working_radius: DEFAULT_WORKING_RADIUS,
        mass_bound: 0.0,
    })
}

pub const DEFAULT_WORKING_RADIUS: f64 = 2.0;

/// `{x_n = 0}` in `R^n`.
pub fn hyperplane(n: usize) -> Result<HypersurfaceModel> {
    if n < 2 {
        return Err(Error::InvalidModel(format!("hyperplane needs n ≥ 2, got {n}")));
    }
    HypersurfaceModel::build(
        n,
        Shape::Hyperplane {
            point: vec![0.0; n],
            normal: geom::unit(n, n - 1),
        },
    )
}

/// The hyperplane through `point` orthogonal to `normal`.
pub fn hyperplane_through(point: &[f64], normal: &[f64]) -> Result<HypersurfaceModel> {
    let mut m = plane_model(point, normal)?;
    if m.n < 2 {
        return Err(Error::InvalidModel("hyperplane needs n ≥ 2".into()));
    }
    m.mass_bound = m.mass(&vec![0.0; m.n], m.working_radius)?.value;
    Ok(m)
}

/// Round sphere of radius `radius` about the origin.
pub fn sphere(n: usize, radius: f64) -> Result<HypersurfaceModel> {
    if n < 2 || !(radius > 0.0) {
        return Err(Error::InvalidModel(format!("sphere({n},{radius})")));
    }
    HypersurfaceModel::build(
        n,
        Shape::Sphere {
            center: vec![0.0; n],
            radius,
        },
    )
}

/// `S^{n-2}(1) × R` with the line along coordinate `axis`.
pub fn cylinder(n: usize, axis: usize) -> Result<HypersurfaceModel> {
    if n < 3 || axis >= n {
        return Err(Error::InvalidModel(format!("cylinder({n},{axis})")));
    }
    HypersurfaceModel::build(n, Shape::Cylinder { axis, radius: 1.0 })
}

/// `{(u, v) ∈ R^4 × R^4 : |u| = |v|}`.
pub fn simons_cone() -> Result<HypersurfaceModel> {
    HypersurfaceModel::build(8, Shape::Simons { vertex: vec![0.0; 8] })
}

/// A point of the Simons cone at distance `rho` from the vertex.
pub fn simons_point(u: &[f64], v: &[f64], rho: f64) -> Vec<f64> {
    let s = rho * std::f64::consts::FRAC_1_SQRT_2;
    let mut y = geom::scale(&direction_or_first(u), s);
    y.extend(geom::scale(&direction_or_first(v), s));
    y
}
