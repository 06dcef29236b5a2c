//! Closed-form harmonic-map test instances.
//!
//! A [`ManifoldMap`] is a kernel (the analytic formula, in its own
//! coordinates) seen through an affine frame `z ↦ offset + scale·z`, so
//! that rescaling composes without nesting closures and
//! `rescale(rescale(f, y, r), 0, s)` is literally `rescale(f, y, r·s)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{self, dot, norm, unit_sphere_area};
use crate::quadrature::gauss_legendre_on;

const MAX_DIM: usize = 16;

/// Analytic description of a sphere-valued map on (a ball in) R^n.
///
/// Only `value_into` is mandatory; missing derivative formulas fall back to
/// central finite differences in [`ManifoldMap`].
pub trait MapKernel: Send + Sync + fmt::Debug {
    fn domain_dim(&self) -> usize;
    /// `m`, where the target is the unit sphere `S^m ⊂ R^{m+1}`.
    fn target_dim(&self) -> usize;
    fn value_into(&self, x: &[f64], out: &mut [f64]);
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
    /// `|∇f|^2` in closed form, if cheaper than the Jacobian.
    fn gradient_norm_sq(&self, _x: &[f64]) -> Option<f64> {
        None
    }
    /// `|Df(x)·v|^2` in closed form, if cheaper than the Jacobian.
    fn directional_norm_sq(&self, _x: &[f64], _v: &[f64]) -> Option<f64> {
        None
    }
    /// Frobenius norm of the second differential.
    fn hessian_norm(&self, _x: &[f64]) -> Option<f64> {
        None
    }
    /// Declared isolated singular points.
    fn singular_points(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }
    /// Closest point of the declared singular set.
    fn nearest_singular(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
    /// A declared singular affine plane of dimension at least 1, as a base
    /// point and an orthonormal frame.
    fn singular_plane(&self) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        None
    }
    fn id(&self) -> String;
}

/// A sphere-valued map on the ball `B_R(0) ⊂ R^n`.
#[derive(Clone)]
pub struct ManifoldMap {
    kernel: Arc<dyn MapKernel>,
    offset: Vec<f64>,
    scale: f64,
    radius: f64,
    energy_bound: f64,
}

impl fmt::Debug for ManifoldMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldMap")
            .field("id", &self.id())
            .field("radius", &self.radius)
            .field("energy_bound", &self.energy_bound)
            .finish()
    }
}

impl ManifoldMap {
    pub fn from_kernel(kernel: Arc<dyn MapKernel>, radius: f64, energy_bound: f64) -> Self {
        let n = kernel.domain_dim();
        assert!(n <= MAX_DIM, "domain dimension {n} exceeds {MAX_DIM}");
        ManifoldMap {
            kernel,
            offset: vec![0.0; n],
            scale: 1.0,
            radius,
            energy_bound,
        }
    }

    pub fn domain_dim(&self) -> usize {
        self.offset.len()
    }

    pub fn target_dim(&self) -> usize {
        self.kernel.target_dim()
    }

    /// Dimension of the embedding space of the target sphere.
    pub fn embed_dim(&self) -> usize {
        self.kernel.target_dim() + 1
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn energy_bound(&self) -> f64 {
        self.energy_bound
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_energy_bound(mut self, bound: f64) -> Self {
        self.energy_bound = bound;
        self
    }

    pub fn kernel(&self) -> &Arc<dyn MapKernel> {
        &self.kernel
    }

    pub fn id(&self) -> String {
        let id = self.kernel.id();
        if self.scale == 1.0 && self.offset.iter().all(|&o| o == 0.0) {
            id
        } else {
            format!("rescaled({id}, {:?}, {})", self.offset, self.scale)
        }
    }

    #[inline]
    fn physical(&self, x: &[f64], buf: &mut [f64; MAX_DIM]) -> usize {
        let n = self.offset.len();
        for i in 0..n {
            buf[i] = self.offset[i] + self.scale * x[i];
        }
        n
    }

    /// Unchecked evaluation into `out` (length `m + 1`).
    #[inline]
    pub fn value_into(&self, x: &[f64], out: &mut [f64]) {
        let mut buf = [0.0; MAX_DIM];
        let n = self.physical(x, &mut buf);
        self.kernel.value_into(&buf[..n], out);
    }

    /// Unchecked evaluation.
    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.embed_dim()];
        self.value_into(x, &mut out);
        out
    }

    /// Checked evaluation: rejects points outside the domain and declared
    /// singular points.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = norm(x);
        if r > self.radius * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain {
                norm: r,
                radius: self.radius,
            });
        }
        if self.singular_distance(x) == Some(0.0) {
            return Err(Error::SingularPoint);
        }
        Ok(self.value(x))
    }

    /// `Df(x)`, an `(m+1) × n` matrix; analytic when the kernel provides it.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut buf = [0.0; MAX_DIM];
        let n = self.physical(x, &mut buf);
        match self.kernel.jacobian(&buf[..n]) {
            Some(j) => j * self.scale,
            None => self.fd_jacobian(x),
        }
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        let n = self.domain_dim();
        // probe away from the usual singular points
        let probe: Vec<f64> = (0..n).map(|i| 0.123 + 0.017 * i as f64).collect();
        self.kernel.jacobian(&probe).is_some()
    }

    /// Central differences with step `1e-5·max(1, |x|)`.
    pub fn fd_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.domain_dim();
        let m1 = self.embed_dim();
        let h = 1e-5 * norm(x).max(1.0);
        let mut j = DMatrix::zeros(m1, n);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; m1];
        let mut fm = vec![0.0; m1];
        for c in 0..n {
            xp[c] = x[c] + h;
            self.value_into(&xp, &mut fp);
            xp[c] = x[c] - h;
            self.value_into(&xp, &mut fm);
            xp[c] = x[c];
            for r in 0..m1 {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        j
    }

    /// `|∇f|^2` (squared Frobenius norm of `Df`).
    pub fn gradient_norm_sq(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0; MAX_DIM];
        let n = self.physical(x, &mut buf);
        if let Some(g) = self.kernel.gradient_norm_sq(&buf[..n]) {
            return g * self.scale * self.scale;
        }
        self.jacobian(x).norm_squared()
    }

    /// `|Df(x)·dir|^2`.
    pub fn directional_norm_sq(&self, x: &[f64], dir: &[f64]) -> f64 {
        let mut buf = [0.0; MAX_DIM];
        let n = self.physical(x, &mut buf);
        if let Some(g) = self.kernel.directional_norm_sq(&buf[..n], dir) {
            return g * self.scale * self.scale;
        }
        self.directional_derivative(x, dir).iter().map(|v| v * v).sum()
    }

    /// `Df(x)·dir`.
    pub fn directional_derivative(&self, x: &[f64], dir: &[f64]) -> Vec<f64> {
        let mut buf = [0.0; MAX_DIM];
        let n = self.physical(x, &mut buf);
        if let Some(j) = self.kernel.jacobian(&buf[..n]) {
            let v = nalgebra::DVector::from_column_slice(dir);
            return (j * v * self.scale).iter().copied().collect();
        }
        let h = 1e-5 * norm(x).max(1.0);
        let xp = geom::add_scaled(x, h, dir);
        let xm = geom::add_scaled(x, -h, dir);
        let fp = self.value(&xp);
        let fm = self.value(&xm);
        fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    }

    /// Frobenius norm of `∇²f`; finite differences (step `1e-4·max(1,|x|)`)
    /// when no closed form is available.
    pub fn hessian_norm(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0; MAX_DIM];
        let n = self.physical(x, &mut buf);
        if let Some(h) = self.kernel.hessian_norm(&buf[..n]) {
            return h * self.scale * self.scale;
        }
        self.fd_hessian_norm(x)
    }

    pub fn fd_hessian_norm(&self, x: &[f64]) -> f64 {
        let n = self.domain_dim();
        let m1 = self.embed_dim();
        let h = 1e-4 * norm(x).max(1.0);
        let f0 = self.value(x);
        let mut y = x.to_vec();
        let mut total = 0.0;
        for i in 0..n {
            for j in i..n {
                let d2: Vec<f64> = if i == j {
                    y[i] = x[i] + h;
                    let fp = self.value(&y);
                    y[i] = x[i] - h;
                    let fm = self.value(&y);
                    y[i] = x[i];
                    (0..m1).map(|r| (fp[r] - 2.0 * f0[r] + fm[r]) / (h * h)).collect()
                } else {
                    let mut eval = |si: f64, sj: f64| {
                        y[i] = x[i] + si * h;
                        y[j] = x[j] + sj * h;
                        let v = self.value(&y);
                        y[i] = x[i];
                        y[j] = x[j];
                        v
                    };
                    let pp = eval(1.0, 1.0);
                    let pm = eval(1.0, -1.0);
                    let mp = eval(-1.0, 1.0);
                    let mm = eval(-1.0, -1.0);
                    (0..m1)
                        .map(|r| (pp[r] - pm[r] - mp[r] + mm[r]) / (4.0 * h * h))
                        .collect()
                };
                let mult = if i == j { 1.0 } else { 2.0 };
                total += mult * d2.iter().map(|v| v * v).sum::<f64>();
            }
        }
        total.sqrt()
    }

    /// Declared isolated singular points, in this map's coordinates.
    pub fn singular_points(&self) -> Vec<Vec<f64>> {
        self.kernel
            .singular_points()
            .into_iter()
            .map(|p| self.to_local(&p))
            .collect()
    }

    /// Declared singular plane, in this map's coordinates.
    pub fn singular_plane(&self) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        self.kernel
            .singular_plane()
            .map(|(base, frame)| (self.to_local(&base), frame))
    }

    /// Closest declared singular point, in this map's coordinates.
    pub fn nearest_singular(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut buf = [0.0; MAX_DIM];
        let n = self.physical(x, &mut buf);
        self.kernel
            .nearest_singular(&buf[..n])
            .map(|p| self.to_local(&p))
    }

    pub fn singular_distance(&self, x: &[f64]) -> Option<f64> {
        self.nearest_singular(x).map(|p| geom::dist(&p, x))
    }

    fn to_local(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.offset)
            .map(|(pi, oi)| (pi - oi) / self.scale)
            .collect()
    }

    /// `z ↦ f(y + r z)` on `B_{(R - |y|)/r}(0)`.
    pub fn rescale(&self, y: &[f64], r: f64) -> Result<ManifoldMap> {
        let room = self.radius - norm(y);
        if !(r > 0.0) || r >= room {
            return Err(Error::OutOfDomain {
                norm: norm(y) + r,
                radius: self.radius,
            });
        }
        let n = self.domain_dim();
        let offset = (0..n).map(|i| self.offset[i] + self.scale * y[i]).collect();
        Ok(ManifoldMap {
            kernel: self.kernel.clone(),
            offset,
            scale: self.scale * r,
            radius: room / r,
            energy_bound: self.energy_bound * r.powi(2 - n as i32),
        })
    }
}

// ---------------------------------------------------------------------------
// Catalog kernels

/// `x ↦ x/|x|`, singular at the origin.
#[derive(Debug, Clone)]
pub struct Radial {
    pub n: usize,
}

impl MapKernel for Radial {
    fn domain_dim(&self) -> usize {
        self.n
    }
    fn target_dim(&self) -> usize {
        self.n - 1
    }
    fn value_into(&self, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi / r;
        }
    }
    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let r = norm(x);
        let n = self.n;
        Some(DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            (d - x[i] * x[j] / (r * r)) / r
        }))
    }
    fn gradient_norm_sq(&self, x: &[f64]) -> Option<f64> {
        Some((self.n - 1) as f64 / dot(x, x))
    }
    fn directional_norm_sq(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        let xx = dot(x, x);
        let xv = dot(x, v);
        Some((dot(v, v) - xv * xv / xx) / xx)
    }
    fn hessian_norm(&self, x: &[f64]) -> Option<f64> {
        Some((3.0 * (self.n - 1) as f64).sqrt() / dot(x, x))
    }
    fn singular_points(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.n]]
    }
    fn nearest_singular(&self, _x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.n])
    }
    fn id(&self) -> String {
        format!("radial({},{})", self.n, self.n - 1)
    }
}

#[derive(Debug, Clone)]
pub struct Constant {
    pub n: usize,
    pub w: Vec<f64>,
}

impl MapKernel for Constant {
    fn domain_dim(&self) -> usize {
        self.n
    }
    fn target_dim(&self) -> usize {
        self.w.len() - 1
    }
    fn value_into(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.w);
    }
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(self.w.len(), self.n))
    }
    fn gradient_norm_sq(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
    fn directional_norm_sq(&self, _x: &[f64], _v: &[f64]) -> Option<f64> {
        Some(0.0)
    }
    fn hessian_norm(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
    fn id(&self) -> String {
        format!("constant({})", join(&self.w))
    }
}

/// `x ↦ (cos a·x, sin a·x)`, a smooth harmonic map into the circle.
#[derive(Debug, Clone)]
pub struct Geodesic {
    pub a: Vec<f64>,
}

impl MapKernel for Geodesic {
    fn domain_dim(&self) -> usize {
        self.a.len()
    }
    fn target_dim(&self) -> usize {
        1
    }
    fn value_into(&self, x: &[f64], out: &mut [f64]) {
        let (s, c) = dot(&self.a, x).sin_cos();
        out[0] = c;
        out[1] = s;
    }
    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let (s, c) = dot(&self.a, x).sin_cos();
        let n = self.a.len();
        Some(DMatrix::from_fn(2, n, |r, j| {
            if r == 0 {
                -s * self.a[j]
            } else {
                c * self.a[j]
            }
        }))
    }
    fn gradient_norm_sq(&self, _x: &[f64]) -> Option<f64> {
        Some(dot(&self.a, &self.a))
    }
    fn directional_norm_sq(&self, _x: &[f64], v: &[f64]) -> Option<f64> {
        Some(dot(&self.a, v).powi(2))
    }
    fn hessian_norm(&self, _x: &[f64]) -> Option<f64> {
        Some(dot(&self.a, &self.a))
    }
    fn id(&self) -> String {
        format!("geodesic({})", join(&self.a))
    }
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(",")
}

// ---------------------------------------------------------------------------
// Homogeneous models

/// Link map on the unit sphere of the complement of the defining plane,
/// extended 0-homogeneously.
#[derive(Debug, Clone, PartialEq)]
pub enum Link {
    /// `σ ↦ σ`; requires a complement of dimension at least 2.
    Identity,
    Constant(Vec<f64>),
    /// Piecewise-constant link sampled at sphere directions (nearest node).
    Tabulated {
        directions: Vec<Vec<f64>>,
        values: Vec<Vec<f64>>,
    },
}

impl Link {
    fn target_dim(&self, complement_dim: usize) -> usize {
        match self {
            Link::Identity => complement_dim - 1,
            Link::Constant(w) => w.len() - 1,
            Link::Tabulated { values, .. } => values[0].len() - 1,
        }
    }

    fn id(&self) -> String {
        match self {
            Link::Identity => "identity".to_string(),
            Link::Constant(w) => format!("constant({})", join(w)),
            Link::Tabulated { directions, .. } => format!("tabulated[{}]", directions.len()),
        }
    }
}

/// A map that is dilation invariant about `base` and translation invariant
/// along the `k`-plane spanned by `frame`.
#[derive(Debug, Clone)]
pub struct HomogeneousModel {
    pub base: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
    pub complement: Vec<Vec<f64>>,
    pub link: Link,
}

impl HomogeneousModel {
    pub fn n(&self) -> usize {
        self.base.len()
    }

    pub fn k(&self) -> usize {
        self.frame.len()
    }

    /// Complement coordinates of `x - base`.
    fn transverse(&self, x: &[f64]) -> ([f64; MAX_DIM], usize) {
        let mut u = [0.0; MAX_DIM];
        let d = self.complement.len();
        for (j, c) in self.complement.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..x.len() {
                s += c[i] * (x[i] - self.base[i]);
            }
            u[j] = s;
        }
        (u, d)
    }

    fn singular(&self) -> bool {
        !matches!(self.link, Link::Constant(_)) && !self.complement.is_empty()
    }

    /// Turn the model into an evaluable map on `B_radius(0)`.
    pub fn into_map(self, radius: f64) -> ManifoldMap {
        let bound = self.energy_on_ball(radius);
        ManifoldMap::from_kernel(Arc::new(self), radius, bound)
    }

    /// `∫_{B_R(0)} |∇h|^2` in closed form where it is finite and known;
    /// infinity otherwise.
    fn energy_on_ball(&self, radius: f64) -> f64 {
        let d = self.complement.len();
        let k = self.k();
        match &self.link {
            Link::Constant(_) => 0.0,
            Link::Identity if d >= 3 => {
                // ball B_R(0) ⊂ B_{R+|base|}(base)
                let rr = radius + norm(&self.base);
                let g = |s: f64| (rr * rr - s * s).max(0.0).powf((d as f64 - 2.0) / 2.0);
                let plane_integral = match k {
                    0 => g(0.0),
                    1 => {
                        let (x, w) = gauss_legendre_on(64, 0.0, rr);
                        2.0 * x.iter().zip(&w).map(|(s, w)| w * g(*s)).sum::<f64>()
                    }
                    _ => {
                        let (x, w) = gauss_legendre_on(64, 0.0, rr);
                        unit_sphere_area(k)
                            * x.iter()
                                .zip(&w)
                                .map(|(s, w)| w * s.powi(k as i32 - 1) * g(*s))
                                .sum::<f64>()
                    }
                };
                (d as f64 - 1.0) * unit_sphere_area(d) / (d as f64 - 2.0) * plane_integral
            }
            _ => f64::INFINITY,
        }
    }
}

impl MapKernel for HomogeneousModel {
    fn domain_dim(&self) -> usize {
        self.base.len()
    }
    fn target_dim(&self) -> usize {
        self.link.target_dim(self.complement.len())
    }
    fn value_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.link {
            Link::Constant(w) => out.copy_from_slice(w),
            Link::Identity => {
                let (u, d) = self.transverse(x);
                let r = u[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
                for j in 0..d {
                    out[j] = u[j] / r;
                }
            }
            Link::Tabulated { directions, values } => {
                let (u, d) = self.transverse(x);
                let mut best = 0;
                let mut best_dot = f64::NEG_INFINITY;
                for (i, dir) in directions.iter().enumerate() {
                    let s = dot(dir, &u[..d]);
                    if s > best_dot {
                        best_dot = s;
                        best = i;
                    }
                }
                out.copy_from_slice(&values[best]);
            }
        }
    }
    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.n();
        match &self.link {
            Link::Constant(w) => Some(DMatrix::zeros(w.len(), n)),
            Link::Identity => {
                let (u, d) = self.transverse(x);
                let r2: f64 = u[..d].iter().map(|v| v * v).sum();
                let r = r2.sqrt();
                // (I - ûûᵀ)/|u| · Cᵀ
                Some(DMatrix::from_fn(d, n, |a, i| {
                    let mut s = 0.0;
                    for b in 0..d {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        s += (delta - u[a] * u[b] / r2) / r * self.complement[b][i];
                    }
                    s
                }))
            }
            Link::Tabulated { values, .. } => Some(DMatrix::zeros(values[0].len(), n)),
        }
    }
    fn gradient_norm_sq(&self, x: &[f64]) -> Option<f64> {
        match &self.link {
            Link::Identity => {
                let (u, d) = self.transverse(x);
                let r2: f64 = u[..d].iter().map(|v| v * v).sum();
                Some((d - 1) as f64 / r2)
            }
            _ => Some(0.0),
        }
    }
    fn directional_norm_sq(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        match &self.link {
            Link::Identity => {
                let (u, d) = self.transverse(x);
                let r2: f64 = u[..d].iter().map(|t| t * t).sum();
                let mut cv2 = 0.0;
                let mut ucv = 0.0;
                for (j, c) in self.complement.iter().enumerate() {
                    let cv = dot(c, v);
                    cv2 += cv * cv;
                    ucv += u[j] * cv;
                }
                Some((cv2 - ucv * ucv / r2) / r2)
            }
            _ => Some(0.0),
        }
    }
    fn hessian_norm(&self, x: &[f64]) -> Option<f64> {
        match &self.link {
            Link::Identity => {
                let (u, d) = self.transverse(x);
                let r2: f64 = u[..d].iter().map(|v| v * v).sum();
                Some((3.0 * (d - 1) as f64).sqrt() / r2)
            }
            _ => Some(0.0),
        }
    }
    fn singular_points(&self) -> Vec<Vec<f64>> {
        if self.singular() && self.frame.is_empty() {
            vec![self.base.clone()]
        } else {
            Vec::new()
        }
    }
    fn nearest_singular(&self, x: &[f64]) -> Option<Vec<f64>> {
        if !self.singular() {
            return None;
        }
        let mut p = self.base.clone();
        for e in &self.frame {
            let c: f64 = (0..x.len()).map(|i| e[i] * (x[i] - self.base[i])).sum();
            for i in 0..x.len() {
                p[i] += c * e[i];
            }
        }
        Some(p)
    }
    fn singular_plane(&self) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        (self.singular() && !self.frame.is_empty()).then(|| (self.base.clone(), self.frame.clone()))
    }
    fn id(&self) -> String {
        format!(
            "homogeneous({}, {:?}, {})",
            self.k(),
            self.frame,
            self.link.id()
        )
    }
}

/// Build a k-homogeneous model from a base point, a spanning frame for the
/// defining plane, and a link map.
pub fn make_homogeneous(base: &[f64], plane: &[Vec<f64>], link: Link) -> Result<HomogeneousModel> {
    let n = base.len();
    if plane.len() > n || plane.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidModel(format!(
            "plane frame must consist of at most {n} vectors of length {n}"
        )));
    }
    let gram = geom::gram_determinant(plane);
    if !(gram >= 1e-12) {
        return Err(Error::DegenerateFrame { gram_det: gram });
    }
    let frame = geom::gram_schmidt(plane, 1e-12);
    let complement = geom::complement(&frame, n);
    let d = complement.len();
    match &link {
        Link::Identity if d < 2 => {
            return Err(Error::InvalidLink(format!(
                "identity link needs a complement of dimension >= 2, got {d}"
            )))
        }
        Link::Constant(w) if (norm(w) - 1.0).abs() > 1e-10 || w.len() < 2 => {
            return Err(Error::InvalidLink("constant link must be a unit vector".into()))
        }
        Link::Tabulated { directions, values }
            if directions.is_empty() || directions.len() != values.len() =>
        {
            return Err(Error::InvalidLink("empty or mismatched tabulated link".into()))
        }
        _ => {}
    }
    if d == 0 && !matches!(link, Link::Constant(_)) {
        return Err(Error::InvalidLink(
            "an n-homogeneous model is constant; use a constant link".into(),
        ));
    }
    Ok(HomogeneousModel {
        base: base.to_vec(),
        frame,
        complement,
        link,
    })
}

// ---------------------------------------------------------------------------
// Perturbation wrapper

#[derive(Debug, Clone)]
struct Mode {
    freq: Vec<f64>,
    phase: f64,
    coef: Vec<f64>,
}

/// `x ↦ Π(base(x) + α φ(x))` with `φ` a seeded sum of Fourier modes and
/// `Π` the nearest-point projection to the sphere.
#[derive(Debug, Clone)]
pub struct Perturbed {
    base: ManifoldMap,
    amplitude: f64,
    seed: u64,
    modes: Vec<Mode>,
}

impl Perturbed {
    pub fn new(base: ManifoldMap, amplitude: f64, seed: u64) -> Self {
        let n = base.domain_dim();
        let m1 = base.embed_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = 6;
        let modes = (0..count)
            .map(|_| Mode {
                freq: (0..n).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect(),
                phase: rng.gen::<f64>() * std::f64::consts::TAU,
                coef: (0..m1)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) / (count as f64).sqrt())
                    .collect(),
            })
            .collect();
        Perturbed {
            base,
            amplitude,
            seed,
            modes,
        }
    }

    pub fn into_map(self) -> ManifoldMap {
        let radius = self.base.radius();
        ManifoldMap::from_kernel(Arc::new(self), radius, f64::INFINITY)
    }
}

impl MapKernel for Perturbed {
    fn domain_dim(&self) -> usize {
        self.base.domain_dim()
    }
    fn target_dim(&self) -> usize {
        self.base.target_dim()
    }
    fn value_into(&self, x: &[f64], out: &mut [f64]) {
        self.base.value_into(x, out);
        for m in &self.modes {
            let s = (dot(&m.freq, x) + m.phase).sin() * self.amplitude;
            for (o, c) in out.iter_mut().zip(&m.coef) {
                *o += s * c;
            }
        }
        let r = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        for o in out.iter_mut() {
            *o /= r;
        }
    }
    fn singular_points(&self) -> Vec<Vec<f64>> {
        self.base.singular_points()
    }
    fn nearest_singular(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.base.nearest_singular(x)
    }
    fn singular_plane(&self) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        self.base.singular_plane()
    }
    fn id(&self) -> String {
        format!(
            "perturbed({}, {}, {})",
            self.base.id(),
            self.amplitude,
            self.seed
        )
    }
}

// ---------------------------------------------------------------------------
// Constructors

/// Default domain radius of catalog maps.
pub const DEFAULT_RADIUS: f64 = 2.0;

pub fn radial(n: usize) -> Result<ManifoldMap> {
    if n < 3 {
        return Err(Error::InvalidModel(
            "radial map needs n >= 3 for finite energy".into(),
        ));
    }
    let r = DEFAULT_RADIUS;
    let energy = (n - 1) as f64 * unit_sphere_area(n) * r.powi(n as i32 - 2) / (n - 2) as f64;
    Ok(ManifoldMap::from_kernel(Arc::new(Radial { n }), r, energy))
}

pub fn constant(n: usize, w: &[f64]) -> Result<ManifoldMap> {
    if w.len() < 2 || (norm(w) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidModel(
            "constant value must be a unit vector in R^{m+1}, m >= 1".into(),
        ));
    }
    Ok(ManifoldMap::from_kernel(
        Arc::new(Constant { n, w: w.to_vec() }),
        DEFAULT_RADIUS,
        0.0,
    ))
}

pub fn geodesic(a: &[f64]) -> Result<ManifoldMap> {
    if a.len() < 2 {
        return Err(Error::InvalidModel("geodesic map needs n >= 2".into()));
    }
    let r = DEFAULT_RADIUS;
    let energy = dot(a, a) * geom::unit_ball_volume(a.len()) * r.powi(a.len() as i32);
    Ok(ManifoldMap::from_kernel(
        Arc::new(Geodesic { a: a.to_vec() }),
        r,
        energy,
    ))
}

pub fn perturbed(base: ManifoldMap, amplitude: f64, seed: u64) -> ManifoldMap {
    Perturbed::new(base, amplitude, seed).into_map()
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub max_unit_norm_violation: f64,
    pub analytic_gradient: bool,
    pub max_gradient_mismatch: f64,
    pub energy_unit_ball: crate::quadrature::Estimate,
    pub energy_domain: crate::quadrature::Estimate,
    pub energy_bound: f64,
    pub unit_norm_ok: bool,
    pub gradient_ok: bool,
    pub energy_ok: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.unit_norm_ok && self.gradient_ok && self.energy_ok
    }
}

/// Check unit norm, analytic-vs-finite-difference gradients and the energy
/// bound on seeded sample points.
pub fn validate(map: &ManifoldMap, samples: usize, seed: u64) -> Result<ValidationReport> {
    let n = map.domain_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let analytic = map.has_analytic_jacobian();
    let mut unit_violation: f64 = 0.0;
    let mut grad_mismatch: f64 = 0.0;
    let mut taken = 0;
    let mut attempts = 0;
    while taken < samples && attempts < 100 * samples {
        attempts += 1;
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let dir = geom::normalized(&g).unwrap_or_else(|| geom::unit(n, 0));
        let rho = map.radius() * rng.gen::<f64>().powf(1.0 / n as f64) * 0.999;
        let x = geom::scale(&dir, rho);
        if map.singular_distance(&x).map_or(false, |d| d < 0.05) {
            continue;
        }
        taken += 1;
        let v = map.value(&x);
        unit_violation = unit_violation.max((norm(&v) - 1.0).abs());
        if analytic {
            let ja = map.jacobian(&x);
            let jf = map.fd_jacobian(&x);
            let rel = (&ja - &jf).norm() / ja.norm().max(1e-8);
            grad_mismatch = grad_mismatch.max(rel);
        }
    }
    let cfg = crate::config::AnalysisConfig::default();
    let energy = crate::energy::EnergyQuadrature::new(n, &cfg);
    let origin = vec![0.0; n];
    let unit = energy.dirichlet_integral(map, &origin, 1.0_f64.min(map.radius()))?;
    let domain = energy.dirichlet_integral(map, &origin, map.radius())?;
    let bound = map.energy_bound();
    let energy_ok = domain.value <= bound * (1.0 + 1e-6) + 3.0 * domain.error + 1e-9;
    Ok(ValidationReport {
        samples: taken,
        max_unit_norm_violation: unit_violation,
        analytic_gradient: analytic,
        max_gradient_mismatch: grad_mismatch,
        energy_unit_ball: unit,
        energy_domain: domain,
        energy_bound: bound,
        unit_norm_ok: unit_violation <= 1e-10,
        gradient_ok: grad_mismatch <= 1e-5,
        energy_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn evaluate_catalog_examples() {
        let f = radial(3).unwrap();
        assert_eq!(f.evaluate(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let c = constant(3, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(c.evaluate(&[0.3, -0.2, 0.1]).unwrap(), vec![0.0, 0.0, 1.0]);
        let g = geodesic(&[1.0, 0.0, 0.0]).unwrap().with_radius(4.0);
        let v = g.evaluate(&[PI, 0.0, 0.0]).unwrap();
        assert!((v[0] + 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
    }

    #[test]
    fn evaluate_errors() {
        let f = radial(3).unwrap();
        assert!(matches!(
            f.evaluate(&[2.5, 0.0, 0.0]),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            f.evaluate(&[0.0, 0.0, 0.0]),
            Err(Error::SingularPoint)
        ));
    }

    #[test]
    fn rescale_examples() {
        let f = radial(3).unwrap();
        let g = f.rescale(&[0.0; 3], 0.5).unwrap();
        for x in [[0.3, 0.1, -0.2], [-0.9, 0.2, 0.4]] {
            let a = f.value(&x);
            let b = g.value(&x);
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-15);
            }
        }
        let geo = geodesic(&[1.0, 0.5, 0.0]).unwrap().with_radius(4.0);
        let scaled = geo.rescale(&[0.0; 3], 2.0).unwrap();
        let twice = geodesic(&[2.0, 1.0, 0.0]).unwrap();
        let x = [0.2, -0.3, 0.7];
        let (a, b) = (scaled.value(&x), twice.value(&x));
        assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);

        let h = f.rescale(&[0.5, 0.0, 0.0], 0.1).unwrap();
        let v0 = h.evaluate(&[0.0; 3]).unwrap();
        assert!((v0[0] - 1.0).abs() < 1e-15);
        let gn = h.gradient_norm_sq(&[0.0; 3]).sqrt();
        assert!((gn - 0.1 * 2f64.sqrt() / 0.5).abs() < 1e-14);
        assert!((h.jacobian(&[0.0; 3]).norm() - 0.2 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rescale_out_of_domain() {
        let f = radial(3).unwrap();
        assert!(f.rescale(&[1.0, 0.0, 0.0], 1.0).is_err());
        assert!(f.rescale(&[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn rescale_composes() {
        let f = radial(3).unwrap();
        let y = [0.3, -0.2, 0.1];
        let a = f.rescale(&y, 0.4).unwrap().rescale(&[0.0; 3], 0.5).unwrap();
        let b = f.rescale(&y, 0.2).unwrap();
        for x in [[0.1, 0.2, 0.3], [-0.5, 0.5, 0.1]] {
            let (va, vb) = (a.value(&x), b.value(&x));
            for i in 0..3 {
                assert!((va[i] - vb[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn homogeneous_examples() {
        let n3 = [0.0; 3];
        let c = make_homogeneous(
            &n3,
            &[geom::unit(3, 0), geom::unit(3, 1), geom::unit(3, 2)],
            Link::Constant(vec![0.0, 1.0]),
        )
        .unwrap()
        .into_map(2.0);
        assert_eq!(c.value(&[0.4, 0.1, -0.3]), vec![0.0, 1.0]);

        let r = make_homogeneous(&n3, &[], Link::Identity).unwrap().into_map(2.0);
        let x = [0.3, -0.4, 0.5];
        let (a, b) = (r.value(&x), radial(3).unwrap().value(&x));
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-15);
        }
        assert!((r.energy_bound() - 16.0 * PI).abs() < 1e-10);

        let cyl = make_homogeneous(&n3, &[geom::unit(3, 0)], Link::Identity)
            .unwrap()
            .into_map(2.0);
        let v = cyl.value(&[0.7, 0.3, 0.4]);
        assert_eq!(v.len(), 2);
        assert!((v[0].abs() - 0.6).abs() < 1e-15 && (v[1].abs() - 0.8).abs() < 1e-15);
        let w = cyl.value(&[-0.2, 0.3, 0.4]);
        assert_eq!(v, w);
    }

    #[test]
    fn homogeneous_errors() {
        let err = make_homogeneous(
            &[0.0; 3],
            &[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]],
            Link::Identity,
        );
        assert!(matches!(err, Err(Error::DegenerateFrame { .. })));
        let err = make_homogeneous(&[0.0; 3], &[geom::unit(3, 0), geom::unit(3, 1)], Link::Identity);
        assert!(matches!(err, Err(Error::InvalidLink(_))));
    }

    #[test]
    fn hessian_closed_forms_match_finite_differences() {
        let f = radial(3).unwrap();
        let x = [0.3, -0.5, 0.4];
        let (a, b) = (f.hessian_norm(&x), f.fd_hessian_norm(&x));
        assert!((a - b).abs() / a < 1e-5, "{a} vs {b}");
        let f4 = radial(4).unwrap();
        let x = [0.3, -0.5, 0.4, 0.2];
        let (a, b) = (f4.hessian_norm(&x), f4.fd_hessian_norm(&x));
        assert!((a - b).abs() / a < 1e-5, "{a} vs {b}");
        let cyl = make_homogeneous(&[0.0; 4], &[geom::unit(4, 0)], Link::Identity)
            .unwrap()
            .into_map(2.0);
        let (a, b) = (cyl.hessian_norm(&x), cyl.fd_hessian_norm(&x));
        assert!((a - b).abs() / a < 1e-5, "{a} vs {b}");
        let g = geodesic(&[2.0, 0.0, 0.0]).unwrap();
        let x = [0.1, 0.2, 0.3];
        assert!((g.hessian_norm(&x) - g.fd_hessian_norm(&x)).abs() < 1e-4);
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let maps = [
            radial(3).unwrap(),
            geodesic(&[1.0, -0.5, 0.25]).unwrap(),
            make_homogeneous(&[0.1, 0.0, 0.0, 0.0], &[vec![1.0, 1.0, 0.0, 0.0]], Link::Identity)
                .unwrap()
                .into_map(2.0),
        ];
        for f in &maps {
            let x: Vec<f64> = (0..f.domain_dim()).map(|i| 0.3 - 0.2 * i as f64).collect();
            let (a, b) = (f.jacobian(&x), f.fd_jacobian(&x));
            assert!((&a - &b).norm() / a.norm() < 1e-6, "{}", f.id());
            assert!((a.norm_squared() - f.gradient_norm_sq(&x)).abs() < 1e-10);
        }
    }

    #[test]
    fn perturbed_map_stays_on_sphere() {
        let f = perturbed(radial(3).unwrap(), 0.1, 7);
        let v = f.value(&[0.2, 0.3, -0.1]);
        assert!((norm(&v) - 1.0).abs() < 1e-14);
        assert!(!f.has_analytic_jacobian());
        assert_eq!(f.singular_points(), vec![vec![0.0; 3]]);
    }
}
