//! Small dense-vector helpers shared by the numerical modules.

use std::f64::consts::PI;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Returns `a / |a|`, or `None` for the zero vector.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Area of the unit sphere S^{n-1} in R^n.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Gram determinant of a list of vectors.
pub fn gram_determinant(vectors: &[Vec<f64>]) -> f64 {
    let k = vectors.len();
    if k == 0 {
        return 1.0;
    }
    let g = nalgebra::DMatrix::from_fn(k, k, |i, j| dot(&vectors[i], &vectors[j]));
    g.determinant()
}

/// Modified Gram-Schmidt. Vectors whose residual falls below `tol` are dropped.
pub fn gram_schmidt(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let nw = norm(&w);
        if nw > tol {
            basis.push(scale(&w, 1.0 / nw));
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of an orthonormal frame in R^n.
pub fn complement(frame: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = frame.to_vec();
    all.extend((0..n).map(|i| unit(n, i)));
    let full = gram_schmidt(&all, 1e-10);
    full[frame.len()..].to_vec()
}

/// Least-squares line fit `y = slope * x + intercept`, returning
/// (slope, intercept, rms residual).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Deterministic 64-bit mixing (splitmix64 finalizer).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed derived from a base seed, a point and a scale; used to give every
/// Monte-Carlo estimate its own reproducible stream.
pub fn derive_seed(seed: u64, point: &[f64], scale: f64) -> u64 {
    let mut h = mix64(seed);
    for x in point {
        h = mix64(h ^ x.to_bits());
    }
    mix64(h ^ scale.to_bits())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(7) - 16.0 * PI.powi(3) / 105.0).abs() < 1e-13);
        assert!((unit_sphere_area(8) - PI.powi(4) / 3.0).abs() < 1e-12);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn complement_is_orthonormal() {
        let frame = gram_schmidt(&[vec![1.0, 1.0, 0.0, 0.0]], 1e-12);
        let c = complement(&frame, 4);
        assert_eq!(c.len(), 3);
        for v in &c {
            assert!(dot(v, &frame[0]).abs() < 1e-14);
            assert!((norm(v) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (s, i, r) = linear_fit(&xs, &ys);
        assert!((s - 2.5).abs() < 1e-12 && (i + 1.0).abs() < 1e-12 && r < 1e-12);
    }
}
