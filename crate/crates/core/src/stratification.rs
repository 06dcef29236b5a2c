//! Effective strata on sample grids, scale tuples, the bad-scale pigeonhole,
//! greedy covers and tube-volume exponents.

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::energy::EnergyQuadrature;
use crate::error::{Error, Result};
use crate::geom::{self, derive_seed, dist_sq, norm, unit_ball_volume};
use crate::homogeneity::Homogeneity;
use crate::models::ManifoldMap;

// ---------------------------------------------------------------------------
// Grids

/// Lexicographic order on coordinates.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Sort lexicographically and drop exact duplicates.
pub fn sort_points(points: &mut Vec<Vec<f64>>) {
    points.sort_by(|a, b| lex_cmp(a, b));
    points.dedup();
}

/// Points of `spacing·Z^n` in the closed ball `B_radius(0)`.
pub fn lattice_ball(n: usize, spacing: f64, radius: f64) -> Vec<Vec<f64>> {
    let m = (radius / spacing).floor() as i64;
    let mut out = Vec::new();
    let mut idx = vec![-m; n];
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| i as f64 * spacing).collect();
        if norm(&p) <= radius * (1.0 + 1e-12) {
            out.push(p);
        }
        let mut c = 0;
        loop {
            if c == n {
                sort_points(&mut out);
                return out;
            }
            idx[c] += 1;
            if idx[c] > m {
                idx[c] = -m;
                c += 1;
            } else {
                break;
            }
        }
    }
}

/// Union over `ℓ = 0..=levels` of lattices with spacing `2^{-ℓ}/divisions`
/// inside `B_{2^{-ℓ}}(0)`: dense near the origin, coarse elsewhere.
pub fn graded_grid(n: usize, levels: usize, divisions: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for l in 0..=levels {
        let r = 0.5f64.powi(l as i32);
        out.extend(lattice_ball(n, r / divisions as f64, r));
    }
    sort_points(&mut out);
    out
}

/// `count` equispaced points from `a` to `b` inclusive.
pub fn segment_points(a: &[f64], b: &[f64], count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let s = if count > 1 {
                i as f64 / (count - 1) as f64
            } else {
                0.0
            };
            a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Strata

/// Stratum membership on a grid, for several k at once.
///
/// `exit[p][i]` is the first ladder index `j` at which the point admits an
/// `(η, γ^j, ks[i]+1)`-homogeneous approximation; the point lies in
/// `S^k_{η,γ^j}` iff `j < exit` (or the exit is `None`).
#[derive(Debug, Clone, Serialize)]
pub struct StratumGrid {
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    pub ks: Vec<usize>,
    pub eta: f64,
    pub gamma: f64,
    pub j_max: usize,
    pub exit: Vec<Vec<Option<usize>>>,
    /// Ladder indices skipped because the ball left the domain.
    pub skipped: Vec<Vec<usize>>,
    pub tuples: Option<Vec<ScaleTuple>>,
}

impl StratumGrid {
    fn k_index(&self, k: usize) -> Option<usize> {
        self.ks.iter().position(|&x| x == k)
    }

    pub fn is_member(&self, point: usize, k: usize, j: usize) -> bool {
        let i = self.k_index(k).expect("k not computed");
        self.exit[point][i].map_or(true, |e| j < e)
    }

    /// Indices of grid points in `S^k_{η,γ^j}`.
    pub fn stratum(&self, k: usize, j: usize) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&p| self.is_member(p, k, j))
            .collect()
    }

    pub fn stratum_points(&self, k: usize, j: usize) -> Vec<Vec<f64>> {
        self.stratum(k, j)
            .into_iter()
            .map(|p| self.points[p].clone())
            .collect()
    }

    /// Number of `(point, k ≤ k', j ≥ j')` triples violating
    /// `S^k_{γ^j} ⊆ S^{k'}_{γ^{j'}}`.
    pub fn containment_violations(&self) -> usize {
        let mut bad = 0;
        for p in 0..self.points.len() {
            for (a, &k) in self.ks.iter().enumerate() {
                for (b, &k2) in self.ks.iter().enumerate() {
                    if k > k2 {
                        continue;
                    }
                    for j in 0..=self.j_max {
                        for j2 in 0..=j {
                            let inner = self.exit[p][a].map_or(true, |e| j < e);
                            let outer = self.exit[p][b].map_or(true, |e| j2 < e);
                            if inner && !outer {
                                bad += 1;
                            }
                        }
                    }
                }
            }
        }
        bad
    }

    /// CSV rows `point, k, j, member`.
    pub fn write_membership_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(["point", "k", "j", "member"])?;
        for (p, x) in self.points.iter().enumerate() {
            let c = coord_string(x);
            for &k in &self.ks {
                for j in 0..=self.j_max {
                    w.write_record([
                        c.clone(),
                        k.to_string(),
                        j.to_string(),
                        (self.is_member(p, k, j) as u8).to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn coord_string(x: &[f64]) -> String {
    x.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Stratum membership for every `k` in `ks`.
///
/// At each ladder scale the defects are computed top-down as
/// `D^eff_i = min_{i' ≥ i} D_{i'}`. Since an `i'`-homogeneous map is also
/// `i`-homogeneous for `i ≤ i'`, this keeps the computed strata nested in k.
pub fn effective_strata(
    engine: &Homogeneity,
    map: &ManifoldMap,
    grid: &[Vec<f64>],
    ks: &[usize],
    eta: f64,
    gamma: f64,
    j_max: usize,
) -> Result<StratumGrid> {
    let n = engine.dim();
    if ks.iter().any(|&k| k >= n) {
        return Err(Error::InvalidModel(format!("strata need k < n = {n}")));
    }
    let rows: Vec<(Vec<Option<usize>>, Vec<usize>)> = grid
        .par_iter()
        .map(|y| point_exits(engine, map, y, ks, eta, gamma, j_max))
        .collect::<Result<_>>()?;
    let (exit, skipped) = rows.into_iter().unzip();
    Ok(StratumGrid {
        n,
        points: grid.to_vec(),
        ks: ks.to_vec(),
        eta,
        gamma,
        j_max,
        exit,
        skipped,
        tuples: None,
    })
}

/// Single-k convenience wrapper.
pub fn effective_stratum(
    engine: &Homogeneity,
    map: &ManifoldMap,
    grid: &[Vec<f64>],
    k: usize,
    eta: f64,
    gamma: f64,
    j_max: usize,
) -> Result<StratumGrid> {
    effective_strata(engine, map, grid, &[k], eta, gamma, j_max)
}

fn point_exits(
    engine: &Homogeneity,
    map: &ManifoldMap,
    y: &[f64],
    ks: &[usize],
    eta: f64,
    gamma: f64,
    j_max: usize,
) -> Result<(Vec<Option<usize>>, Vec<usize>)> {
    let n = engine.dim();
    let mut exit: Vec<Option<usize>> = vec![None; ks.len()];
    let mut skipped = Vec::new();
    for j in 0..=j_max {
        let s = gamma.powi(j as i32);
        if norm(y) + s > map.radius() * (1.0 + 1e-12) {
            skipped.push(j);
            continue;
        }
        let alive: Vec<usize> = (0..ks.len()).filter(|&i| exit[i].is_none()).collect();
        let Some(lowest) = alive.iter().map(|&i| ks[i] + 1).min() else {
            break;
        };
        let mut deff = f64::INFINITY;
        for level in (lowest..=n).rev() {
            let d = engine.search(map, y, s, level, &[], Some(eta))?.defect;
            deff = deff.min(d);
            if deff <= eta {
                for &i in &alive {
                    if ks[i] + 1 <= level {
                        exit[i] = Some(j);
                    }
                }
                break;
            }
        }
    }
    Ok((exit, skipped))
}

// ---------------------------------------------------------------------------
// Scale tuples

/// `T^j(x)`: entry `i` (for `i = 1..=j`) is set when `x` is in the high
/// nonhomogeneity set at scale `γ^i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleTuple {
    pub bits: Vec<bool>,
    /// Entries recorded as 0 because `B_{tγ^i}(x)` left the domain.
    pub out_of_domain: Vec<bool>,
}

impl ScaleTuple {
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// The first `j` entries as a 0/1 string.
    pub fn prefix(&self, j: usize) -> String {
        self.bits[..j]
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect()
    }
}

pub fn scale_tuple(
    engine: &Homogeneity,
    map: &ManifoldMap,
    x: &[f64],
    gamma: f64,
    j: usize,
    eps: f64,
    t: f64,
) -> Result<ScaleTuple> {
    let mut bits = Vec::with_capacity(j);
    let mut ood = Vec::with_capacity(j);
    for i in 1..=j {
        let r = gamma.powi(i as i32);
        if norm(x) + t * r > map.radius() * (1.0 + 1e-12) {
            bits.push(false);
            ood.push(true);
            continue;
        }
        bits.push(engine.nonhomogeneity(map, x, r, t)? >= eps);
        ood.push(false);
    }
    Ok(ScaleTuple {
        bits,
        out_of_domain: ood,
    })
}

/// Attach tuples `T^{j_max}` for every grid point.
pub fn label_tuples(
    engine: &Homogeneity,
    map: &ManifoldMap,
    strata: &mut StratumGrid,
    eps: f64,
    t: f64,
) -> Result<()> {
    let (gamma, j) = (strata.gamma, strata.j_max);
    let tuples = strata
        .points
        .par_iter()
        .map(|x| scale_tuple(engine, map, x, gamma, j, eps, t))
        .collect::<Result<Vec<_>>>()?;
    strata.tuples = Some(tuples);
    Ok(())
}

// ---------------------------------------------------------------------------
// Quantitative differentiation

/// `K = ceil((n+1) Λ / δ)`.
pub fn bad_scale_bound(lambda: f64, delta: f64, n: usize) -> u64 {
    let k = ((n + 1) as f64 * lambda / delta).ceil();
    if k.is_finite() {
        k.max(0.0) as u64
    } else {
        u64::MAX
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BadScales {
    pub count: usize,
    /// `(i, W_{γ^i, γ^{i-n}})` for every examined scale.
    pub drops: Vec<(usize, f64)>,
}

/// Count `i ≤ j_max` with `W_{γ^i, γ^{i−n}}(x) > δ`.
pub fn count_bad_scales(
    energy: &EnergyQuadrature,
    map: &ManifoldMap,
    x: &[f64],
    gamma: f64,
    j_max: usize,
    delta: f64,
) -> Result<BadScales> {
    let n = energy.dim();
    let room = map.radius() - norm(x);
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    let mut theta = |i: usize| -> Result<f64> {
        if let Some(v) = cache.get(&i) {
            return Ok(*v);
        }
        let v = energy.theta(map, x, gamma.powi(i as i32))?.value;
        cache.insert(i, v);
        Ok(v)
    };
    let mut drops = Vec::new();
    for i in n..=j_max {
        if gamma.powi((i - n) as i32) > room * (1.0 + 1e-12) {
            continue;
        }
        let w = theta(i - n)? - theta(i)?;
        drops.push((i, w));
    }
    Ok(BadScales {
        count: drops.iter().filter(|(_, w)| *w > delta).count(),
        drops,
    })
}

/// `Σ_{i ≤ K} C(j, i)`, saturating.
pub fn tuple_class_bound(j: usize, k: u64) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for i in 0..=j.min(k.min(j as u64) as usize) {
        if i > 0 {
            c = c * (j - i + 1) as u128 / i as u128;
        }
        total = total.saturating_add(c);
    }
    total
}

// ---------------------------------------------------------------------------
// Covers

/// Greedy cover by closed balls: the lexicographically smallest uncovered
/// point becomes the next center.
pub fn greedy_cover(points: &[Vec<f64>], radius: f64) -> Vec<Vec<f64>> {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| lex_cmp(a, b));
    let r2 = radius * radius;
    let mut covered = vec![false; sorted.len()];
    let mut centers = Vec::new();
    for i in 0..sorted.len() {
        if covered[i] {
            continue;
        }
        let c = sorted[i];
        for (j, p) in sorted.iter().enumerate().skip(i) {
            if !covered[j] && dist_sq(p, c) <= r2 {
                covered[j] = true;
            }
        }
        centers.push(c.clone());
    }
    centers
}

#[derive(Debug, Clone, Serialize)]
pub struct TupleClass {
    pub tuple: String,
    pub centers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleCover {
    pub j: usize,
    pub radius: f64,
    pub classes: Vec<TupleClass>,
    pub ball_count: usize,
    pub class_count: usize,
    /// Stratum points not inside any parent ball of their class.
    pub orphans: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverResult {
    pub k: usize,
    pub scales: Vec<ScaleCover>,
}

impl CoverResult {
    pub fn ball_counts(&self) -> Vec<usize> {
        self.scales.iter().map(|s| s.ball_count).collect()
    }

    /// CSV rows `j, radius, classes, balls`.
    pub fn write_counts_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(["j", "radius", "classes", "balls"])?;
        for s in &self.scales {
            w.write_record([
                s.j.to_string(),
                s.radius.to_string(),
                s.class_count.to_string(),
                s.ball_count.to_string(),
            ])?;
        }
        Ok(())
    }
}

/// The inductive covering: start from `B_1(0)`; at depth `j`, split the
/// stratum `S^k_{η,γ^j}` by tuple prefix `T^j` and greedily cover, inside
/// every ball of the parent class, the not yet covered points.
pub fn decompose(strata: &StratumGrid, k: usize, j: usize) -> Result<CoverResult> {
    let tuples = strata
        .tuples
        .as_ref()
        .ok_or_else(|| Error::Config("decompose needs scale tuples".into()))?;
    if j > strata.j_max {
        return Err(Error::Config(format!("depth {j} exceeds j_max {}", strata.j_max)));
    }
    let gamma = strata.gamma;
    let mut parents: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    parents.insert(String::new(), vec![vec![0.0; strata.n]]);
    let mut scales = Vec::new();
    for depth in 1..=j {
        let radius = gamma.powi(depth as i32);
        let parent_radius = radius / gamma;
        let mut classes: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
        for p in strata.stratum(k, depth) {
            classes
                .entry(tuples[p].prefix(depth))
                .or_default()
                .push(strata.points[p].clone());
        }
        let mut next = BTreeMap::new();
        let mut out_classes = Vec::new();
        let mut orphans = 0;
        for (key, mut pts) in classes {
            pts.sort_by(|a, b| lex_cmp(a, b));
            let parent_key = &key[..depth - 1];
            let balls = parents.get(parent_key).cloned().unwrap_or_default();
            let mut covered = vec![false; pts.len()];
            let mut centers = Vec::new();
            for c in &balls {
                let local: Vec<Vec<f64>> = pts
                    .iter()
                    .zip(&covered)
                    .filter(|(p, done)| {
                        !**done && dist_sq(p, c) <= parent_radius * parent_radius * (1.0 + 1e-12)
                    })
                    .map(|(p, _)| p.clone())
                    .collect();
                for center in greedy_cover(&local, radius) {
                    for (p, done) in pts.iter().zip(covered.iter_mut()) {
                        if dist_sq(p, &center) <= radius * radius {
                            *done = true;
                        }
                    }
                    centers.push(center);
                }
            }
            let left: Vec<Vec<f64>> = pts
                .iter()
                .zip(&covered)
                .filter(|(_, d)| !**d)
                .map(|(p, _)| p.clone())
                .collect();
            orphans += left.len();
            centers.extend(greedy_cover(&left, radius));
            next.insert(key.clone(), centers.clone());
            out_classes.push(TupleClass { tuple: key, centers });
        }
        let ball_count = out_classes.iter().map(|c| c.centers.len()).sum();
        scales.push(ScaleCover {
            j: depth,
            radius,
            class_count: out_classes.len(),
            ball_count,
            classes: out_classes,
            orphans,
        });
        parents = next;
    }
    Ok(CoverResult { k, scales })
}

// ---------------------------------------------------------------------------
// Tube volumes

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TubeEstimate {
    pub r: f64,
    pub volume: f64,
    pub error: f64,
    pub samples: usize,
}

pub(crate) struct PointIndex<'a> {
    points: &'a [Vec<f64>],
    tree: KdTree<f64, usize, &'a [f64]>,
}

impl<'a> PointIndex<'a> {
    pub(crate) fn new(n: usize, points: &'a [Vec<f64>]) -> Self {
        let mut tree = KdTree::with_capacity(n, points.len().max(1));
        for (i, p) in points.iter().enumerate() {
            tree.add(p.as_slice(), i).expect("finite coordinates");
        }
        PointIndex { points, tree }
    }

    pub(crate) fn count_within(&self, y: &[f64], r: f64) -> usize {
        self.tree
            .within(y, r * r, &squared_euclidean)
            .map(|v| v.len())
            .unwrap_or(0)
    }

    fn nearest_sq(&self, y: &[f64]) -> f64 {
        self.tree
            .nearest(y, 1, &squared_euclidean)
            .ok()
            .and_then(|v| v.first().map(|x| x.0))
            .unwrap_or(f64::INFINITY)
    }
}

pub(crate) fn uniform_in_ball(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let dir = geom::normalized(&g).unwrap_or_else(|| geom::unit(n, 0));
    geom::scale(&dir, rng.gen::<f64>().powf(1.0 / n as f64))
}

/// `Vol({y ∈ B_1 : s < d(y, S) ≤ r})` (with `s = None` meaning no lower
/// bound), estimated by sampling the union of balls when it is small and
/// `B_1` otherwise.
fn shell_volume(
    index: &PointIndex,
    n: usize,
    r: f64,
    s: Option<f64>,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let m = index.points.len();
    if m == 0 || samples == 0 {
        return (0.0, 0.0);
    }
    let ball = unit_ball_volume(n);
    let union_bound = m as f64 * ball * r.powi(n as i32);
    let outside = |y: &[f64]| s.map_or(true, |s| index.nearest_sq(y) > s * s);
    let (mut sum, mut sum2) = (0.0, 0.0);
    if union_bound < ball {
        // Karp-Luby: pick a ball uniformly, a point in it, weight by coverage
        for _ in 0..samples {
            let i = rng.gen_range(0..m);
            let u = uniform_in_ball(rng, n);
            let y: Vec<f64> = index.points[i].iter().zip(&u).map(|(c, v)| c + r * v).collect();
            let x = if norm(&y) <= 1.0 && outside(&y) {
                union_bound / index.count_within(&y, r).max(1) as f64
            } else {
                0.0
            };
            sum += x;
            sum2 += x * x;
        }
    } else {
        for _ in 0..samples {
            let y = uniform_in_ball(rng, n);
            let x = if index.nearest_sq(&y) <= r * r && outside(&y) {
                ball
            } else {
                0.0
            };
            sum += x;
            sum2 += x * x;
        }
    }
    let k = samples as f64;
    let mean = sum / k;
    let var = (sum2 / k - mean * mean).max(0.0);
    (mean, (var / k).sqrt())
}

/// `Vol(T_r(S) ∩ B_1(0))` in `R^n`.
pub fn tube_volume(set: &[Vec<f64>], n: usize, r: f64, samples: usize, seed: u64) -> TubeEstimate {
    tube_volume_ladder(set, n, &[r], samples, seed)[0]
}

/// Tube volumes on a ladder of radii from shared samples. Each radius adds a
/// nonnegative shell estimate to the previous one, so the estimates are
/// nondecreasing in `r`.
pub fn tube_volume_ladder(
    set: &[Vec<f64>],
    n: usize,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Vec<TubeEstimate> {
    let index = PointIndex::new(n, set);
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let cap = unit_ball_volume(n);
    let mut out = vec![
        TubeEstimate {
            r: 0.0,
            volume: 0.0,
            error: 0.0,
            samples
        };
        radii.len()
    ];
    let (mut acc, mut var) = (0.0, 0.0);
    let mut prev: Option<f64> = None;
    for (step, &i) in order.iter().enumerate() {
        let r = radii[i];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[step as f64], r));
        let (v, e) = shell_volume(&index, n, r, prev, samples, &mut rng);
        acc += v;
        var += e * e;
        prev = Some(r);
        out[i] = TubeEstimate {
            r,
            volume: acc.min(cap),
            error: var.sqrt(),
            samples,
        };
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct MinkowskiFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

/// Least-squares slope of `log Vol(T_r)` against `log r`.
pub fn minkowski_fit(estimates: &[TubeEstimate]) -> Result<MinkowskiFit> {
    let used: Vec<&TubeEstimate> = estimates
        .iter()
        .filter(|e| e.volume > 0.0 && e.r > 0.0)
        .collect();
    if used.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: used.len(),
        });
    }
    let xs: Vec<f64> = used.iter().map(|e| e.r.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|e| e.volume.ln()).collect();
    let (slope, intercept, residual) = geom::linear_fit(&xs, &ys);
    Ok(MinkowskiFit {
        slope,
        intercept,
        residual,
        points: used.len(),
    })
}

/// Growth exponent of ball counts: slope of `log N_j` against `log(1/γ^j)`.
pub fn count_growth_exponent(counts: &[(usize, usize)], gamma: f64) -> Result<f64> {
    let used: Vec<&(usize, usize)> = counts.iter().filter(|(_, c)| *c > 0).collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: used.len(),
        });
    }
    let xs: Vec<f64> = used.iter().map(|(j, _)| -(*j as f64) * gamma.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, c)| (*c as f64).ln()).collect();
    Ok(geom::linear_fit(&xs, &ys).0)
}
