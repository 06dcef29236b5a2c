//! Scenario files: one model, the analysis constants and a list of tasks,
//! run in order into an output directory.
//!
//! ```toml
//! model = "radial(3,2)"
//! output = "out/radial"
//! preset = "scan"          # or "default"
//!
//! [analysis]
//! seed = 7
//! j_max = 6
//!
//! [[tasks]]
//! kind = "lp-sweep"
//! k = 1
//! ```
//!
//! Every field of [`AnalysisConfig`] may appear under `[analysis]`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::catalog::{parse_model, Model};
use crate::config::AnalysisConfig;
use crate::currents::HypersurfaceModel;
use crate::energy::EnergyQuadrature;
use crate::error::{Error, Result};
use crate::geom::{self, norm, unit_ball_volume};
use crate::homogeneity::Homogeneity;
use crate::models::ManifoldMap;
use crate::regularity::{write_lp_csv, LpIntegrand, LpResult, Regularity, Verdict};
use crate::report::{sha256_hex, OutputDir};
use crate::stratification::{
    self, count_growth_exponent, decompose, effective_strata, effective_stratum, graded_grid,
    label_tuples, lattice_ball, minkowski_fit, segment_points, tube_volume, tube_volume_ladder,
    TubeEstimate,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[default]
    Default,
    Scan,
}

/// Sample points in the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    Lattice { spacing: f64, radius: f64 },
    /// Nested lattices refining toward the origin.
    Graded { levels: usize, divisions: usize },
    Segment { a: Vec<f64>, b: Vec<f64>, count: usize },
    Points { points: Vec<Vec<f64>> },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Lattice {
            spacing: 0.25,
            radius: 1.0,
        }
    }
}

impl GridSpec {
    pub fn points(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        let pts = match self {
            GridSpec::Lattice { spacing, radius } => {
                if !(*spacing > 0.0) {
                    return Err(Error::Config(format!("grid spacing {spacing}")));
                }
                lattice_ball(n, *spacing, *radius)
            }
            GridSpec::Graded { levels, divisions } => graded_grid(n, *levels, (*divisions).max(1)),
            GridSpec::Segment { a, b, count } => segment_points(a, b, *count),
            GridSpec::Points { points } => points.clone(),
        };
        if let Some(p) = pts.iter().find(|p| p.len() != n) {
            return Err(Error::Config(format!(
                "grid point {p:?} does not have dimension {n}"
            )));
        }
        Ok(pts)
    }
}

/// The set whose tubular neighborhoods are measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TubeSet {
    /// The model's declared singular points.
    Singular,
    Points { points: Vec<Vec<f64>> },
    Segment { a: Vec<f64>, b: Vec<f64>, count: usize },
    /// `{r_f ≤ r}` on the grid, recomputed for every radius.
    BadSet {
        #[serde(default)]
        grid: GridSpec,
    },
    /// `S^k_{η,γ^{j_max}}` on the grid.
    Stratum {
        #[serde(default)]
        grid: GridSpec,
        k: usize,
    },
}

fn default_ps() -> Vec<f64> {
    vec![2.0, 4.0, 6.5, 7.0]
}

fn default_points() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    /// θ on a γ-ladder at each center, with the drop/defect identity on
    /// consecutive radii.
    EnergyProfile {
        #[serde(default)]
        centers: Vec<Vec<f64>>,
        /// Extra centers drawn uniformly from `B_{R/2}`.
        #[serde(default)]
        random_centers: usize,
        r0: Option<f64>,
        j_max: Option<usize>,
    },
    Strata {
        #[serde(default)]
        grid: GridSpec,
        ks: Option<Vec<usize>>,
    },
    Decompose {
        #[serde(default)]
        grid: GridSpec,
        k: usize,
        depth: Option<usize>,
        exponent_range: Option<[f64; 2]>,
        max_count: Option<usize>,
    },
    TubeFit {
        set: TubeSet,
        radii: Option<Vec<f64>>,
        slope_range: Option<[f64; 2]>,
    },
    LpSweep {
        k: usize,
        #[serde(default)]
        integrand: LpIntegrand,
        /// Verdict letters such as `"CCDD"`; radial maps default to that.
        expect: Option<String>,
    },
    ConeSplit {
        y: Vec<f64>,
        z: Vec<f64>,
        plane: Vec<Vec<f64>>,
        r: f64,
        max_defect: Option<f64>,
    },
    CurrentSuite {
        center: Option<Vec<f64>>,
        #[serde(default = "default_ps")]
        ps: Vec<f64>,
        #[serde(default = "default_points")]
        points: usize,
        r0: Option<f64>,
        ladder: Option<usize>,
    },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::EnergyProfile { .. } => "energy-profile",
            Task::Strata { .. } => "strata",
            Task::Decompose { .. } => "decompose",
            Task::TubeFit { .. } => "tube-fit",
            Task::LpSweep { .. } => "lp-sweep",
            Task::ConeSplit { .. } => "cone-split",
            Task::CurrentSuite { .. } => "current-suite",
        }
    }

    fn needs_surface(&self) -> Option<bool> {
        match self {
            Task::CurrentSuite { .. } => Some(true),
            Task::TubeFit { set, .. } => match set {
                TubeSet::BadSet { .. } | TubeSet::Stratum { .. } => Some(false),
                _ => None,
            },
            _ => Some(false),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    model: String,
    domain_radius: Option<f64>,
    output: Option<PathBuf>,
    #[serde(default)]
    preset: Preset,
    #[serde(default)]
    analysis: toml::Table,
    #[serde(default)]
    tasks: Vec<Task>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: String,
    pub domain_radius: Option<f64>,
    pub output: Option<PathBuf>,
    pub preset: Preset,
    pub analysis: AnalysisConfig,
    pub tasks: Vec<Task>,
    source: String,
    overrides: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum TaskStatus {
    Passed,
    Failed(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskOutcome {
    pub index: usize,
    pub kind: String,
    pub status: TaskStatus,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcomes: Vec<TaskOutcome>,
    pub output: PathBuf,
    pub manifest: PathBuf,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.status == TaskStatus::Passed)
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text)?;
        let base = match raw.preset {
            Preset::Default => AnalysisConfig::default(),
            Preset::Scan => AnalysisConfig::scan(),
        };
        let mut table = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        table.extend(raw.analysis);
        let analysis: AnalysisConfig = table.try_into()?;
        analysis.validate()?;
        Ok(Scenario {
            model: raw.model,
            domain_radius: raw.domain_radius,
            output: raw.output,
            preset: raw.preset,
            analysis,
            tasks: raw.tasks,
            source: text.to_string(),
            overrides: Vec::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.source.as_bytes())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.analysis.seed = seed;
        self.overrides.push(("seed".into(), seed.to_string()));
    }

    pub fn set_tolerance(&mut self, tolerance: f64) -> Result<()> {
        self.analysis.tolerance = tolerance;
        self.analysis.validate()?;
        self.overrides.push(("tolerance".into(), tolerance.to_string()));
        Ok(())
    }

    /// Parse the model and check that every task applies to it.
    pub fn check(&self) -> Result<Model> {
        let model = parse_model(&self.model, self.domain_radius)?;
        for (i, t) in self.tasks.iter().enumerate() {
            let surface = matches!(model, Model::Surface(_));
            if let Some(want) = t.needs_surface() {
                if want != surface {
                    return Err(Error::Config(format!(
                        "task {} ({}) needs a {}, but `{}` is a {}",
                        i + 1,
                        t.kind(),
                        if want { "hypersurface" } else { "map" },
                        self.model,
                        if surface { "hypersurface" } else { "map" },
                    )));
                }
            }
        }
        Ok(model)
    }

    /// Run every task into `out`. Task failures are recorded, not
    /// returned; the manifest is written in every case.
    pub fn run(&self, out: &Path) -> Result<RunReport> {
        let model = self.check()?;
        let mut dir = OutputDir::create(out)?;
        let mut outcomes = Vec::new();
        for (i, task) in self.tasks.iter().enumerate() {
            let prefix = format!("{:02}-{}", i + 1, task.kind());
            let status = match self.run_task(&model, task, &prefix, &mut dir) {
                Ok(failures) if failures.is_empty() => TaskStatus::Passed,
                Ok(failures) => TaskStatus::Failed(failures.join("; ")),
                Err(e) => TaskStatus::Failed(format!("error: {e}")),
            };
            outcomes.push(TaskOutcome {
                index: i + 1,
                kind: task.kind().to_string(),
                status,
            });
        }
        let mut header = vec![
            ("strat-lab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("config-sha256".to_string(), self.config_hash()),
            ("model".to_string(), model.id()),
            ("seed".to_string(), self.analysis.seed.to_string()),
        ];
        for (k, v) in &self.overrides {
            header.push((format!("override-{k}"), v.clone()));
        }
        let lines: Vec<String> = outcomes
            .iter()
            .map(|o| match &o.status {
                TaskStatus::Passed => format!("task {} {} passed", o.index, o.kind),
                TaskStatus::Failed(r) => format!("task {} {} FAILED {}", o.index, o.kind, r),
            })
            .collect();
        let manifest = dir.manifest(&header, &lines)?;
        Ok(RunReport {
            outcomes,
            output: out.to_path_buf(),
            manifest,
        })
    }

    /// Returns the failed assertions.
    fn run_task(&self, model: &Model, task: &Task, prefix: &str, dir: &mut OutputDir) -> Result<Vec<String>> {
        let cfg = &self.analysis;
        let mut failures = Vec::new();
        match task {
            Task::EnergyProfile {
                centers,
                random_centers,
                r0,
                j_max,
            } => {
                let map = need_map(model)?;
                energy_profile_task(map, cfg, centers, *random_centers, *r0, *j_max, prefix, dir, &mut failures)?;
            }
            Task::Strata { grid, ks } => {
                let map = need_map(model)?;
                let n = map.domain_dim();
                let ks = ks.clone().unwrap_or_else(|| (0..n).collect());
                let engine = Homogeneity::new(n, cfg);
                let pts = grid.points(n)?;
                let strata = effective_strata(&engine, map, &pts, &ks, cfg.eta, cfg.effective_gamma(), cfg.j_max)?;
                dir.csv(&format!("{prefix}.csv"), |w| strata.write_membership_csv(w))?;
                let sizes: Vec<serde_json::Value> = ks
                    .iter()
                    .map(|&k| {
                        let s: Vec<usize> = (0..=cfg.j_max).map(|j| strata.stratum(k, j).len()).collect();
                        json!({ "k": k, "sizes": s })
                    })
                    .collect();
                let violations = strata.containment_violations();
                dir.json(
                    &format!("{prefix}.json"),
                    &json!({ "points": pts.len(), "strata": sizes, "containment_violations": violations }),
                )?;
                if violations > 0 {
                    failures.push(format!("{violations} containment violations"));
                }
            }
            Task::Decompose {
                grid,
                k,
                depth,
                exponent_range,
                max_count,
            } => {
                let map = need_map(model)?;
                let n = map.domain_dim();
                let engine = Homogeneity::new(n, cfg);
                let pts = grid.points(n)?;
                let depth = depth.unwrap_or(cfg.j_max);
                let gamma = cfg.effective_gamma();
                let mut strata = effective_stratum(&engine, map, &pts, *k, cfg.eta, gamma, depth)?;
                label_tuples(&engine, map, &mut strata, cfg.eps, cfg.t_for(n))?;
                let cover = decompose(&strata, *k, depth)?;
                dir.csv(&format!("{prefix}.csv"), |w| cover.write_counts_csv(w))?;
                let counts: Vec<(usize, usize)> = cover.scales.iter().map(|s| (s.j, s.ball_count)).collect();
                let exponent = count_growth_exponent(&counts, gamma).ok();
                dir.json(
                    &format!("{prefix}.json"),
                    &json!({
                        "k": k,
                        "counts": counts,
                        "orphans": cover.scales.iter().map(|s| s.orphans).collect::<Vec<_>>(),
                        "growth_exponent": exponent,
                    }),
                )?;
                if let Some([lo, hi]) = exponent_range {
                    match exponent {
                        Some(e) if e >= *lo && e <= *hi => {}
                        e => failures.push(format!("growth exponent {e:?} outside [{lo}, {hi}]")),
                    }
                }
                if let Some(m) = max_count {
                    if let Some(&(j, c)) = counts.iter().find(|(_, c)| c > m) {
                        failures.push(format!("{c} balls at depth {j} exceed {m}"));
                    }
                }
            }
            Task::TubeFit {
                set,
                radii,
                slope_range,
            } => {
                let radii = radii
                    .clone()
                    .unwrap_or_else(|| (2..=7).rev().map(|i| 0.5f64.powi(i)).collect());
                let estimates = tube_estimates(model, cfg, set, &radii)?;
                dir.csv(&format!("{prefix}.csv"), |w| {
                    w.write_record(["r", "volume", "error"])?;
                    for e in &estimates {
                        w.write_record([e.r.to_string(), e.volume.to_string(), e.error.to_string()])?;
                    }
                    Ok(())
                })?;
                let fit = minkowski_fit(&estimates)?;
                dir.json(&format!("{prefix}.json"), &fit)?;
                if let Some([lo, hi]) = slope_range {
                    if fit.slope < *lo || fit.slope > *hi {
                        failures.push(format!("slope {} outside [{lo}, {hi}]", fit.slope));
                    }
                }
            }
            Task::LpSweep { k, integrand, expect } => {
                let map = need_map(model)?;
                let engine = Regularity::new(map.domain_dim(), cfg);
                let table = engine.lp_sharpness_sweep(map, *k, *integrand)?;
                dir.csv(&format!("{prefix}.csv"), |w| write_lp_csv(&table.rows, w))?;
                dir.json(&format!("{prefix}.json"), &table)?;
                let radial_id = format!("radial({},{})", k + 2, k + 1);
                let expect = expect.clone().or_else(|| (map.id() == radial_id).then(|| "CCDD".to_string()));
                if let Some(e) = expect {
                    if e != table.observed {
                        failures.push(format!("verdicts {} (expected {e})", table.observed));
                    }
                }
            }
            Task::ConeSplit {
                y,
                z,
                plane,
                r,
                max_defect,
            } => {
                let map = need_map(model)?;
                let engine = Homogeneity::new(map.domain_dim(), cfg);
                let rep = engine.cone_splitting_check(map, y, z, plane, *r, cfg.effective_gamma())?;
                dir.json(&format!("{prefix}.json"), &rep)?;
                if let Some(m) = max_defect {
                    if rep.d_k1_at_y > *m {
                        failures.push(format!("D_(k+1) = {} exceeds {m}", rep.d_k1_at_y));
                    }
                }
            }
            Task::CurrentSuite {
                center,
                ps,
                points,
                r0,
                ladder,
            } => {
                let s = model
                    .as_surface()
                    .ok_or_else(|| Error::Config("current-suite needs a hypersurface".into()))?;
                current_suite(s, cfg, center.as_deref(), ps, *points, *r0, *ladder, prefix, dir, &mut failures)?;
            }
        }
        Ok(failures)
    }
}

fn need_map(model: &Model) -> Result<&ManifoldMap> {
    model
        .as_map()
        .ok_or_else(|| Error::Config(format!("`{}` is not a map", model.id())))
}

fn uniform_ball_points(n: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let d = geom::normalized(&g).unwrap_or_else(|| geom::unit(n, 0));
            geom::scale(&d, radius * rng.gen::<f64>().powf(1.0 / n as f64))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn energy_profile_task(
    map: &ManifoldMap,
    cfg: &AnalysisConfig,
    centers: &[Vec<f64>],
    random_centers: usize,
    r0: Option<f64>,
    j_max: Option<usize>,
    prefix: &str,
    dir: &mut OutputDir,
    failures: &mut Vec<String>,
) -> Result<()> {
    let n = map.domain_dim();
    if !map.energy_bound().is_finite() {
        return Err(Error::InvalidModel(format!("{} has infinite energy", map.id())));
    }
    let mut centers = centers.to_vec();
    centers.extend(uniform_ball_points(n, 0.5 * map.radius(), random_centers, cfg.seed));
    if centers.is_empty() {
        centers.push(vec![0.0; n]);
    }
    let eq = EnergyQuadrature::new(n, cfg);
    let gamma = cfg.effective_gamma();
    let j_max = j_max.unwrap_or(cfg.j_max);
    let mut profiles = Vec::new();
    let mut drops = Vec::new();
    for x in &centers {
        let room = map.radius() - norm(x);
        let r0 = r0.unwrap_or(1.0).min(room);
        let prof = eq.profile(map, x, r0, gamma, j_max)?;
        let v = prof.monotonicity_violation(3.0);
        if v > 0.0 {
            failures.push(format!("theta increases by {v:e} toward 0 at {x:?}"));
        }
        for w in prof.radii.windows(2) {
            let (t, s) = (w[0], w[1]);
            let drop = eq.monotonicity_drop(map, x, s, t)?;
            let defect = eq.radial_defect(map, x, s, t)?;
            let slack = 3.0 * (drop.error + defect.error) + 1e-9;
            if (drop.value - defect.value).abs() > slack {
                failures.push(format!(
                    "drop {} vs radial defect {} at {x:?}, s = {s}",
                    drop.value, defect.value
                ));
            }
            drops.push((stratification::coord_string(x), s, t, drop, defect));
        }
        profiles.push(prof);
    }
    dir.csv(&format!("{prefix}.csv"), |w| {
        w.write_record(["center", "r", "theta", "err"])?;
        for p in &profiles {
            p.write_csv(w)?;
        }
        Ok(())
    })?;
    dir.csv(&format!("{prefix}-drops.csv"), |w| {
        w.write_record(["center", "s", "t", "drop", "drop_err", "defect", "defect_err"])?;
        for (c, s, t, d, e) in &drops {
            w.write_record([
                c.clone(),
                s.to_string(),
                t.to_string(),
                d.value.to_string(),
                d.error.to_string(),
                e.value.to_string(),
                e.error.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let worst = profiles
        .iter()
        .map(|p| p.monotonicity_violation(3.0))
        .fold(0.0, f64::max);
    dir.json(
        &format!("{prefix}.json"),
        &json!({ "centers": centers.len(), "ladder": j_max + 1, "worst_violation": worst }),
    )?;
    Ok(())
}

fn tube_estimates(model: &Model, cfg: &AnalysisConfig, set: &TubeSet, radii: &[f64]) -> Result<Vec<TubeEstimate>> {
    let n = model.dim();
    let fixed = |pts: Vec<Vec<f64>>| -> Result<Vec<TubeEstimate>> {
        match model {
            Model::Map(_) => Ok(tube_volume_ladder(&pts, n, radii, cfg.mc_samples, cfg.seed)),
            Model::Surface(s) => radii
                .iter()
                .map(|&r| s.current_tube_mass(&pts, r, cfg.mc_samples, cfg.seed))
                .collect(),
        }
    };
    match set {
        TubeSet::Singular => fixed(match model {
            Model::Map(m) => m.singular_points(),
            Model::Surface(s) => s.singular_points(),
        }),
        TubeSet::Points { points } => fixed(points.clone()),
        TubeSet::Segment { a, b, count } => fixed(segment_points(a, b, *count)),
        TubeSet::BadSet { grid } => {
            let map = need_map(model)?;
            let field = Regularity::new(n, cfg).regularity_field(map, &grid.points(n)?)?;
            Ok(radii
                .iter()
                .map(|&r| {
                    let seed = geom::derive_seed(cfg.seed, &[], r);
                    tube_volume(&field.bad_set(r), n, r, cfg.mc_samples, seed)
                })
                .collect())
        }
        TubeSet::Stratum { grid, k } => {
            let map = need_map(model)?;
            let engine = Homogeneity::new(n, cfg);
            let strata = effective_stratum(&engine, map, &grid.points(n)?, *k, cfg.eta, cfg.effective_gamma(), cfg.j_max)?;
            fixed(strata.stratum_points(*k, cfg.j_max))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn current_suite(
    s: &HypersurfaceModel,
    cfg: &AnalysisConfig,
    center: Option<&[f64]>,
    ps: &[f64],
    points: usize,
    r0: Option<f64>,
    ladder: Option<usize>,
    prefix: &str,
    dir: &mut OutputDir,
    failures: &mut Vec<String>,
) -> Result<()> {
    let n = s.n();
    let k = s.k();
    let center = center
        .map(|c| c.to_vec())
        .or_else(|| s.singular_points().into_iter().next())
        .unwrap_or_else(|| s.project(&vec![0.0; n]));
    let r0 = r0.unwrap_or(1.0).min(s.working_radius() - norm(&center));
    let profile = s.mass_profile(&center, r0, cfg.effective_gamma(), ladder.unwrap_or(6))?;
    dir.csv(&format!("{prefix}-density.csv"), |w| profile.write_csv(w))?;
    if s.is_minimal() {
        let v = profile.monotonicity_violation(3.0);
        if v > 0.0 {
            failures.push(format!("density increases by {v:e} toward the center"));
        }
    }

    // |A| at sampled smooth points, closed form against differences
    let mut rows = Vec::new();
    let mut worst_rel: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    let sing = s.singular_points();
    for q in uniform_ball_points(n, 1.0, 4 * points, cfg.seed ^ 0xa5a5) {
        if rows.len() == points {
            break;
        }
        let y = s.project(&q);
        if norm(&y) > 1.0 || sing.iter().any(|p| geom::dist(p, &y) < 0.02) {
            continue;
        }
        let exact = s.shape_norm(&y)?;
        let fd = s.fd_shape_norm(&y)?;
        let h = s.mean_curvature(&y)?;
        let rel = if exact > 0.0 { (fd - exact).abs() / exact } else { fd.abs() };
        worst_rel = worst_rel.max(rel);
        worst_h = worst_h.max(h.abs() / exact.max(1.0));
        let rho = sing.first().map_or(f64::NAN, |p| geom::dist(p, &y));
        rows.push((y, rho, exact, fd, h));
    }
    dir.csv(&format!("{prefix}-shape.csv"), |w| {
        w.write_record(["x", "rho", "A", "A_fd", "H"])?;
        for (y, rho, a, fd, h) in &rows {
            w.write_record([
                stratification::coord_string(y),
                rho.to_string(),
                a.to_string(),
                fd.to_string(),
                h.to_string(),
            ])?;
        }
        Ok(())
    })?;
    if worst_rel > 1e-3 {
        failures.push(format!("|A| differences off by {worst_rel:e}"));
    }
    if s.is_minimal() && worst_h > 1e-3 {
        failures.push(format!("mean curvature {worst_h:e} on a minimal model"));
    }

    let mut lp: Vec<LpResult> = Vec::new();
    for &p in ps {
        let a = s.lp_a(p, LpIntegrand::ShapeOperator, cfg)?;
        let b = s.lp_a(p, LpIntegrand::InverseCurrentRegularity, cfg)?;
        if a.verdict.is_convergent() && a.value > b.value + a.error + b.error {
            failures.push(format!("∫|A|^{p} = {} exceeds ∫r_I^-{p} = {}", a.value, b.value));
        }
        lp.push(a);
        lp.push(b);
    }
    dir.csv(&format!("{prefix}-lp.csv"), |w| write_lp_csv(&lp, w))?;

    let theta: Vec<f64> = profile.theta.iter().map(|t| t.value).collect();
    let plane = unit_ball_volume(k);
    dir.json(
        &format!("{prefix}.json"),
        &json!({
            "model": s.id(),
            "center": center,
            "density": theta,
            "density_spread": profile.spread(),
            "flat_density": plane,
            "shape_points": rows.len(),
            "shape_max_rel_err": worst_rel,
            "max_mean_curvature": worst_h,
            "lp": lp.iter().map(|r| json!({
                "p": r.p,
                "integrand": r.integrand.name(),
                "value": r.value,
                "verdict": verdict_name(&r.verdict),
            })).collect::<Vec<_>>(),
            "pi": PI,
        }),
    )?;
    Ok(())
}

fn verdict_name(v: &Verdict) -> String {
    match v {
        Verdict::Convergent => "convergent".into(),
        Verdict::DivergentLog { rate } => format!("divergent-log {rate}"),
        Verdict::DivergentPower { exponent } => format!("divergent-power {exponent}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tasks_and_overrides() {
        let s = Scenario::from_toml(
            r#"
model = "radial(3,2)"
preset = "scan"
[analysis]
seed = 9
j_max = 4
[[tasks]]
kind = "lp-sweep"
k = 1
[[tasks]]
kind = "tube-fit"
set = { type = "bad-set", grid = { type = "graded", levels = 3, divisions = 2 } }
"#,
        )
        .unwrap();
        assert_eq!(s.analysis.seed, 9);
        assert_eq!(s.analysis.net_size, AnalysisConfig::scan().net_size);
        assert_eq!(s.tasks.len(), 2);
        assert_eq!(s.tasks[1].kind(), "tube-fit");
        assert!(s.check().is_ok());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(
            Scenario::from_toml("model = \"radial(3)\"\n[analysis]\nbogus = 1\n"),
            Err(Error::Toml(_))
        ));
        assert!(Scenario::from_toml("model = \"radial(3)\"\n[analysis]\neta = -1.0\n").is_err());
        let s = Scenario::from_toml("model = \"klein-bottle\"\n").unwrap();
        assert!(matches!(s.check(), Err(Error::UnknownModel(_))));
        let s = Scenario::from_toml("model = \"simons-cone\"\n[[tasks]]\nkind = \"lp-sweep\"\nk = 1\n").unwrap();
        assert!(matches!(s.check(), Err(Error::Config(_))));
        assert!(Scenario::from_toml("model = \"radial(3)\"\n[[tasks]]\nkind = \"lp-sweep\"\nk = 1\nextra = 2\n").is_err());
    }

    #[test]
    fn failed_task_still_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::from_toml(
            "model = \"constant(3,[1,0])\"\n[[tasks]]\nkind = \"lp-sweep\"\nk = 1\nexpect = \"CCDD\"\n",
        )
        .unwrap();
        let rep = s.run(dir.path()).unwrap();
        assert!(!rep.all_passed());
        let text = std::fs::read_to_string(rep.manifest).unwrap();
        assert!(text.contains("task 1 lp-sweep FAILED verdicts CCCC"));
        assert!(text.contains("file 01-lp-sweep.csv sha256"));
    }
}
