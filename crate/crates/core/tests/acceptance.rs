//! Acceptance criteria 1-9. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stderr (bypassing output capture) and then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use strat_lab::catalog::parse_model;
use strat_lab::currents;
use strat_lab::energy::EnergyQuadrature;
use strat_lab::geom::{self, norm, unit_ball_volume, unit_sphere_area};
use strat_lab::homogeneity::Homogeneity;
use strat_lab::models::{self, make_homogeneous, Link, ManifoldMap};
use strat_lab::regularity::{LpIntegrand, Regularity, Verdict};
use strat_lab::scenario::Scenario;
use strat_lab::stratification::{
    bad_scale_bound, count_bad_scales, count_growth_exponent, decompose, effective_stratum,
    graded_grid, label_tuples, lattice_ball, minkowski_fit, segment_points, tube_volume,
    tube_volume_ladder, tuple_class_bound,
};
use strat_lab::AnalysisConfig;

fn report(n: usize, title: &str, elapsed: Duration, failures: &[String]) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut line = format!("criterion {n}: {status} {title} ({:.1}s)", elapsed.as_secs_f64());
    for f in failures {
        line.push_str(&format!("\n    {f}"));
    }
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(failures.is_empty(), "criterion {n} failed: {failures:?}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// ∫_{B_1} |∇(x/|x|)|^p on ℝⁿ; the gradient is √(n−1)/|x|.
fn radial_lp_oracle(n: usize, p: f64) -> f64 {
    unit_sphere_area(n) * (n as f64 - 1.0).powf(p / 2.0) / (n as f64 - p)
}

fn uniform_centers(n: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let d = geom::normalized(&g).unwrap();
            geom::scale(&d, radius * rng.gen::<f64>().powf(1.0 / n as f64))
        })
        .collect()
}

fn harmonic_models() -> Vec<ManifoldMap> {
    let mut out = vec![
        models::radial(3).unwrap(),
        models::radial(4).unwrap(),
        models::constant(3, &[0.0, 0.6, 0.8]).unwrap(),
        models::geodesic(&[1.0, 0.0, 0.0]).unwrap(),
        models::geodesic(&[1.2, 0.0, 1.6]).unwrap(),
    ];
    // x'/|x'| on ℝ³ × ℝ: singular along a line, finite energy
    out.push(
        make_homogeneous(&[0.0; 4], &[geom::unit(4, 3)], Link::Identity)
            .unwrap()
            .into_map(2.0),
    );
    out
}

#[test]
fn criterion_1_monotonicity() {
    let start = Instant::now();
    let cfg = AnalysisConfig::default();
    let gamma = cfg.effective_gamma();
    let mut failures = Vec::new();
    let mut checked = 0;
    for (m, map) in harmonic_models().iter().enumerate() {
        let n = map.domain_dim();
        let eq = EnergyQuadrature::new(n, &cfg);
        let mut centers = vec![vec![0.0; n]];
        centers.extend(uniform_centers(n, 0.5 * map.radius(), 20, 100 + m as u64));
        for x in &centers {
            let r0 = 1.0f64.min(map.radius() - norm(x));
            let prof = eq.profile(map, x, r0, gamma, 6).unwrap();
            let v = prof.monotonicity_violation(3.0);
            if v > 0.0 {
                failures.push(format!("{} at {x:?}: theta rises by {v:e}", map.id()));
            }
            for (j, w) in prof.radii.windows(2).enumerate() {
                // W_{s,t} = θ_t − θ_s straight from the profile
                let drop = prof.theta[j].minus(prof.theta[j + 1]);
                let defect = eq.radial_defect(map, x, w[1], w[0]).unwrap();
                let slack = 3.0 * (drop.error + defect.error) + 1e-10 * drop.value.abs().max(1.0);
                if (drop.value - defect.value).abs() > slack {
                    failures.push(format!(
                        "{} at {x:?}, s = {}: W = {} vs defect {}",
                        map.id(),
                        w[1],
                        drop.value,
                        defect.value
                    ));
                }
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(120) {
        failures.push(format!("runtime {elapsed:?} over 2 min"));
    }
    report(1, &format!("monotonicity at {checked} centers"), elapsed, &failures);
}

fn lp_sharpness(n: usize, ps: &[f64]) -> Vec<String> {
    let cfg = AnalysisConfig::default();
    let map = models::radial(n).unwrap();
    let engine = Regularity::new(n, &cfg);
    let mut failures = Vec::new();
    for &p in ps {
        let r = engine.lp_integral(&map, p, LpIntegrand::Gradient).unwrap();
        let exact = radial_lp_oracle(n, p);
        if !r.verdict.is_convergent() || rel(r.value, exact) > 0.01 {
            failures.push(format!("n = {n}, p = {p}: {} {:?} vs {exact}", r.value, r.verdict));
        }
    }
    let r = engine.lp_integral(&map, n as f64, LpIntegrand::Gradient).unwrap();
    let rate = unit_sphere_area(n) * (n as f64 - 1.0).powf(n as f64 / 2.0);
    match r.verdict {
        Verdict::DivergentLog { rate: got } if rel(got, rate) <= 0.1 => {}
        v => failures.push(format!("n = {n}, p = {n}: {v:?}, expected log rate {rate}")),
    }
    failures
}

#[test]
fn criterion_2_sharp_lp() {
    let start = Instant::now();
    let mut failures = lp_sharpness(3, &[2.0, 2.5, 2.9]);
    let t3 = start.elapsed();
    failures.extend(lp_sharpness(4, &[2.0, 3.0, 3.5, 3.9]));
    let t4 = start.elapsed() - t3;
    for (n, t) in [(3, t3), (4, t4)] {
        if t > Duration::from_secs(120) {
            failures.push(format!("n = {n} took {t:?}"));
        }
    }
    report(2, "sharp L^p for radial maps, n = 3 and 4", start.elapsed(), &failures);
}

#[test]
fn criterion_3_regularity_scale() {
    let start = Instant::now();
    let cfg = AnalysisConfig::default();
    let mut failures = Vec::new();
    let f = models::radial(3).unwrap();
    let engine = Regularity::new(3, &cfg);
    let ratios: Vec<f64> = [0.02, 0.1, 0.3, 0.7]
        .iter()
        .zip(uniform_centers(3, 1.0, 4, 3))
        .map(|(s, d)| {
            let x = geom::scale(&geom::normalized(&d).unwrap(), *s);
            engine.regularity_scale(&f, &x).unwrap().r / s
        })
        .collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    if hi / lo > 1.05 {
        failures.push(format!("r_f/|x| ranges over {ratios:?}"));
    }
    let g = models::geodesic(&[1.2, 0.0, 1.6]).unwrap();
    let r = engine.regularity_scale(&g, &[0.1, -0.2, 0.3]).unwrap().r;
    let exact = (5f64.sqrt() - 1.0) / 4.0;
    if (r - exact).abs() > 1e-3 {
        failures.push(format!("geodesic r_f = {r}, expected {exact}"));
    }
    let mut compared = 0;
    for map in [models::radial(3).unwrap(), models::radial(4).unwrap(), g] {
        let n = map.domain_dim();
        let e = Regularity::new(n, &cfg);
        for p in [2.0, 2.5, 2.9, 3.5] {
            let grad = e.lp_integral(&map, p, LpIntegrand::Gradient).unwrap();
            if !grad.verdict.is_convergent() {
                continue;
            }
            let inv = e.lp_integral(&map, p, LpIntegrand::InverseRegularity).unwrap();
            compared += 1;
            if inv.value < grad.value - grad.error - inv.error {
                failures.push(format!("{} p = {p}: ∫r_f^-p = {} < ∫|∇f|^p = {}", map.id(), inv.value, grad.value));
            }
        }
    }
    report(
        3,
        &format!("regularity scale structure, {compared} L^p comparisons"),
        start.elapsed(),
        &failures,
    );
}

#[test]
fn criterion_4_tube_exponents() {
    let start = Instant::now();
    let cfg = AnalysisConfig::default();
    let radii: Vec<f64> = (2..=7).rev().map(|i| 0.5f64.powi(i)).collect();
    let mut failures = Vec::new();

    let f = models::radial(3).unwrap();
    let field = Regularity::new(3, &cfg)
        .regularity_field(&f, &graded_grid(3, 8, 4))
        .unwrap();
    let bad: Vec<_> = radii
        .iter()
        .map(|&r| tube_volume(&field.bad_set(r), 3, r, cfg.mc_samples, 11))
        .collect();
    let fit = minkowski_fit(&bad).unwrap();
    if fit.slope < 2.8 {
        failures.push(format!("bad-set slope {}", fit.slope));
    }
    let point = tube_volume_ladder(&[vec![0.0; 3]], 3, &radii, cfg.mc_samples, 12);
    let sp = minkowski_fit(&point).unwrap().slope;
    if (sp - 3.0).abs() > 0.15 {
        failures.push(format!("point slope {sp}"));
    }
    let seg = segment_points(&[-0.5, 0.0, 0.0], &[0.5, 0.0, 0.0], 2001);
    let line = tube_volume_ladder(&seg, 3, &radii, cfg.mc_samples, 13);
    let sl = minkowski_fit(&line).unwrap().slope;
    if (sl - 2.0).abs() > 0.15 {
        failures.push(format!("segment slope {sl}"));
    }
    report(
        4,
        &format!("tube slopes: bad set {:.3}, point {sp:.3}, segment {sl:.3}", fit.slope),
        start.elapsed(),
        &failures,
    );
}

#[test]
fn criterion_5_pigeonhole() {
    let start = Instant::now();
    let cfg = AnalysisConfig::scan();
    let gamma = cfg.effective_gamma();
    let mut failures = Vec::new();
    let mut ids = Vec::new();
    for id in [
        "radial(3,2)",
        "radial(4,3)",
        "constant(3,[0,1])",
        "geodesic([1,0,0])",
        "homogeneous(1,[[1,0,0]],identity)",
        "perturbed(radial(3),0.05,7)",
    ] {
        let map = parse_model(id, None).unwrap().as_map().unwrap().clone();
        let n = map.domain_dim();
        ids.push(id);
        if !map.energy_bound().is_finite() {
            // Λ = ∞ makes the bound vacuous, and W is ∞ − ∞
            assert_eq!(bad_scale_bound(map.energy_bound(), 0.1, n), u64::MAX);
            continue;
        }
        let eq = EnergyQuadrature::new(n, &cfg);
        for x in lattice_ball(n, 0.5, 1.0) {
            let b = count_bad_scales(&eq, &map, &x, gamma, 8, 0.0).unwrap();
            for delta in [0.1, 0.5, 1.0] {
                let count = b.drops.iter().filter(|(_, w)| *w > delta).count() as u64;
                let bound = bad_scale_bound(map.energy_bound(), delta, n);
                if count > bound {
                    failures.push(format!("{id} at {x:?}, δ = {delta}: {count} > {bound}"));
                }
            }
        }
    }

    // tuple classes per depth against Σ_{i ≤ K} C(j, i), with K from the
    // pigeonhole bound at δ = ε
    for id in ["radial(3,2)", "geodesic([1,0,0])"] {
        let map = parse_model(id, None).unwrap().as_map().unwrap().clone();
        let h = Homogeneity::new(3, &cfg);
        let mut strata = effective_stratum(&h, &map, &lattice_ball(3, 0.5, 1.0), 0, cfg.eta, gamma, 8).unwrap();
        label_tuples(&h, &map, &mut strata, cfg.eps, cfg.t_for(3)).unwrap();
        let k = bad_scale_bound(map.energy_bound(), cfg.eps, 3);
        let tuples = strata.tuples.as_ref().unwrap();
        for j in 1..=8 {
            let mut classes: Vec<String> = tuples.iter().map(|t| t.prefix(j)).collect();
            classes.sort();
            classes.dedup();
            let bound = tuple_class_bound(j, k);
            if classes.len() as u128 > bound {
                failures.push(format!("{id}, depth {j}: {} classes > {bound}", classes.len()));
            }
        }
    }
    report(
        5,
        &format!("pigeonhole bounds on {} models", ids.len()),
        start.elapsed(),
        &failures,
    );
}

/// A line of points along the singular axis plus a coarse lattice.
fn axis_grid(n: usize, axis: usize, count: usize) -> Vec<Vec<f64>> {
    let mut pts = lattice_ball(n, 0.25, 1.0);
    pts.extend(segment_points(
        &geom::scale(&geom::unit(n, axis), -1.0),
        &geom::unit(n, axis),
        count,
    ));
    pts.sort_by(|a, b| strat_lab::stratification::lex_cmp(a, b));
    pts.dedup();
    pts
}

#[test]
fn criterion_6_covering_counts() {
    let start = Instant::now();
    let cfg = AnalysisConfig::scan();
    let gamma = cfg.effective_gamma();
    let mut failures = Vec::new();

    let cyl = parse_model("homogeneous(1,[[1,0,0]],identity)", None).unwrap();
    let cyl = cyl.as_map().unwrap();
    let h = Homogeneity::new(3, &cfg);
    let depth = 6;
    let mut s = effective_stratum(&h, cyl, &axis_grid(3, 0, 257), 1, cfg.eta, gamma, depth).unwrap();
    label_tuples(&h, cyl, &mut s, cfg.eps, cfg.t_for(3)).unwrap();
    let cover = decompose(&s, 1, depth).unwrap();
    let counts: Vec<(usize, usize)> = cover
        .scales
        .iter()
        .filter(|c| c.j >= 2)
        .map(|c| (c.j, c.ball_count))
        .collect();
    let exponent = count_growth_exponent(&counts, gamma).unwrap();
    if !(0.8..=1.2).contains(&exponent) {
        failures.push(format!("cylinder growth exponent {exponent}, counts {counts:?}"));
    }

    let f = models::radial(3).unwrap();
    let depth = 8;
    let mut s = effective_stratum(&h, &f, &graded_grid(3, 8, 2), 0, cfg.eta, gamma, depth).unwrap();
    label_tuples(&h, &f, &mut s, cfg.eps, cfg.t_for(3)).unwrap();
    let radial_counts: Vec<usize> = decompose(&s, 0, depth)
        .unwrap()
        .scales
        .iter()
        .filter(|c| c.j >= 3)
        .map(|c| c.ball_count)
        .collect();
    let first = radial_counts[0].max(1);
    if radial_counts.iter().any(|&c| c > first) {
        failures.push(format!("radial counts grow: {radial_counts:?}"));
    }
    report(
        6,
        &format!("cover growth exponent {exponent:.3}, radial counts {radial_counts:?}"),
        start.elapsed(),
        &failures,
    );
}

#[test]
fn criterion_7_cone_splitting() {
    let start = Instant::now();
    let cfg = AnalysisConfig::default();
    let h = Homogeneity::new(4, &cfg);
    let exact = make_homogeneous(&[0.0; 4], &[geom::unit(4, 0), geom::unit(4, 1)], Link::Identity)
        .unwrap()
        .into_map(2.0);
    let (y, z, plane) = ([0.0; 4], [0.0, 0.5, 0.0, 0.0], vec![geom::unit(4, 0)]);
    let mut failures = Vec::new();
    let d_exact = h.cone_splitting_check(&exact, &y, &z, &plane, 0.5, 0.5).unwrap().d_k1_at_y;
    if d_exact > 1e-8 {
        failures.push(format!("exact model D_(k+1) = {d_exact:e}"));
    }
    let defects: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&a| {
            let m = models::perturbed(exact.clone(), a, 5);
            h.cone_splitting_check(&m, &y, &z, &plane, 0.5, 0.5).unwrap().d_k1_at_y
        })
        .collect();
    if !defects.windows(2).all(|w| w[1] < w[0]) {
        failures.push(format!("defects not decreasing: {defects:?}"));
    }
    // a positive power law in α extrapolates to 0
    let (slope, _, _) = geom::linear_fit(
        &[0.1f64.ln(), 0.05f64.ln(), 0.025f64.ln()],
        &defects.iter().map(|d| d.ln()).collect::<Vec<_>>(),
    );
    if !(slope > 0.5) {
        failures.push(format!("defect order in α is {slope}"));
    }
    report(
        7,
        &format!("cone splitting, D_(k+1) = {defects:?}, order {slope:.2}"),
        start.elapsed(),
        &failures,
    );
}

#[test]
fn criterion_8_simons_cone() {
    let start = Instant::now();
    let cfg = AnalysisConfig::default();
    let cone = currents::simons_cone().unwrap();
    let o = [0.0; 8];
    let mut failures = Vec::new();
    let target = PI.powi(4) / 14.0;
    let prof = cone.mass_profile(&o, 1.0, 0.5, 6).unwrap();
    for (r, t) in prof.radii.iter().zip(&prof.theta) {
        if rel(t.value, target) > 0.005 {
            failures.push(format!("density {} at r = {r}", t.value));
        }
    }
    let plane = 16.0 * PI.powi(3) / 105.0;
    assert!((unit_ball_volume(7) - plane).abs() < 1e-12);
    let vertex = cone.density(&o, 0.5).unwrap().value;
    if vertex <= plane {
        failures.push(format!("vertex density {vertex} ≤ {plane}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sample = cone.sample_ball(&o, 1.0, 100, &mut rng);
    let mut worst: f64 = 0.0;
    for y in &sample.points {
        let rho = norm(y);
        let fd = cone.fd_shape_norm(y).unwrap() * rho;
        let exact = cone.shape_norm(y).unwrap() * rho;
        worst = worst.max((fd - 6f64.sqrt()).abs()).max((exact - 6f64.sqrt()).abs());
    }
    if sample.points.len() != 100 || worst > 1e-3 {
        failures.push(format!("|A|·ρ off by {worst:e} over {} points", sample.points.len()));
    }

    for p in [2.0, 4.0, 6.5] {
        let r = cone.lp_a(p, LpIntegrand::ShapeOperator, &cfg).unwrap();
        let exact = 6f64.powf(p / 2.0) * PI.powi(4) / (2.0 * (7.0 - p));
        if !r.verdict.is_convergent() || rel(r.value, exact) > 0.01 {
            failures.push(format!("∫|A|^{p} = {} {:?}, expected {exact}", r.value, r.verdict));
        }
    }
    let r = cone.lp_a(7.0, LpIntegrand::ShapeOperator, &cfg).unwrap();
    let rate = 6f64.powf(3.5) * PI.powi(4) / 2.0;
    match r.verdict {
        Verdict::DivergentLog { rate: got } if rel(got, rate) <= 0.1 => {}
        v => failures.push(format!("p = 7: {v:?}, expected log rate {rate}")),
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(300) {
        failures.push(format!("runtime {elapsed:?} over 5 min"));
    }
    report(8, "Simons cone suite", elapsed, &failures);
}

const DETERMINISM_SCENARIO: &str = r#"
model = "radial(3,2)"
preset = "scan"

[analysis]
seed = 4242
mc_samples = 4000

[[tasks]]
kind = "energy-profile"
random_centers = 3
j_max = 4

[[tasks]]
kind = "tube-fit"
set = { type = "bad-set", grid = { type = "graded", levels = 4, divisions = 2 } }

[[tasks]]
kind = "lp-sweep"
k = 1
"#;

#[test]
fn criterion_9_determinism() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut compared = 0;
    for text in [
        DETERMINISM_SCENARIO.to_string(),
        "model = \"simons-cone\"\n[analysis]\nseed = 5\n[[tasks]]\nkind = \"current-suite\"\npoints = 40\n[[tasks]]\nkind = \"tube-fit\"\nset = { type = \"singular\" }\n".to_string(),
    ] {
        let s = Scenario::from_toml(&text).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = s.run(a.path()).unwrap();
        let rb = s.run(b.path()).unwrap();
        if !ra.all_passed() {
            failures.push(format!("tasks failed: {:?}", ra.outcomes));
        }
        let mut names: Vec<_> = std::fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        for name in names {
            let x = std::fs::read(a.path().join(&name)).unwrap();
            let y = std::fs::read(b.path().join(&name)).unwrap();
            compared += 1;
            if x != y {
                failures.push(format!("{} differs between runs", name.to_string_lossy()));
            }
        }
        let ma = std::fs::read_to_string(ra.manifest).unwrap();
        let mb = std::fs::read_to_string(rb.manifest).unwrap();
        if ma != mb {
            failures.push("manifests differ".into());
        }
    }
    if compared == 0 {
        failures.push("no CSV files written".into());
    }
    report(9, &format!("determinism over {compared} CSV files"), start.elapsed(), &failures);
}
