use proptest::prelude::*;

use strat_lab::currents;
use strat_lab::energy::EnergyQuadrature;
use strat_lab::geom::{self, norm, unit_ball_volume};
use strat_lab::homogeneity::{HlLabel, Homogeneity};
use strat_lab::models::{self, make_homogeneous, Link, ManifoldMap};
use strat_lab::regularity::Regularity;
use strat_lab::stratification::{effective_strata, lattice_ball, tube_volume_ladder};
use strat_lab::AnalysisConfig;

fn point(n: usize, max: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n).prop_map(move |v| {
        let r = norm(&v);
        if r > 1.0 {
            geom::scale(&v, max / r)
        } else {
            geom::scale(&v, max)
        }
    })
}

fn line_model() -> ManifoldMap {
    make_homogeneous(&[0.0; 4], &[geom::unit(4, 3)], Link::Identity)
        .unwrap()
        .into_map(2.0)
}

fn maps3() -> Vec<ManifoldMap> {
    vec![
        models::radial(3).unwrap(),
        models::geodesic(&[0.7, -0.4, 1.1]).unwrap(),
        make_homogeneous(&[0.1, 0.0, -0.2], &[geom::unit(3, 2)], Link::Identity)
            .unwrap()
            .into_map(2.0),
        models::perturbed(models::radial(3).unwrap(), 0.05, 3),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rescale_composes(y in point(3, 0.8), z in point(3, 0.9), r in 0.1f64..0.9, s in 0.1f64..0.9) {
        for f in maps3() {
            let r = r * (f.radius() - norm(&y)) * 0.99;
            let a = f.rescale(&y, r).unwrap().rescale(&[0.0; 3], s).unwrap();
            let b = f.rescale(&y, r * s).unwrap();
            let (va, vb) = (a.value(&z), b.value(&z));
            prop_assert!(geom::dist(&va, &vb) <= 1e-12, "{}: {va:?} vs {vb:?}", f.id());
        }
    }

    #[test]
    fn homogeneous_models_are_dilation_invariant(z in point(4, 1.0), lambda in 0.01f64..50.0) {
        let base = [0.2, -0.1, 0.0, 0.3];
        let h = make_homogeneous(&base, &[geom::unit(4, 1)], Link::Identity).unwrap().into_map(100.0);
        let a = h.value(&geom::add_scaled(&base, lambda, &z));
        let b = h.value(&geom::add_scaled(&base, 1.0, &z));
        prop_assert!(geom::dist(&a, &b) <= 1e-12);
    }

    #[test]
    fn directional_norm_matches_differences(x in point(4, 0.9), v in point(4, 1.0)) {
        prop_assume!(norm(&x) > 0.05 && norm(&v) > 0.1);
        let maps = [
            models::radial(4).unwrap(),
            models::geodesic(&[0.3, 1.0, -0.5, 0.2]).unwrap(),
            models::constant(4, &[0.6, 0.8]).unwrap(),
            line_model(),
        ];
        for f in &maps {
            prop_assume!(f.singular_distance(&x).map_or(true, |d| d > 0.05));
            let fast = f.directional_norm_sq(&x, &v);
            let slow: f64 = (f.jacobian(&x) * nalgebra::DVector::from_column_slice(&v)).norm_squared();
            prop_assert!((fast - slow).abs() <= 1e-9 * slow.max(1.0), "{}: {fast} vs {slow}", f.id());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn theta_is_scale_invariant(y in point(3, 0.8), r in 0.05f64..0.9) {
        let cfg = AnalysisConfig::default();
        let q = EnergyQuadrature::new(3, &cfg);
        for f in maps3().into_iter().take(2) {
            let r = r * (f.radius() - norm(&y)) * 0.99;
            let direct = q.theta(&f, &y, r).unwrap();
            let scaled = q.theta(&f.rescale(&y, r).unwrap(), &[0.0; 3], 1.0).unwrap();
            let slack = cfg.tolerance * (1.0 + direct.value) + direct.error + scaled.error;
            prop_assert!((direct.value - scaled.value).abs() <= slack);
            prop_assert!((direct.value - scaled.value).abs() <= 1e-9 * direct.value.max(1.0));
        }
    }

    #[test]
    fn drops_are_additive(x in point(3, 0.5), s in 0.05f64..0.3, t in 0.3f64..0.6, u in 0.6f64..1.0) {
        let q = EnergyQuadrature::new(3, &AnalysisConfig::scan());
        let f = models::radial(3).unwrap();
        let su = q.monotonicity_drop(&f, &x, s, u).unwrap().value;
        let st = q.monotonicity_drop(&f, &x, s, t).unwrap().value;
        let tu = q.monotonicity_drop(&f, &x, t, u).unwrap().value;
        prop_assert!((su - st - tu).abs() <= 1e-12 * su.abs().max(1.0));
    }

    #[test]
    fn tube_volume_is_monotone(set in proptest::collection::vec(point(3, 1.0), 1..20), seed in 0u64..1000) {
        let radii = [0.5, 0.25, 0.125, 0.0625];
        let t = tube_volume_ladder(&set, 3, &radii, 2000, seed);
        for w in t.windows(2) {
            prop_assert!(w[0].volume >= w[1].volume);
        }
    }

    #[test]
    fn bad_set_grows_with_r(r in 0.01f64..1.0, extra in 0.0f64..0.5) {
        let g = Regularity::new(3, &AnalysisConfig::scan());
        let f = models::radial(3).unwrap();
        let field = g.regularity_field(&f, &lattice_ball(3, 0.25, 1.0)).unwrap();
        let small = field.bad_set(r);
        let big = field.bad_set(r + extra);
        prop_assert!(small.iter().all(|p| big.contains(p)));
    }

    #[test]
    fn regularity_scale_rescales(y in point(3, 0.8), r in 0.1f64..0.9) {
        let g = Regularity::new(3, &AnalysisConfig::default());
        for f in maps3().into_iter().take(2) {
            let r = r * (f.radius() - norm(&y)) * 0.99;
            let scaled = g.regularity_scale(&f.rescale(&y, r).unwrap(), &[0.0; 3]).unwrap();
            let direct = g.regularity_scale(&f, &y).unwrap();
            let expect = (direct.r / r).min(scaled.cap);
            prop_assert!((scaled.r - expect).abs() <= 2e-4 * expect.max(1e-12), "{} vs {}", scaled.r, expect);
        }
    }

    #[test]
    fn simons_density_is_constant(r in 0.01f64..2.0) {
        let cone = currents::simons_cone().unwrap();
        let d = cone.density(&[0.0; 8], r).unwrap();
        let exact = std::f64::consts::PI.powi(4) / 14.0;
        prop_assert!((d.value - exact).abs() <= 1e-9 * exact);
    }

    #[test]
    fn simons_regularity_scale_is_proportional(u in point(4, 1.0), v in point(4, 1.0), rho in 0.01f64..1.5) {
        prop_assume!(norm(&u) > 0.1 && norm(&v) > 0.1);
        let cone = currents::simons_cone().unwrap();
        let x = currents::simons_point(&u, &v, rho);
        let s = cone.current_regularity_scale(&x).unwrap();
        let ratio = s.r / norm(&x);
        prop_assert!((ratio - 1.0 / (1.0 + 6f64.sqrt())).abs() <= 0.02 * ratio);
    }

    #[test]
    fn hyperplane_mass_is_flat(x in point(7, 0.9), r in 0.01f64..1.0) {
        let plane = currents::hyperplane(8).unwrap();
        let mut p = x.clone();
        p.push(0.0);
        let m = plane.mass(&p, r).unwrap();
        let exact = unit_ball_volume(7) * r.powi(7);
        prop_assert!((m.value - exact).abs() <= 1e-12 * exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn defects_are_nested(x in point(3, 0.6), r in 0.1f64..0.8) {
        let cfg = AnalysisConfig::scan();
        let h = Homogeneity::new(3, &cfg);
        let f = models::radial(3).unwrap();
        let r = r.min(f.radius() - norm(&x) - 1e-3);
        let d: Vec<f64> = (0..=3).map(|k| h.homogeneity_defect(&f, &x, r, k).unwrap().defect).collect();
        // a (k+1)-homogeneous map is k-homogeneous; allow twice the
        // refinement tolerance for the search
        let slack = 2.0 * cfg.tolerance;
        for k in 0..3 {
            prop_assert!(d[k + 1] >= d[k] - slack, "{d:?}");
        }
    }

    #[test]
    fn homogeneous_models_have_zero_defect_at_base(r in 0.05f64..1.0) {
        let h = Homogeneity::new(3, &AnalysisConfig::default());
        let base = [0.0, 0.2, -0.1];
        let m = make_homogeneous(&base, &[geom::unit(3, 0)], Link::Identity).unwrap().into_map(2.0);
        for j in 0..=1 {
            let d = h.homogeneity_defect(&m, &base, r, j).unwrap().defect;
            prop_assert!(d <= 1e-8, "D_{j} = {d}");
        }
    }

    #[test]
    fn low_set_grows_with_eps(eps in 0.01f64..0.5, extra in 0.0f64..0.5) {
        let h = Homogeneity::new(3, &AnalysisConfig::scan());
        let f = models::radial(3).unwrap();
        let grid = lattice_ball(3, 0.5, 1.0);
        let a = h.classify_hl(&f, &grid, 2.0, 0.2, eps).unwrap();
        let b = h.classify_hl(&f, &grid, 2.0, 0.2, eps + extra).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(*x != HlLabel::Low || *y == HlLabel::Low);
        }
    }

    #[test]
    fn strata_are_nested(spacing in 0.3f64..0.6, eta in 0.02f64..0.3) {
        let h = Homogeneity::new(3, &AnalysisConfig::scan());
        let f = models::radial(3).unwrap();
        let s = effective_strata(&h, &f, &lattice_ball(3, spacing, 0.8), &[0, 1, 2], eta, 0.5, 3).unwrap();
        prop_assert_eq!(s.containment_violations(), 0);
    }
}
