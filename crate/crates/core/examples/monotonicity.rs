//! Normalized energy θ_r(x) of x/|x| on a shrinking ladder of radii, with
//! the drop between the two largest radii checked against the radial
//! defect integral.

use strat_lab::energy::EnergyQuadrature;
use strat_lab::{models, AnalysisConfig};

fn main() -> strat_lab::Result<()> {
    let cfg = AnalysisConfig::default();
    let f = models::radial(3)?;
    let q = EnergyQuadrature::new(3, &cfg);
    for center in [[0.0, 0.0, 0.0], [0.25, 0.1, 0.0]] {
        let profile = q.profile(&f, &center, 0.5, cfg.gamma, 6)?;
        println!("center {center:?}");
        for (r, t) in profile.radii.iter().zip(&profile.theta) {
            println!("  r = {r:.5}  theta = {:.6} ± {:.1e}", t.value, t.error);
        }
        let (s, t) = (profile.radii[1], profile.radii[0]);
        let drop = q.monotonicity_drop(&f, &center, s, t)?;
        let defect = q.radial_defect(&f, &center, s, t)?;
        println!("  drop {:.6}  radial defect {:.6}", drop.value, defect.value);
        println!("  monotonicity violation {:.2e}", profile.monotonicity_violation(3.0));
    }
    Ok(())
}
