//! Density, curvature and regularity scale on the Simons cone
//! {|u| = |v|} in R^8.

use strat_lab::currents::{simons_cone, simons_point};
use strat_lab::regularity::LpIntegrand;
use strat_lab::AnalysisConfig;

fn main() -> strat_lab::Result<()> {
    let cfg = AnalysisConfig::default();
    let cone = simons_cone()?;
    let exact = std::f64::consts::PI.powi(4) / 14.0;
    for r in [1.0, 0.1, 0.01] {
        let d = cone.density(&[0.0; 8], r)?;
        println!("theta_{r} = {:.6}  (pi^4/14 = {exact:.6})", d.value);
    }
    for rho in [1.0, 0.5, 0.25] {
        let x = simons_point(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], rho);
        let s = cone.current_regularity_scale(&x)?;
        println!("rho = {rho:<5} |A| = {:.4}  r_I = {:.5}", cone.shape_norm(&x)?, s.r);
    }
    for p in [2.0, 6.5, 7.0] {
        let lp = cone.lp_a(p, LpIntegrand::ShapeOperator, &cfg)?;
        println!("|A|^{p}: {:?}", lp.verdict);
    }
    Ok(())
}
