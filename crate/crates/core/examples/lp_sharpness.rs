//! L^p sweeps of |∇f| and r_f^{-1} for x/|x| in three and four dimensions,
//! showing where the integrals start to diverge.

use strat_lab::regularity::{LpIntegrand, Regularity};
use strat_lab::{models, AnalysisConfig};

fn main() -> strat_lab::Result<()> {
    let cfg = AnalysisConfig::scan();
    for n in [3, 4] {
        let f = models::radial(n)?;
        let g = Regularity::new(n, &cfg);
        for which in [LpIntegrand::Gradient, LpIntegrand::InverseRegularity] {
            let table = g.lp_sharpness_sweep(&f, n - 2, which)?;
            println!("n = {n} {:<20} observed {}", which.name(), table.observed);
            for row in &table.rows {
                println!("    p = {:<4} value {:>10.4}  {:?}", row.p, row.value, row.verdict);
            }
        }
    }
    Ok(())
}
