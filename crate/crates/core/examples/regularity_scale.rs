//! Regularity scale r_f along a ray toward the singularity of x/|x|, and
//! the bad set {r_f ≤ r} on a lattice.

use strat_lab::regularity::Regularity;
use strat_lab::stratification::lattice_ball;
use strat_lab::{models, AnalysisConfig};

fn main() -> strat_lab::Result<()> {
    let cfg = AnalysisConfig::default();
    let g = Regularity::new(3, &cfg);
    let f = models::radial(3)?;
    for d in [0.8, 0.4, 0.2, 0.1, 0.05] {
        let s = g.regularity_scale(&f, &[d, 0.0, 0.0])?;
        println!("|x| = {d:<5} r_f = {:.5}  r_f/|x| = {:.4}", s.r, s.r / d);
    }
    let grid = lattice_ball(3, 0.125, 1.0);
    for r in [0.2, 0.1, 0.05] {
        let bad = g.bad_set(&f, &grid, r)?;
        println!("bad set at r = {r}: {} of {} points", bad.len(), grid.len());
    }
    Ok(())
}
