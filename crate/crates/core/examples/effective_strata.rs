//! Effective strata S^k_{η,r} of x/|x| on a lattice, and the per-point
//! high/low nonhomogeneity split at one scale.

use strat_lab::homogeneity::{HlLabel, Homogeneity};
use strat_lab::stratification::{effective_strata, lattice_ball};
use strat_lab::{models, AnalysisConfig};

fn main() -> strat_lab::Result<()> {
    let cfg = AnalysisConfig::scan();
    let h = Homogeneity::new(3, &cfg);
    let f = models::radial(3)?;
    let grid = lattice_ball(3, 0.25, 1.0);
    let strata = effective_strata(&h, &f, &grid, &[0, 1, 2], cfg.eta, cfg.gamma, 3)?;
    for k in 0..3 {
        let counts: Vec<usize> = (0..=3).map(|j| strata.stratum(k, j).len()).collect();
        println!("k = {k}: members by scale {counts:?}");
    }
    println!("containment violations: {}", strata.containment_violations());

    let labels = h.classify_hl(&f, &grid, cfg.t_for(3), 0.2, cfg.eps)?;
    let low = labels.iter().filter(|l| **l == HlLabel::Low).count();
    println!("{low} of {} grid points have low nonhomogeneity", grid.len());
    Ok(())
}
