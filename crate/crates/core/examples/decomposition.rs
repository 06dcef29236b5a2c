//! Ball covers of the 0-stratum of x/|x| across scales, grouped by
//! bad-scale tuple.

use strat_lab::homogeneity::Homogeneity;
use strat_lab::stratification::{
    count_growth_exponent, decompose, effective_stratum, graded_grid, label_tuples,
};
use strat_lab::{models, AnalysisConfig};

fn main() -> strat_lab::Result<()> {
    let cfg = AnalysisConfig::scan();
    let h = Homogeneity::new(3, &cfg);
    let f = models::radial(3)?;
    let grid = graded_grid(3, 3, 4);
    let depth = 4;
    let mut strata = effective_stratum(&h, &f, &grid, 0, cfg.eta, cfg.gamma, depth)?;
    label_tuples(&h, &f, &mut strata, cfg.eps, cfg.t_for(3))?;
    let cover = decompose(&strata, 0, depth)?;
    for s in &cover.scales {
        println!(
            "j = {}  radius {:.4}  classes {}  balls {}  orphans {}",
            s.j, s.radius, s.class_count, s.ball_count, s.orphans
        );
    }
    let counts: Vec<(usize, usize)> = cover.scales.iter().map(|s| (s.j, s.ball_count)).collect();
    if let Ok(e) = count_growth_exponent(&counts, cfg.gamma) {
        println!("count growth exponent {e:.3}");
    }
    Ok(())
}
