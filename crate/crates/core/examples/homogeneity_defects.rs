//! Homogeneity defects D_k for a radial map, a map that is homogeneous
//! about a line, and a smoothly perturbed radial map.

use strat_lab::geom;
use strat_lab::homogeneity::Homogeneity;
use strat_lab::models::{self, make_homogeneous, Link};
use strat_lab::AnalysisConfig;

fn main() -> strat_lab::Result<()> {
    let cfg = AnalysisConfig::default();
    let h = Homogeneity::new(3, &cfg);
    let line = make_homogeneous(&[0.0; 3], &[geom::unit(3, 2)], Link::Identity)?.into_map(2.0);
    let maps = [
        models::radial(3)?,
        line,
        models::perturbed(models::radial(3)?, 0.05, 7),
    ];
    for f in &maps {
        print!("{:<32}", f.id());
        for k in 0..3 {
            let d = h.homogeneity_defect(f, &[0.0; 3], 0.5, k)?;
            print!(" D_{k} = {:.2e}", d.defect);
        }
        println!();
    }
    Ok(())
}
