//! Cone splitting: a map that is 0-homogeneous at y and at z is close to
//! 1-homogeneous along span{z - y}.

use strat_lab::homogeneity::Homogeneity;
use strat_lab::models::{make_homogeneous, Link};
use strat_lab::{geom, AnalysisConfig};

fn main() -> strat_lab::Result<()> {
    let cfg = AnalysisConfig::default();
    let h = Homogeneity::new(4, &cfg);
    // 2-homogeneous in R^4, so every point of the plane is a cone point
    let f = make_homogeneous(&[0.0; 4], &[geom::unit(4, 2), geom::unit(4, 3)], Link::Identity)?.into_map(2.0);
    let y = [0.0; 4];
    let z = [0.0, 0.0, 0.3, 0.0];
    let rep = h.cone_splitting_check(&f, &y, &z, &[], 0.4, cfg.gamma)?;
    println!("D_0(y)       {:.2e}", rep.d_k_at_y);
    println!("D_0(z, 2r)   {:.2e}", rep.d0_at_z);
    println!("D_1(y, r)    {:.2e}", rep.d_k1_at_y);
    println!("off-plane distance {:.3}", rep.off_plane_distance);
    Ok(())
}
