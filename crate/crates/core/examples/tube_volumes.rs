//! Monte Carlo tube volumes and Minkowski slopes for a point, a segment and
//! a sampled disk.

use strat_lab::stratification::{minkowski_fit, segment_points, tube_volume_ladder};

fn main() -> strat_lab::Result<()> {
    let radii: Vec<f64> = (4..=7).map(|i| 0.5f64.powi(i)).collect();
    // fine enough that the smallest tube does not see the spacing
    let m = 160;
    let disk: Vec<Vec<f64>> = (0..m)
        .flat_map(|i| (0..m).map(move |j| vec![i as f64 / m as f64 - 0.5, j as f64 / m as f64 - 0.5, 0.0]))
        .collect();
    let sets = [
        ("point", vec![vec![0.0; 3]]),
        ("segment", segment_points(&[-0.5, 0.0, 0.0], &[0.5, 0.0, 0.0], 2000)),
        ("disk", disk),
    ];
    for (name, set) in &sets {
        let ladder = tube_volume_ladder(set, 3, &radii, 20_000, 1);
        let fit = minkowski_fit(&ladder)?;
        println!("{name:<8} slope {:.3}  (3 - slope = {:.3})", fit.slope, 3.0 - fit.slope);
    }
    Ok(())
}
