//! Build an equal-probability grid for a skewed feature and check how
//! evenly the data falls into the resulting intervals.
//!
//! ```bash
//! cargo run --release --example kde_grid
//! ```

use gbfl::data::{derive_bounds, Dataset};
use gbfl::grid::{generate_grid, BandwidthRule};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 4000;
    // Column 0: uniform; column 1: right-skewed (squared uniform).
    let features = Array2::from_shape_fn((n, 2), |(_, j)| {
        let u: f64 = rng.gen_range(0.0..1.0);
        if j == 0 {
            u * 10.0
        } else {
            u * u * 10.0
        }
    });
    let data = Dataset::from_parts(features, (0..n).map(|i| i % 2).collect())?;
    let bounds = derive_bounds(&data);
    let n_intervals = 5;
    let grid = generate_grid(&data, &bounds, n_intervals, BandwidthRule::Silverman)?;

    for j in 0..2 {
        let col = grid.column(j);
        println!(
            "feature {j} (bandwidth {:.3}): grid points {:?}",
            grid.bandwidths()[j],
            col.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
        let mut counts = vec![0usize; n_intervals];
        for &v in data.features().column(j).iter() {
            let mut bin = n_intervals - 1;
            for s in 0..n_intervals {
                if v < col[s + 1] {
                    bin = s;
                    break;
                }
            }
            counts[bin] += 1;
        }
        let fracs: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64 / n as f64 * 1000.0).round() / 1000.0)
            .collect();
        println!("  interval occupancy {fracs:?} (target {:.3})", 1.0 / n_intervals as f64);
    }
    Ok(())
}
