//! Compute pertinent positives and negatives for a handful of samples
//! against a threshold-style black box, and show the re-query checks.
//!
//! ```bash
//! cargo run --release --example explain_samples
//! ```

use gbfl::blackbox::logistic_from_weights;
use gbfl::data::{BaseValues, Dataset, FeatureBounds};
use gbfl::explainer::{explain_dataset, ExplainerConfig};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    // Class 1 iff 0.9*x0 + 0.4*x1 > 5.5 (a smooth-ish linear model).
    let blackbox = logistic_from_weights(array![[0.0, 0.0], [4.5, 2.0]], array![0.0, -27.5])?;
    let bounds = FeatureBounds::new(Array1::zeros(2), Array1::from_elem(2, 10.0))?;
    let base = BaseValues::new(Array1::zeros(2), &bounds)?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let features = Array2::from_shape_fn((8, 2), |_| rng.gen_range(0.0..10.0));
    let labels = (0..8)
        .map(|i| usize::from(0.9 * features[[i, 0]] + 0.4 * features[[i, 1]] > 5.5))
        .collect();
    let data = Dataset::from_parts(features, labels)?;

    let set = explain_dataset(&blackbox, &data, &base, &bounds, &ExplainerConfig::default())?;
    println!(
        "PN coverage {:.2}, mean PP sparsity {:.2}\n",
        set.stats.pn_coverage, set.stats.mean_pp_sparsity
    );
    for t in &set.triplets {
        println!(
            "sample {}  x = [{:.2}, {:.2}]  class {}",
            t.sample_index, t.x[0], t.x[1], t.y_blackbox
        );
        println!(
            "  PP = [{:.2}, {:.2}]  (still class {}, {} coords off base)",
            t.pp[0],
            t.pp[1],
            blackbox.predict(t.pp.view())?,
            t.pp_sparsity
        );
        match &t.pn {
            Some(pn) => println!(
                "  PN = [{:.2}, {:.2}]  (flips to class {})",
                pn[0],
                pn[1],
                blackbox.predict(pn.view())?
            ),
            None => println!("  PN = none (no label-flipping perturbation found)"),
        }
    }
    Ok(())
}
