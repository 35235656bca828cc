//! Turn explanation triplets into grid-rounded boolean clauses and show the
//! effect of the skip parameter on the clause intervals.
//!
//! ```bash
//! cargo run --release --example boolean_clauses
//! ```

use gbfl::blackbox::logistic_from_weights;
use gbfl::clauses::{build_boolean_dataset, evaluate_clause, format_clause, TargetSource};
use gbfl::data::{BaseValues, Dataset, FeatureBounds};
use gbfl::explainer::{explain_dataset, ExplainerConfig};
use gbfl::grid::{generate_grid, BandwidthRule};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    // Class 1 iff x0 > 5 (steep logistic, effectively a threshold rule).
    let blackbox = logistic_from_weights(array![[0.0, 0.0], [1e6, 0.0]], array![0.0, -5e6])?;
    let bounds = FeatureBounds::new(Array1::zeros(2), Array1::from_elem(2, 10.0))?;
    let base = BaseValues::new(Array1::zeros(2), &bounds)?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 200;
    let features = Array2::from_shape_fn((n, 2), |_| rng.gen_range(0.0..10.0));
    let labels = (0..n).map(|i| usize::from(features[[i, 0]] > 5.0)).collect();
    let data = Dataset::from_parts(features, labels)?;

    let set = explain_dataset(&blackbox, &data, &base, &bounds, &ExplainerConfig::default())?;
    let grid = generate_grid(&data, &bounds, 4, BandwidthRule::Silverman)?;

    for delta in [0usize, 1, 2] {
        let bd = build_boolean_dataset(
            &set.triplets,
            &grid,
            &base,
            delta,
            &data,
            TargetSource::Blackbox,
        )?;
        println!(
            "delta = {}: {} distinct clauses over {} samples",
            delta,
            bd.clauses.len(),
            bd.n_samples()
        );
        for clause in bd.clauses.iter().take(3) {
            let support: usize = clause
                .provenance
                .iter()
                .map(|&i| evaluate_clause(clause, data.row(i)).unwrap() as usize)
                .sum();
            println!(
                "  [{}] {} (from {} samples, all self-satisfied: {})",
                clause.id,
                format_clause(clause, data.feature_names()),
                clause.provenance.len(),
                support == clause.provenance.len()
            );
        }
    }
    Ok(())
}
