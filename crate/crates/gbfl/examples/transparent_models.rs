//! Fit the two transparent learners (height-capped tree, L1 logistic) on
//! clause features, print the ranked rules and the rendered tree.
//!
//! ```bash
//! cargo run --release --example transparent_models
//! ```

use gbfl::blackbox::logistic_from_weights;
use gbfl::clauses::{build_boolean_dataset, format_clause, TargetSource};
use gbfl::data::{BaseValues, Dataset, FeatureBounds};
use gbfl::explainer::{explain_dataset, ExplainerConfig};
use gbfl::grid::{generate_grid, BandwidthRule};
use gbfl::learners::{fit_logistic_l1, fit_tree, top_k_columns, TreeConfig};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let blackbox = logistic_from_weights(array![[0.0, 0.0], [1e6, 0.0]], array![0.0, -5e6])?;
    let bounds = FeatureBounds::new(Array1::zeros(2), Array1::from_elem(2, 10.0))?;
    let base = BaseValues::new(Array1::zeros(2), &bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 300;
    let features = Array2::from_shape_fn((n, 2), |_| rng.gen_range(0.0..10.0));
    let labels = (0..n).map(|i| usize::from(features[[i, 0]] > 5.0)).collect();
    let data = Dataset::from_parts(features, labels)?;

    let set = explain_dataset(&blackbox, &data, &base, &bounds, &ExplainerConfig::default())?;
    let grid = generate_grid(&data, &bounds, 4, BandwidthRule::Silverman)?;
    let bd = build_boolean_dataset(&set.triplets, &grid, &base, 1, &data, TargetSource::Blackbox)?;

    let tree = fit_tree(
        bd.matrix.view(),
        &bd.targets,
        bd.n_classes,
        &TreeConfig { max_height: 3, min_leaf: 1, seed: 0 },
    )?;
    let clause_names: Vec<String> = bd
        .clauses
        .iter()
        .map(|c| format_clause(c, data.feature_names()))
        .collect();
    println!("decision tree (height {}):\n{}", tree.height(), tree.render(&clause_names));

    println!("top tree rules by importance:");
    for (rank, (col, importance)) in
        top_k_columns(&tree.gini_importances(), &tree.used_columns(), 4)
            .into_iter()
            .enumerate()
    {
        println!("GBFL rank {} feature (importance {importance:.3})", rank + 1);
        println!("{}\n", clause_names[col]);
    }

    let logistic = fit_logistic_l1(bd.matrix.view(), &bd.targets, bd.n_classes, 0.01, 300, 0.5, 0)?;
    println!("L1 logistic: top clauses by |weight|:");
    for (rank, (col, importance)) in
        top_k_columns(&logistic.importances(), &logistic.used_columns(), 3)
            .into_iter()
            .enumerate()
    {
        println!("  rank {}: |w| = {importance:.3}  {}", rank + 1, clause_names[col]);
    }
    Ok(())
}
