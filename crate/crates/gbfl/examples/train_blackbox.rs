//! Train the built-in reference black-box models on synthetic blob data,
//! then round-trip one through the model file format.
//!
//! ```bash
//! cargo run --release --example train_blackbox
//! ```

use gbfl::blackbox::{load_model, save_model, train_reference_model, MlpConfig};
use gbfl::data::Dataset;
use gbfl::metrics::accuracy;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n_per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((2 * n_per_class, 2));
    let mut labels = Vec::new();
    for i in 0..2 * n_per_class {
        let class = i % 2;
        let center = if class == 0 { 1.5 } else { 6.5 };
        features[[i, 0]] = center + rng.gen_range(-1.2..1.2);
        features[[i, 1]] = center + rng.gen_range(-1.2..1.2);
        labels.push(class);
    }
    Dataset::from_parts(features, labels).unwrap()
}

fn main() -> anyhow::Result<()> {
    let train = blobs(150, 7);

    let logistic = train_reference_model(&MlpConfig::logistic(), &train, 0)?;
    let preds = logistic.predict_batch(train.features().view())?;
    println!(
        "logistic: kind={} layers={:?} train accuracy {:.3}",
        logistic.meta().kind,
        logistic.meta().layer_widths,
        accuracy(&preds, train.labels())?
    );

    let mlp_cfg = MlpConfig {
        hidden_layer_widths: vec![16, 8],
        dropout_rates: vec![0.2, 0.0],
        epochs: 150,
        ..MlpConfig::default()
    };
    let mlp = train_reference_model(&mlp_cfg, &train, 0)?;
    let preds = mlp.predict_batch(train.features().view())?;
    println!(
        "mlp: kind={} layers={:?} train accuracy {:.3}",
        mlp.meta().kind,
        mlp.meta().layer_widths,
        accuracy(&preds, train.labels())?
    );

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("blackbox.bin");
    save_model(&mlp, &path)?;
    let loaded = load_model(&path)?;
    let a = mlp.confidence(train.row(0))?;
    let b = loaded.confidence(train.row(0))?;
    println!(
        "saved + reloaded; confidence on row 0 identical: {}",
        a == b
    );
    Ok(())
}
