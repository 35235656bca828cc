//! Wrap an external process as the black box. The child reads CSV feature
//! rows on stdin and answers one CSV probability row per input on stdout;
//! here the child is a small Python script implementing a logistic model.
//!
//! ```bash
//! cargo run --release --example external_blackbox
//! ```

use gbfl::blackbox::external_model;
use ndarray::array;
use std::io::Write;

const PY_MODEL: &str = r#"
import math, sys
for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    x = [float(v) for v in line.split(",")]
    score = 1.2 * x[0] - 0.7 * x[1] - 1.0
    p1 = 1.0 / (1.0 + math.exp(-score))
    print(f"{1.0 - p1:.17g},{p1:.17g}", flush=True)
"#;

fn main() -> anyhow::Result<()> {
    let exists = std::process::Command::new("python3")
        .arg("--version")
        .output()
        .is_ok();
    if !exists {
        println!("python3 not available; skipping the external adapter demo");
        return Ok(());
    }
    let mut script = tempfile::NamedTempFile::new()?;
    script.write_all(PY_MODEL.as_bytes())?;
    script.flush()?;

    let model = external_model(
        "python3",
        &[script.path().display().to_string()],
        2,
        2,
    )?;
    println!("external model: kind={} d={} K={}", model.meta().kind, model.n_features(), model.n_classes());

    let batch = array![[3.0, 1.0], [0.2, 2.5], [1.0, 0.0]];
    let probs = model.confidence_batch(batch.view())?;
    for (i, row) in probs.rows().into_iter().enumerate() {
        println!(
            "x = {:?} -> confidence [{:.4}, {:.4}] -> class {}",
            batch.row(i).to_vec(),
            row[0],
            row[1],
            model.predict(batch.row(i))?
        );
    }
    Ok(())
}
