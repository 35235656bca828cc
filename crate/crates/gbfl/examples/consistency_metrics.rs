//! The local consistency metric on a toy prediction table: the per-sample
//! loss is zero only when the transparent model matches the black box on
//! the sample and its pertinent positive, and flips on its pertinent
//! negative.
//!
//! ```bash
//! cargo run --release --example consistency_metrics
//! ```

use gbfl::metrics::{accuracy, consistency, lambda_tb, PredictionTable};

fn main() -> anyhow::Result<()> {
    println!("per-sample loss cases:");
    println!("  all three conditions hold      -> {}", lambda_tb(1, 1, 1, Some(0)));
    println!("  PN condition fails             -> {}", lambda_tb(1, 1, 1, Some(1)));
    println!("  no PN, other conditions hold   -> {}", lambda_tb(1, 1, 1, None));
    println!("  sample prediction disagrees    -> {}", lambda_tb(1, 0, 1, Some(0)));

    let table = PredictionTable {
        blackbox_on_x: vec![0, 0, 1, 1, 1, 0],
        transparent_on_x: vec![0, 0, 1, 1, 0, 0],
        transparent_on_pp: vec![0, 1, 1, 1, 1, 0],
        transparent_on_pn: vec![Some(1), Some(0), Some(0), None, Some(0), Some(0)],
    };
    let report = consistency(&table)?;
    println!("\nover {} samples ({} with a PN):", report.n_samples, report.n_with_pn);
    println!("  C_TB    = {:.4}", report.c_tb);
    println!("  C_TB^PP = {:.4}", report.c_tb_pp);
    println!(
        "  C_TB^PN = {}",
        report
            .c_tb_pn
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "NA".into())
    );
    println!("  per-sample losses: {:?}", report.per_sample_loss.unwrap());

    let acc = accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0])?;
    println!("\naccuracy on a 4-sample toy set: {acc:.2}");
    Ok(())
}
