//! Local consistency metrics and accuracy.
//!
//! The per-sample loss is zero exactly when the transparent model agrees
//! with the black box on the sample itself, agrees on the pertinent
//! positive, and disagrees on the pertinent negative. Samples without a
//! pertinent negative skip that condition, which reduces to the whole-
//! dataset skip when no sample has one.

use serde::{Deserialize, Serialize};

use crate::error::{GbflError, Result};

/// Predictions needed to score one evaluation set, row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    /// Black-box prediction on each sample.
    pub blackbox_on_x: Vec<usize>,
    /// Transparent prediction on each sample.
    pub transparent_on_x: Vec<usize>,
    /// Transparent prediction on each sample's pertinent positive.
    pub transparent_on_pp: Vec<usize>,
    /// Transparent prediction on each pertinent negative, when present.
    pub transparent_on_pn: Vec<Option<usize>>,
}

/// Per-sample local consistency loss: 0 iff all conditions hold.
pub fn lambda_tb(
    blackbox_on_x: usize,
    transparent_on_x: usize,
    transparent_on_pp: usize,
    transparent_on_pn: Option<usize>,
) -> u8 {
    let matches_sample = blackbox_on_x == transparent_on_x;
    let matches_pp = blackbox_on_x == transparent_on_pp;
    let differs_on_pn = match transparent_on_pn {
        Some(pn_pred) => blackbox_on_x != pn_pred,
        None => true, // no PN: the condition is skipped
    };
    u8::from(!(matches_sample && matches_pp && differs_on_pn))
}

/// Consistency scores over an evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// 1 - mean per-sample loss.
    pub c_tb: f64,
    /// Fraction of samples where the transparent model matches the black
    /// box on the pertinent positive.
    pub c_tb_pp: f64,
    /// Fraction of PN-bearing samples where the transparent model flips on
    /// the pertinent negative; absent when no sample has one.
    pub c_tb_pn: Option<f64>,
    pub n_samples: usize,
    pub n_with_pn: usize,
    /// Per-sample losses for audit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_sample_loss: Option<Vec<u8>>,
}

/// Compute the consistency metrics from a prediction table.
pub fn consistency(table: &PredictionTable) -> Result<ConsistencyReport> {
    let n = table.blackbox_on_x.len();
    if table.transparent_on_x.len() != n
        || table.transparent_on_pp.len() != n
        || table.transparent_on_pn.len() != n
    {
        return Err(GbflError::DimensionMismatch {
            expected: n,
            got: table.transparent_on_x.len(),
        });
    }
    if n == 0 {
        return Err(GbflError::EmptyDataset("consistency over empty set".into()));
    }
    let mut losses = Vec::with_capacity(n);
    let mut pp_hits = 0usize;
    let mut pn_hits = 0usize;
    let mut n_with_pn = 0usize;
    for i in 0..n {
        losses.push(lambda_tb(
            table.blackbox_on_x[i],
            table.transparent_on_x[i],
            table.transparent_on_pp[i],
            table.transparent_on_pn[i],
        ));
        if table.transparent_on_pp[i] == table.blackbox_on_x[i] {
            pp_hits += 1;
        }
        if let Some(pn_pred) = table.transparent_on_pn[i] {
            n_with_pn += 1;
            if pn_pred != table.blackbox_on_x[i] {
                pn_hits += 1;
            }
        }
    }
    let loss_sum: usize = losses.iter().map(|&l| l as usize).sum();
    Ok(ConsistencyReport {
        c_tb: 1.0 - loss_sum as f64 / n as f64,
        c_tb_pp: pp_hits as f64 / n as f64,
        c_tb_pn: if n_with_pn == 0 {
            None
        } else {
            Some(pn_hits as f64 / n_with_pn as f64)
        },
        n_samples: n,
        n_with_pn,
        per_sample_loss: Some(losses),
    })
}

/// Mean equality indicator.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(GbflError::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(GbflError::EmptyDataset("accuracy over empty set".into()));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}
