//! Comparison training schemes sharing the transparent learners: a tree on
//! the original data, a tree distilled from black-box predictions, and a
//! tree on the data augmented with the contrast points.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBoxModel;
use crate::data::Dataset;
use crate::error::{GbflError, Result};
use crate::explainer::ExplanationTriplet;
use crate::learners::{fit_tree_raw, TransparentModel, TreeConfig};

/// Labels used for the original rows in the augmented scheme. Contrast
/// points always carry black-box labels (a PN must carry the flipped class
/// to convey the boundary).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOriginalLabels {
    #[default]
    True,
    Blackbox,
}

/// Tree on the original features and true labels.
pub fn train_standard(train: &Dataset, config: &TreeConfig) -> Result<TransparentModel> {
    let tree = fit_tree_raw(
        train.features().view(),
        train.labels(),
        train.n_classes(),
        config,
    )?;
    Ok(TransparentModel::RawTree { tree })
}

/// Tree on the original features with labels replaced by the black box's
/// hard predictions.
pub fn train_distilled(
    train: &Dataset,
    model: &BlackBoxModel,
    config: &TreeConfig,
) -> Result<TransparentModel> {
    let labels = model.predict_batch(train.features().view())?;
    let tree = fit_tree_raw(
        train.features().view(),
        &labels,
        train.n_classes(),
        config,
    )?;
    Ok(TransparentModel::RawTree { tree })
}

/// Tree on the original rows plus one row per pertinent positive and per
/// pertinent negative, labeled by the black box on the contrast point.
pub fn train_augmented(
    train: &Dataset,
    triplets: &[ExplanationTriplet],
    config: &TreeConfig,
    original_labels: AugmentOriginalLabels,
) -> Result<TransparentModel> {
    if triplets.len() != train.n_samples() {
        return Err(GbflError::DimensionMismatch {
            expected: train.n_samples(),
            got: triplets.len(),
        });
    }
    let d = train.n_features();
    let n_pn = triplets.iter().filter(|t| t.pn.is_some()).count();
    let total = train.n_samples() + triplets.len() + n_pn;
    let mut features = Array2::zeros((total, d));
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for i in 0..train.n_samples() {
        features.row_mut(row).assign(&train.row(i));
        labels.push(match original_labels {
            AugmentOriginalLabels::True => train.labels()[i],
            AugmentOriginalLabels::Blackbox => triplets[i].y_blackbox,
        });
        row += 1;
    }
    for t in triplets {
        features.row_mut(row).assign(&t.pp);
        labels.push(t.y_blackbox); // black box on a PP equals its view of x
        row += 1;
    }
    for t in triplets {
        if let (Some(pn), Some(pn_class)) = (&t.pn, t.pn_class) {
            features.row_mut(row).assign(pn);
            labels.push(pn_class);
            row += 1;
        }
    }
    let tree = fit_tree_raw(features.view(), &labels, train.n_classes(), config)?;
    Ok(TransparentModel::RawTree { tree })
}
