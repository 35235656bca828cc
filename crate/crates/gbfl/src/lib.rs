//! Globally transparent proxy models from sparse local contrastive
//! explanations of a black-box classifier.
//!
//! Given only confidence-score access to a classifier, this crate finds a
//! pertinent positive (a perturbation toward per-feature base values that
//! keeps the predicted class) and, where possible, a pertinent negative (a
//! perturbation away from the base values that flips it) for every sample.
//! Each (sample, PP, PN) triplet is rounded onto an equal-probability grid
//! and becomes one sparse boolean conjunction; a small decision tree or an
//! L1 logistic model trained on those clause features yields a transparent
//! proxy whose agreement with the black box is scored by a local
//! consistency metric that checks the sample, its PP and its PN together.
//!
//! The pipeline compares that proxy against three baselines (training on
//! the raw data, on distilled black-box labels, and on the data augmented
//! with the contrast points) and reports consistency and accuracy per
//! method.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release --example train_blackbox
//! cargo run --release --example explain_samples
//! cargo run --release --example kde_grid
//! cargo run --release --example boolean_clauses
//! cargo run --release --example transparent_models
//! cargo run --release --example consistency_metrics
//! cargo run --release --example external_blackbox
//! cargo run --release --example full_pipeline
//! ```
//!
//! or with the bundled CLI (`gbfl run --config <json>`; see the README for
//! the stage-by-stage subcommands).

pub mod baselines;
pub mod blackbox;
pub mod clauses;
pub mod cli;
pub mod data;
pub mod error;
pub mod explainer;
pub mod grid;
pub mod learners;
pub mod metrics;
pub mod pipeline;
pub mod report;

pub use error::{GbflError, Result};
