//! End-to-end orchestration: per seed, split the data, train the reference
//! black box, explain every sample, cross-validate the gridding and clause
//! parameters, train the clause-based transparent model and the three
//! baselines, and score everything on the held-out split.

use std::path::{Path, PathBuf};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{
    train_augmented, train_distilled, train_standard, AugmentOriginalLabels,
};
use crate::blackbox::{load_model, save_model, train_reference_model, BlackBoxModel, MlpConfig};
use crate::clauses::{build_boolean_dataset, TargetSource};
use crate::data::{
    derive_base_values, derive_bounds, load_csv, split, stratified_folds, BaseValueStrategy,
    BaseValues, Dataset, FeatureBounds,
};
use crate::error::{GbflError, Result};
use crate::explainer::{
    explain_dataset, save_explanations, ExplainerConfig, ExplanationSet, ExplanationTriplet,
};
use crate::grid::{generate_grid, save_grid, BandwidthRule, GridMatrix};
use crate::learners::{
    fit_logistic_l1, fit_tree, save_transparent_model, TransparentModel, TreeConfig,
};
use crate::metrics::{accuracy, consistency, ConsistencyReport, PredictionTable};
use crate::report::{MethodReport, RunReport, SeedReport, TopRule};

/// Which transparent learner consumes the clause features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    #[default]
    Tree,
    Logistic,
}

/// Which split the metrics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    #[default]
    Test,
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticLearnerConfig {
    #[serde(default = "default_logistic_l1")]
    pub l1: f64,
    #[serde(default = "default_logistic_epochs")]
    pub epochs: usize,
    #[serde(default = "default_logistic_lr")]
    pub learning_rate: f64,
}

fn default_logistic_l1() -> f64 {
    0.01
}
fn default_logistic_epochs() -> usize {
    200
}
fn default_logistic_lr() -> f64 {
    0.5
}

impl Default for LogisticLearnerConfig {
    fn default() -> Self {
        LogisticLearnerConfig {
            l1: default_logistic_l1(),
            epochs: default_logistic_epochs(),
            learning_rate: default_logistic_lr(),
        }
    }
}

/// Full pipeline configuration. Unknown JSON keys are rejected so
/// hyperparameter typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub data_path: String,
    pub label_column: String,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_base_values")]
    pub base_values: BaseValueStrategy,
    /// Grid point counts (N+1 values) to search.
    #[serde(default = "default_grid_counts")]
    pub grid_counts: Vec<usize>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<usize>,
    #[serde(default = "default_height_cap")]
    pub height_cap: usize,
    /// Tree heights to search; defaults to `1..=height_cap`.
    #[serde(default)]
    pub heights: Option<Vec<usize>>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    #[serde(default)]
    pub learner: LearnerKind,
    #[serde(default)]
    pub targets: TargetSource,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub eval_split: EvalSplit,
    #[serde(default)]
    pub augment_original_labels: AugmentOriginalLabels,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub explainer: ExplainerConfig,
    #[serde(default)]
    pub blackbox: MlpConfig,
    #[serde(default)]
    pub logistic_learner: LogisticLearnerConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_schema_version() -> u32 {
    1
}
fn default_test_fraction() -> f64 {
    0.25
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn default_base_values() -> BaseValueStrategy {
    BaseValueStrategy::Median
}
fn default_grid_counts() -> Vec<usize> {
    // Coarse-to-fine sweep; even interval counts put a grid point at the
    // median of the smoothed distribution.
    vec![5, 9, 21]
}
fn default_deltas() -> Vec<usize> {
    vec![0, 1, 2]
}
fn default_height_cap() -> usize {
    5
}
fn default_min_leaf() -> usize {
    1
}
fn default_cv_folds() -> usize {
    10
}
fn default_top_k() -> usize {
    5
}
fn default_output_dir() -> String {
    "out".into()
}

impl PipelineConfig {
    /// Minimal config for a dataset path; everything else defaulted.
    pub fn for_data(data_path: impl Into<String>, label_column: impl Into<String>) -> Self {
        let json = format!(
            r#"{{"data_path": {}, "label_column": {}}}"#,
            serde_json::to_string(&data_path.into()).unwrap(),
            serde_json::to_string(&label_column.into()).unwrap()
        );
        serde_json::from_str(&json).expect("default config parses")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path_str = path.as_ref().display().to_string();
        let bytes = std::fs::read(path.as_ref()).map_err(|e| GbflError::io(path_str, e))?;
        let cfg: PipelineConfig = serde_json::from_slice(&bytes)
            .map_err(|e| GbflError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(GbflError::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(GbflError::Config("test_fraction must be in (0,1)".into()));
        }
        if self.seeds.is_empty() {
            return Err(GbflError::Config("need at least one seed".into()));
        }
        if self.grid_counts.is_empty() || self.grid_counts.iter().any(|&g| g < 2) {
            return Err(GbflError::Config(
                "grid_counts must be non-empty with every entry >= 2".into(),
            ));
        }
        if self.deltas.is_empty() {
            return Err(GbflError::Config("deltas must be non-empty".into()));
        }
        if let Some(heights) = &self.heights {
            if heights.is_empty() || heights.iter().any(|&h| h > self.height_cap) {
                return Err(GbflError::Config(format!(
                    "heights must be non-empty and within the cap {}",
                    self.height_cap
                )));
            }
        }
        if self.cv_folds < 2 {
            return Err(GbflError::Config("cv_folds must be >= 2".into()));
        }
        if self.min_leaf == 0 {
            return Err(GbflError::Config("min_leaf must be >= 1".into()));
        }
        if self.top_k == 0 {
            return Err(GbflError::Config("top_k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn heights_to_search(&self) -> Vec<usize> {
        match &self.heights {
            Some(h) => h.clone(),
            None => (1..=self.height_cap.max(1)).collect(),
        }
    }

    /// Stable hash of the config for provenance.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hasher
            .finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Hyperparameters chosen by cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChosenParams {
    /// Number of grid points (N+1).
    pub grid_points: usize,
    pub delta: usize,
    pub height: usize,
}

/// Re-index a triplet subset so row `r` of the subset carries sample_index
/// `r` (positional alignment for the boolean dataset).
fn subset_triplets(triplets: &[ExplanationTriplet], indices: &[usize]) -> Vec<ExplanationTriplet> {
    indices
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            let mut t = triplets[i].clone();
            t.sample_index = r;
            t
        })
        .collect()
}

fn fit_clause_learner(
    bd: &crate::clauses::BooleanDataset,
    learner: LearnerKind,
    height: usize,
    min_leaf: usize,
    logistic_cfg: &LogisticLearnerConfig,
    seed: u64,
) -> Result<TransparentModel> {
    match learner {
        LearnerKind::Tree => {
            let tree = fit_tree(
                bd.matrix.view(),
                &bd.targets,
                bd.n_classes,
                &TreeConfig {
                    max_height: height,
                    min_leaf,
                    seed,
                },
            )?;
            Ok(TransparentModel::ClauseTree {
                tree,
                clauses: bd.clauses.clone(),
            })
        }
        LearnerKind::Logistic => {
            let model = fit_logistic_l1(
                bd.matrix.view(),
                &bd.targets,
                bd.n_classes,
                logistic_cfg.l1,
                logistic_cfg.epochs,
                logistic_cfg.learning_rate,
                seed,
            )?;
            Ok(TransparentModel::ClauseLogistic {
                model,
                clauses: bd.clauses.clone(),
            })
        }
    }
}

/// Score a transparent model against the black box on an evaluation set.
pub fn evaluate_model(
    model: &TransparentModel,
    eval: &Dataset,
    eval_triplets: &[ExplanationTriplet],
) -> Result<(ConsistencyReport, f64)> {
    let transparent_on_x = model.predict_raw_batch(eval.features().view())?;
    let mut transparent_on_pp = Vec::with_capacity(eval_triplets.len());
    let mut transparent_on_pn = Vec::with_capacity(eval_triplets.len());
    for t in eval_triplets {
        transparent_on_pp.push(model.predict_raw(t.pp.view())?);
        transparent_on_pn.push(match &t.pn {
            Some(pn) => Some(model.predict_raw(pn.view())?),
            None => None,
        });
    }
    let table = PredictionTable {
        blackbox_on_x: eval_triplets.iter().map(|t| t.y_blackbox).collect(),
        transparent_on_x: transparent_on_x.clone(),
        transparent_on_pp,
        transparent_on_pn,
    };
    let report = consistency(&table)?;
    let acc = accuracy(&transparent_on_x, eval.labels())?;
    Ok((report, acc))
}

/// Mean validation consistency of a candidate over prepared folds.
struct FoldData {
    train: Dataset,
    train_triplets: Vec<ExplanationTriplet>,
    val: Dataset,
    val_triplets: Vec<ExplanationTriplet>,
}

fn prepare_folds(
    train: &Dataset,
    triplets: &[ExplanationTriplet],
    folds: usize,
    seed: u64,
) -> Result<Vec<FoldData>> {
    let assignment = stratified_folds(train, folds, seed)?;
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let val_idx = &assignment[f];
        let train_idx: Vec<usize> = (0..folds)
            .filter(|&g| g != f)
            .flat_map(|g| assignment[g].iter().copied())
            .collect();
        let mut train_idx = train_idx;
        train_idx.sort_unstable();
        out.push(FoldData {
            train: train.subset(&train_idx)?,
            train_triplets: subset_triplets(triplets, &train_idx),
            val: train.subset(val_idx)?,
            val_triplets: subset_triplets(triplets, val_idx),
        });
    }
    Ok(out)
}

/// Exhaustive cross-validation over the Cartesian product of grid counts,
/// skip deltas and tree heights. The objective is mean validation
/// consistency; ties fall to validation accuracy, then smaller delta,
/// smaller grid, smaller height. Explanations are computed once on the full
/// training set and folds reuse the per-sample triplets.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    train: &Dataset,
    triplets: &[ExplanationTriplet],
    base: &BaseValues,
    bounds: &FeatureBounds,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<ChosenParams> {
    let heights = cfg.heights_to_search();
    if cfg.grid_counts.len() == 1 && cfg.deltas.len() == 1 && heights.len() == 1 {
        // Singleton search space: nothing to validate.
        return Ok(ChosenParams {
            grid_points: cfg.grid_counts[0],
            delta: cfg.deltas[0],
            height: heights[0],
        });
    }
    let folds = prepare_folds(train, triplets, cfg.cv_folds, seed)?;

    // score[(g, d, h)] accumulated over folds; infeasible combos drop out.
    let mut totals: Vec<(ChosenParams, f64, f64, bool)> = Vec::new();
    for &grid_points in &cfg.grid_counts {
        for &delta in &cfg.deltas {
            for &height in &heights {
                totals.push((
                    ChosenParams {
                        grid_points,
                        delta,
                        height,
                    },
                    0.0,
                    0.0,
                    true,
                ));
            }
        }
    }

    for fold in &folds {
        for &grid_points in &cfg.grid_counts {
            let grid = generate_grid(
                &fold.train,
                bounds,
                grid_points - 1,
                BandwidthRule::Silverman,
            )?;
            for &delta in &cfg.deltas {
                let bd = match build_boolean_dataset(
                    &fold.train_triplets,
                    &grid,
                    base,
                    delta,
                    &fold.train,
                    cfg.targets,
                ) {
                    Ok(bd) => bd,
                    Err(GbflError::NoClauses) => {
                        for entry in totals.iter_mut().filter(|(p, ..)| {
                            p.grid_points == grid_points && p.delta == delta
                        }) {
                            entry.3 = false;
                        }
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                for &height in &heights {
                    let model = fit_clause_learner(
                        &bd,
                        cfg.learner,
                        height,
                        cfg.min_leaf,
                        &cfg.logistic_learner,
                        seed,
                    )?;
                    let (report, acc) = evaluate_model(&model, &fold.val, &fold.val_triplets)?;
                    let entry = totals
                        .iter_mut()
                        .find(|(p, ..)| {
                            p.grid_points == grid_points && p.delta == delta && p.height == height
                        })
                        .expect("combo present");
                    entry.1 += report.c_tb;
                    entry.2 += acc;
                }
            }
        }
    }

    let n_folds = folds.len() as f64;
    let mut best: Option<(ChosenParams, f64, f64)> = None;
    for (params, c_tb_sum, acc_sum, feasible) in totals {
        if !feasible {
            continue;
        }
        let candidate = (params, c_tb_sum / n_folds, acc_sum / n_folds);
        let replace = match &best {
            None => true,
            Some((bp, bc, ba)) => {
                (candidate.1, candidate.2, std::cmp::Reverse(params.delta),
                 std::cmp::Reverse(params.grid_points), std::cmp::Reverse(params.height))
                    .partial_cmp(&(
                        *bc,
                        *ba,
                        std::cmp::Reverse(bp.delta),
                        std::cmp::Reverse(bp.grid_points),
                        std::cmp::Reverse(bp.height),
                    ))
                    .map(|o| o == std::cmp::Ordering::Greater)
                    .unwrap_or(false)
            }
        };
        if replace {
            best = Some(candidate);
        }
    }
    best.map(|(p, _, _)| p).ok_or_else(|| {
        GbflError::Stage {
            stage: "cross_validate".into(),
            seed,
            message: "no feasible (grid, delta) combination produced clauses".into(),
        }
    })
}

/// Cross-validate a baseline's tree height by mean validation consistency
/// (same folds and objective as the clause learner).
fn cv_baseline_height<F>(
    folds: &[FoldData],
    heights: &[usize],
    mut fit: F,
) -> Result<usize>
where
    F: FnMut(&Dataset, &[ExplanationTriplet], usize) -> Result<TransparentModel>,
{
    if heights.len() == 1 {
        return Ok(heights[0]);
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for &height in heights {
        let mut c_sum = 0.0;
        let mut a_sum = 0.0;
        for fold in folds {
            let model = fit(&fold.train, &fold.train_triplets, height)?;
            let (report, acc) = evaluate_model(&model, &fold.val, &fold.val_triplets)?;
            c_sum += report.c_tb;
            a_sum += acc;
        }
        let replace = match &best {
            None => true,
            Some((bh, bc, ba)) => {
                (c_sum, a_sum, std::cmp::Reverse(height))
                    > (*bc, *ba, std::cmp::Reverse(*bh))
            }
        };
        if replace {
            best = Some((height, c_sum, a_sum));
        }
    }
    Ok(best.expect("heights non-empty").0)
}

/// Everything produced for one seed.
pub struct SeedRun {
    pub seed: u64,
    pub chosen: ChosenParams,
    pub baseline_heights: [usize; 3],
    pub blackbox: BlackBoxModel,
    pub grid: GridMatrix,
    pub gbfl: TransparentModel,
    pub standard: TransparentModel,
    pub distilled: TransparentModel,
    pub augmented: TransparentModel,
    pub train_explanations: ExplanationSet,
    pub test_explanations: ExplanationSet,
    pub report: SeedReport,
}

fn stage_err(stage: &str, seed: u64) -> impl FnOnce(GbflError) -> GbflError + '_ {
    move |e| GbflError::Stage {
        stage: stage.to_string(),
        seed,
        message: e.to_string(),
    }
}

/// Run the full pipeline for one seed on a pre-loaded dataset. Bounds and
/// base values are dataset-level constants derived once by the caller.
/// `fixed_blackbox` skips reference-model training in favor of a caller-
/// provided pre-trained model.
pub fn run_seed(
    cfg: &PipelineConfig,
    data: &Dataset,
    bounds: &FeatureBounds,
    base: &BaseValues,
    seed: u64,
    fixed_blackbox: Option<&BlackBoxModel>,
) -> Result<SeedRun> {
    let (train, test) = split(data, cfg.test_fraction, seed).map_err(stage_err("split", seed))?;

    let blackbox = match fixed_blackbox {
        Some(model) => model.try_clone().map_err(stage_err("train_blackbox", seed))?,
        None => {
            let mut bb_cfg = cfg.blackbox.clone();
            bb_cfg.seed = seed;
            train_reference_model(&bb_cfg, &train, seed)
                .map_err(stage_err("train_blackbox", seed))?
        }
    };

    let mut expl_cfg = cfg.explainer.clone();
    expl_cfg.seed = seed;
    let train_explanations = explain_dataset(&blackbox, &train, base, bounds, &expl_cfg)
        .map_err(stage_err("explain_train", seed))?;
    let test_explanations = explain_dataset(&blackbox, &test, base, bounds, &expl_cfg)
        .map_err(stage_err("explain_test", seed))?;

    let chosen = cross_validate(&train, &train_explanations.triplets, base, bounds, cfg, seed)
        .map_err(stage_err("cross_validate", seed))?;

    let grid = generate_grid(&train, bounds, chosen.grid_points - 1, BandwidthRule::Silverman)
        .map_err(stage_err("grid", seed))?;
    let bd = build_boolean_dataset(
        &train_explanations.triplets,
        &grid,
        base,
        chosen.delta,
        &train,
        cfg.targets,
    )
    .map_err(stage_err("gbfl", seed))?;
    let gbfl = fit_clause_learner(
        &bd,
        cfg.learner,
        chosen.height,
        cfg.min_leaf,
        &cfg.logistic_learner,
        seed,
    )
    .map_err(stage_err("fit", seed))?;

    // Baselines share the fold layout and objective for height selection.
    let heights = cfg.heights_to_search();
    let folds = if heights.len() > 1 {
        prepare_folds(&train, &train_explanations.triplets, cfg.cv_folds, seed)
            .map_err(stage_err("baseline_cv", seed))?
    } else {
        Vec::new()
    };
    let tree_cfg = |height: usize| TreeConfig {
        max_height: height,
        min_leaf: cfg.min_leaf,
        seed,
    };
    let h_standard = cv_baseline_height(&folds, &heights, |fold_train, _, h| {
        train_standard(fold_train, &tree_cfg(h))
    })
    .map_err(stage_err("baseline_cv", seed))?;
    let h_distilled = cv_baseline_height(&folds, &heights, |fold_train, _, h| {
        train_distilled(fold_train, &blackbox, &tree_cfg(h))
    })
    .map_err(stage_err("baseline_cv", seed))?;
    let h_augmented = cv_baseline_height(&folds, &heights, |fold_train, fold_triplets, h| {
        train_augmented(fold_train, fold_triplets, &tree_cfg(h), cfg.augment_original_labels)
    })
    .map_err(stage_err("baseline_cv", seed))?;

    let standard =
        train_standard(&train, &tree_cfg(h_standard)).map_err(stage_err("standard", seed))?;
    let distilled = train_distilled(&train, &blackbox, &tree_cfg(h_distilled))
        .map_err(stage_err("distillation", seed))?;
    let augmented = train_augmented(
        &train,
        &train_explanations.triplets,
        &tree_cfg(h_augmented),
        cfg.augment_original_labels,
    )
    .map_err(stage_err("augmentation", seed))?;

    let (eval_data, eval_triplets, eval_stats) = match cfg.eval_split {
        EvalSplit::Test => (&test, &test_explanations.triplets, &test_explanations.stats),
        EvalSplit::Train => (
            &train,
            &train_explanations.triplets,
            &train_explanations.stats,
        ),
    };
    let mut methods = Vec::new();
    for (name, model) in [
        ("Standard", &standard),
        ("GBFL", &gbfl),
        ("Distillation", &distilled),
        ("Augmentation", &augmented),
    ] {
        let (report, acc) =
            evaluate_model(model, eval_data, eval_triplets).map_err(stage_err(name, seed))?;
        methods.push(MethodReport {
            method: name.to_string(),
            c_tb: report.c_tb,
            c_tb_pn: report.c_tb_pn,
            c_tb_pp: report.c_tb_pp,
            accuracy: acc,
            n_samples: report.n_samples,
            n_with_pn: report.n_with_pn,
        });
    }
    let bb_preds = blackbox
        .predict_batch(eval_data.features().view())
        .map_err(stage_err("blackbox_eval", seed))?;
    let blackbox_accuracy =
        accuracy(&bb_preds, eval_data.labels()).map_err(stage_err("blackbox_eval", seed))?;

    let report = SeedReport {
        seed,
        chosen,
        baseline_heights: crate::report::BaselineHeights {
            standard: h_standard,
            distillation: h_distilled,
            augmentation: h_augmented,
        },
        methods,
        blackbox_accuracy,
        n_clauses: bd.clauses.len(),
        pn_coverage_eval: eval_stats.pn_coverage,
        pn_coverage_train: train_explanations.stats.pn_coverage,
        mean_pp_sparsity_train: train_explanations.stats.mean_pp_sparsity,
        explainer_fallbacks_train: train_explanations.stats.n_pp_fallbacks,
    };

    Ok(SeedRun {
        seed,
        chosen,
        baseline_heights: [h_standard, h_distilled, h_augmented],
        blackbox,
        grid,
        gbfl,
        standard,
        distilled,
        augmented,
        train_explanations,
        test_explanations,
        report,
    })
}

/// Run the full pipeline over every configured seed and write all artifacts
/// under `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let data = load_csv(&cfg.data_path, &cfg.label_column)?;
    run_pipeline_on(cfg, &data)
}

/// As [`run_pipeline`] but with the dataset already in memory.
pub fn run_pipeline_on(cfg: &PipelineConfig, data: &Dataset) -> Result<RunReport> {
    run_pipeline_inner(cfg, data, None)
}

/// As [`run_pipeline_on`] but against a caller-provided pre-trained
/// black box instead of training a reference model per seed.
pub fn run_pipeline_with_blackbox(
    cfg: &PipelineConfig,
    data: &Dataset,
    blackbox: &BlackBoxModel,
) -> Result<RunReport> {
    run_pipeline_inner(cfg, data, Some(blackbox))
}

fn run_pipeline_inner(
    cfg: &PipelineConfig,
    data: &Dataset,
    fixed_blackbox: Option<&BlackBoxModel>,
) -> Result<RunReport> {
    cfg.validate()?;
    let bounds = derive_bounds(data);
    let base = derive_base_values(data, &bounds, &cfg.base_values)?;

    let out_dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| GbflError::io(out_dir.display().to_string(), e))?;
    std::fs::write(out_dir.join("label_mapping.json"), data.label_mapping_json())
        .map_err(|e| GbflError::io("label_mapping.json", e))?;

    let mut seed_reports = Vec::new();
    let mut top_rules: Vec<TopRule> = Vec::new();
    for (i, &seed) in cfg.seeds.iter().enumerate() {
        let run = run_seed(cfg, data, &bounds, &base, seed, fixed_blackbox)?;
        let seed_dir = out_dir.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&seed_dir)
            .map_err(|e| GbflError::io(seed_dir.display().to_string(), e))?;
        write_seed_artifacts(&run, data, &seed_dir)?;
        if i == 0 {
            top_rules = crate::report::top_rules_of(&run.gbfl, data.feature_names(), cfg.top_k);
        }
        seed_reports.push(run.report);
    }

    let report = RunReport::assemble(cfg, data, seed_reports, top_rules);
    crate::report::emit_report(&report, &out_dir)?;
    Ok(report)
}

fn write_seed_artifacts(run: &SeedRun, data: &Dataset, dir: &Path) -> Result<()> {
    save_model(&run.blackbox, dir.join("blackbox.bin"))?;
    save_grid(&run.grid, data.feature_names(), dir.join("grid.csv"))?;
    save_explanations(
        &run.train_explanations,
        data.feature_names(),
        dir.join("explanations_train.csv"),
    )?;
    save_explanations(
        &run.test_explanations,
        data.feature_names(),
        dir.join("explanations_test.csv"),
    )?;
    if let Some(clauses) = run.gbfl.clauses() {
        crate::clauses::save_clauses(clauses, data.feature_names(), dir.join("clauses.json"))?;
    }
    for (name, model) in [
        ("model_gbfl.json", &run.gbfl),
        ("model_standard.json", &run.standard),
        ("model_distillation.json", &run.distilled),
        ("model_augmentation.json", &run.augmented),
    ] {
        let method = name
            .trim_start_matches("model_")
            .trim_end_matches(".json")
            .to_string();
        save_transparent_model(model, &method, data.feature_names(), dir.join(name))?;
    }
    Ok(())
}

/// Black-box predictions for a feature matrix (convenience used by the CLI).
pub fn blackbox_predictions(
    model: &BlackBoxModel,
    features: ArrayView2<'_, f64>,
) -> Result<Vec<usize>> {
    model.predict_batch(features)
}

/// Load a model back (re-exported here so the CLI only depends on the
/// pipeline surface).
pub fn load_blackbox(path: impl AsRef<Path>) -> Result<BlackBoxModel> {
    load_model(path)
}
