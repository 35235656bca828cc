//! Run reports: JSON for machines, a metric table in markdown for humans,
//! and the top-ranked clause listing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clauses::format_clause;
use crate::data::Dataset;
use crate::error::{GbflError, Result};
use crate::learners::{top_k_columns, TransparentModel};
use crate::pipeline::{ChosenParams, PipelineConfig};

/// Metrics for one method on one seed's evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub c_tb: f64,
    pub c_tb_pn: Option<f64>,
    pub c_tb_pp: f64,
    pub accuracy: f64,
    pub n_samples: usize,
    pub n_with_pn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineHeights {
    pub standard: usize,
    pub distillation: usize,
    pub augmentation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub chosen: ChosenParams,
    pub baseline_heights: BaselineHeights,
    pub methods: Vec<MethodReport>,
    pub blackbox_accuracy: f64,
    pub n_clauses: usize,
    pub pn_coverage_eval: f64,
    pub pn_coverage_train: f64,
    pub mean_pp_sparsity_train: f64,
    pub explainer_fallbacks_train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub methods: Vec<MethodMean>,
    pub blackbox_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMean {
    pub method: String,
    pub c_tb: f64,
    /// Mean over seeds that had pertinent negatives; absent when none did.
    pub c_tb_pn: Option<f64>,
    pub c_tb_pp: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopRule {
    pub rank: usize,
    pub importance: f64,
    pub text: String,
    /// Clause id for clause-based models, column name otherwise.
    pub column: String,
}

/// The complete run output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub version: String,
    pub config: PipelineConfig,
    pub config_hash: String,
    /// Wall-clock provenance; excluded from determinism comparisons.
    pub timestamp_unix: u64,
    pub dataset_summary: DatasetSummary,
    pub per_seed: Vec<SeedReport>,
    pub mean: MeanReport,
    pub top_rules: Vec<TopRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub label_column: String,
}

impl RunReport {
    pub fn assemble(
        cfg: &PipelineConfig,
        data: &Dataset,
        per_seed: Vec<SeedReport>,
        top_rules: Vec<TopRule>,
    ) -> RunReport {
        let methods: Vec<String> = per_seed
            .first()
            .map(|s| s.methods.iter().map(|m| m.method.clone()).collect())
            .unwrap_or_default();
        let mut means = Vec::new();
        for method in &methods {
            let rows: Vec<&MethodReport> = per_seed
                .iter()
                .flat_map(|s| s.methods.iter().filter(|m| &m.method == method))
                .collect();
            let n = rows.len().max(1) as f64;
            let pn_rows: Vec<f64> = rows.iter().filter_map(|m| m.c_tb_pn).collect();
            means.push(MethodMean {
                method: method.clone(),
                c_tb: rows.iter().map(|m| m.c_tb).sum::<f64>() / n,
                c_tb_pn: if pn_rows.is_empty() {
                    None
                } else {
                    Some(pn_rows.iter().sum::<f64>() / pn_rows.len() as f64)
                },
                c_tb_pp: rows.iter().map(|m| m.c_tb_pp).sum::<f64>() / n,
                accuracy: rows.iter().map(|m| m.accuracy).sum::<f64>() / n,
            });
        }
        let blackbox_accuracy = per_seed
            .iter()
            .map(|s| s.blackbox_accuracy)
            .sum::<f64>()
            / per_seed.len().max(1) as f64;
        RunReport {
            schema_version: 1,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            config_hash: cfg.config_hash(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            dataset_summary: DatasetSummary {
                n_samples: data.n_samples(),
                n_features: data.n_features(),
                n_classes: data.n_classes(),
                label_column: data.label_column().to_string(),
            },
            per_seed,
            mean: MeanReport {
                methods: means,
                blackbox_accuracy,
            },
            top_rules,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<RunReport> {
        let path_str = path.as_ref().display().to_string();
        let bytes = std::fs::read(path.as_ref()).map_err(|e| GbflError::io(path_str, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// Ranked clause listing for a fitted transparent model.
pub fn top_rules_of(
    model: &TransparentModel,
    feature_names: &[String],
    k: usize,
) -> Vec<TopRule> {
    let importances = model.importances();
    let ranked = top_k_columns(&importances, &model.used_columns(), k);
    match model.clauses() {
        Some(clauses) => ranked
            .into_iter()
            .enumerate()
            .map(|(i, (col, importance))| TopRule {
                rank: i + 1,
                importance,
                text: format_clause(&clauses[col], feature_names),
                column: clauses[col].id.clone(),
            })
            .collect(),
        None => ranked
            .into_iter()
            .enumerate()
            .map(|(i, (col, importance))| TopRule {
                rank: i + 1,
                importance,
                text: feature_names
                    .get(col)
                    .cloned()
                    .unwrap_or_else(|| format!("column {col}")),
                column: feature_names
                    .get(col)
                    .cloned()
                    .unwrap_or_else(|| col.to_string()),
            })
            .collect(),
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn pct_opt(v: Option<f64>) -> String {
    v.map(pct).unwrap_or_else(|| "NA".into())
}

/// Markdown table mirrored on the familiar consistency/accuracy layout:
/// one row group per metric, one row per method, mean first then per-seed
/// columns. All values are percentages.
pub fn render_markdown(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str("# Run report\n\n");
    out.push_str(&format!(
        "- dataset: `{}` ({} samples, {} features, {} classes)\n",
        report.config.data_path,
        report.dataset_summary.n_samples,
        report.dataset_summary.n_features,
        report.dataset_summary.n_classes
    ));
    out.push_str(&format!("- config hash: `{}`\n", report.config_hash));
    out.push_str(&format!("- seeds: {:?}\n", report.config.seeds));
    for seed in &report.per_seed {
        out.push_str(&format!(
            "- seed {}: grid points N+1 = {}, delta = {}, height = {}, {} clauses, PN coverage {}\n",
            seed.seed,
            seed.chosen.grid_points,
            seed.chosen.delta,
            seed.chosen.height,
            seed.n_clauses,
            pct(seed.pn_coverage_eval),
        ));
    }
    out.push('\n');

    let mut header = String::from("| Metric | Method | Mean |");
    let mut rule = String::from("|---|---|---|");
    for seed in &report.per_seed {
        header.push_str(&format!(" Seed {} |", seed.seed));
        rule.push_str("---|");
    }
    out.push_str(&header);
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');

    let metric_of = |m: &MethodReport, metric: &str| -> String {
        match metric {
            "C_TB" => pct(m.c_tb),
            "C_TB^PN" => pct_opt(m.c_tb_pn),
            "C_TB^PP" => pct(m.c_tb_pp),
            "Test Accuracy" => pct(m.accuracy),
            _ => unreachable!(),
        }
    };
    let mean_of = |m: &MethodMean, metric: &str| -> String {
        match metric {
            "C_TB" => pct(m.c_tb),
            "C_TB^PN" => pct_opt(m.c_tb_pn),
            "C_TB^PP" => pct(m.c_tb_pp),
            "Test Accuracy" => pct(m.accuracy),
            _ => unreachable!(),
        }
    };

    for metric in ["C_TB", "C_TB^PN", "C_TB^PP", "Test Accuracy"] {
        for mean in &report.mean.methods {
            let mut row = format!("| {} | {} | {} |", metric, mean.method, mean_of(mean, metric));
            for seed in &report.per_seed {
                let m = seed
                    .methods
                    .iter()
                    .find(|m| m.method == mean.method)
                    .expect("method present in every seed");
                row.push_str(&format!(" {} |", metric_of(m, metric)));
            }
            out.push_str(&row);
            out.push('\n');
        }
        if metric == "Test Accuracy" {
            let mut row = format!(
                "| {} | Black-box | {} |",
                metric,
                pct(report.mean.blackbox_accuracy)
            );
            for seed in &report.per_seed {
                row.push_str(&format!(" {} |", pct(seed.blackbox_accuracy)));
            }
            out.push_str(&row);
            out.push('\n');
        }
    }
    out.push('\n');
    out
}

/// The clause listing, one block per ranked rule.
pub fn render_rules(report: &RunReport) -> String {
    let mut out = String::new();
    for rule in &report.top_rules {
        out.push_str(&format!("GBFL rank {} feature\n", rule.rank));
        out.push_str(&rule.text);
        out.push_str("\n\n");
    }
    if report.top_rules.is_empty() {
        out.push_str("no rules ranked\n");
    }
    out
}

/// Write `report.json`, `report.md` and `rules.txt` into `dir`.
pub fn emit_report(report: &RunReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| GbflError::io(dir.display().to_string(), e))?;
    let json_path = dir.join("report.json");
    std::fs::write(&json_path, serde_json::to_vec_pretty(report)?)
        .map_err(|e| GbflError::io(json_path.display().to_string(), e))?;
    let md_path = dir.join("report.md");
    std::fs::write(&md_path, render_markdown(report))
        .map_err(|e| GbflError::io(md_path.display().to_string(), e))?;
    let rules_path = dir.join("rules.txt");
    std::fs::write(&rules_path, render_rules(report))
        .map_err(|e| GbflError::io(rules_path.display().to_string(), e))?;
    Ok(())
}
