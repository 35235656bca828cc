//! Command-line surface. Each subcommand wraps one pipeline stage so a full
//! run can also be reproduced by chaining stages through intermediate files.
//!
//! Exit codes: 0 success, 1 usage/input error (bad flags, unreadable or
//! invalid input files), 2 runtime error.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::clauses::save_clauses;
use crate::data::{
    derive_base_values, derive_bounds, load_csv, split, BaseValueStrategy, Dataset,
};
use crate::error::{GbflError, Result};
use crate::explainer::{explain_dataset, load_explanations, save_explanations, ExplainerConfig};
use crate::grid::{generate_grid, load_grid, save_grid, BandwidthRule};
use crate::learners::{load_transparent_model, save_transparent_model};
use crate::metrics::accuracy;
use crate::pipeline::{
    evaluate_model, run_pipeline, LearnerKind, LogisticLearnerConfig, PipelineConfig,
};
use crate::report::{emit_report, RunReport};

#[derive(Parser)]
#[command(
    name = "gbfl",
    version,
    about = "Transparent proxy models from local contrastive explanations of a black-box classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every random choice in the invoked stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output path (file or directory, depending on the subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print progress to stderr.
    #[arg(long, global = true, default_value_t = false)]
    verbose: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SplitArg {
    All,
    Train,
    Test,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum BaseArg {
    Median,
    Zeros,
}

#[derive(clap::Args)]
struct DataArgs {
    /// Dataset CSV (header row required).
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long)]
    label: String,
    /// Which part of the stratified split to operate on.
    #[arg(long, value_enum, default_value = "all")]
    split: SplitArg,
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed list with this single seed.
        #[arg(long)]
        single_seed: bool,
    },
    /// Train a built-in reference black-box model.
    TrainBlackbox {
        #[command(flatten)]
        data: DataArgs,
        /// Hidden layer widths, comma separated; empty for logistic.
        #[arg(long, default_value = "")]
        hidden: String,
        /// Per-hidden-layer dropout rates, comma separated.
        #[arg(long, default_value = "")]
        dropout: String,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0.9)]
        momentum: f64,
        #[arg(long, default_value_t = false)]
        standardize: bool,
    },
    /// Compute pertinent positives/negatives for a split.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "median")]
        base: BaseArg,
        #[arg(long, default_value_t = 0.1)]
        kappa: f64,
        #[arg(long, default_value_t = 0.1)]
        l1: f64,
        #[arg(long, default_value_t = 1.0)]
        l2: f64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long, default_value_t = 0.05)]
        step_size: f64,
    },
    /// Generate the equal-probability grid for a split.
    Grid {
        #[command(flatten)]
        data: DataArgs,
        /// Number of grid points (N+1).
        #[arg(long, default_value_t = 5)]
        grid_points: usize,
        /// KDE bandwidth; omit for Silverman's rule.
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Turn explanations into deduplicated boolean clauses.
    Gbfl {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        explanations: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 1)]
        delta: usize,
        #[arg(long, value_enum, default_value = "median")]
        base: BaseArg,
    },
    /// Fit a transparent learner on clause features.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        clauses: PathBuf,
        #[arg(long, value_enum, default_value = "tree")]
        learner: LearnerArg,
        #[arg(long, default_value_t = 5)]
        height: usize,
        #[arg(long, default_value_t = 1)]
        min_leaf: usize,
        #[arg(long, value_enum, default_value = "blackbox")]
        targets: TargetsArg,
        #[arg(long, default_value_t = 0.01)]
        l1: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 0.5)]
        learning_rate: f64,
    },
    /// Score a fitted transparent model against the black box on a split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tmodel: PathBuf,
        #[arg(long)]
        explanations: PathBuf,
        #[arg(long, value_enum, default_value = "median")]
        base: BaseArg,
    },
    /// Re-render report.md and rules.txt from a report.json.
    Report {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum LearnerArg {
    Tree,
    Logistic,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum TargetsArg {
    Blackbox,
    True,
}

struct CliError {
    code: i32,
    source: GbflError,
}

/// Input/usage failure (bad files, bad flags): exit 1.
fn input<T>(r: Result<T>) -> std::result::Result<T, CliError> {
    r.map_err(|source| CliError { code: 1, source })
}

/// Failure while computing: exit 2.
fn runtime<T>(r: Result<T>) -> std::result::Result<T, CliError> {
    r.map_err(|source| CliError { code: 2, source })
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| GbflError::InvalidArgument(format!("bad integer `{p}`")))
        })
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| GbflError::InvalidArgument(format!("bad number `{p}`")))
        })
        .collect()
}

fn select_split(args: &DataArgs, seed: u64) -> Result<(Dataset, Dataset)> {
    let full = load_csv(&args.data, &args.label)?;
    let part = match args.split {
        SplitArg::All => full.clone(),
        SplitArg::Train => split(&full, args.test_fraction, seed)?.0,
        SplitArg::Test => split(&full, args.test_fraction, seed)?.1,
    };
    Ok((full, part))
}

fn base_strategy(arg: BaseArg) -> BaseValueStrategy {
    match arg {
        BaseArg::Median => BaseValueStrategy::Median,
        BaseArg::Zeros => BaseValueStrategy::Zeros,
    }
}

fn out_path(out: &Option<PathBuf>, default: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// Parse and execute; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(CliError { code, source }) => {
            eprintln!("error: {source}");
            code
        }
    }
}

fn execute(cli: Cli) -> std::result::Result<(), CliError> {
    let verbose = cli.verbose;
    let log = |msg: &str| {
        if verbose {
            eprintln!("[gbfl] {msg}");
        }
    };
    match cli.command {
        Command::Run { config, single_seed } => {
            let mut cfg = input(PipelineConfig::from_json_file(&config))?;
            if let Some(out) = &cli.out {
                cfg.output_dir = out.display().to_string();
            }
            if single_seed {
                cfg.seeds = vec![cli.seed];
            }
            log(&format!("running pipeline with seeds {:?}", cfg.seeds));
            let report = runtime(run_pipeline(&cfg))?;
            log(&format!(
                "done; mean black-box accuracy {:.4}",
                report.mean.blackbox_accuracy
            ));
            println!("report written to {}/report.json", cfg.output_dir);
            Ok(())
        }
        Command::TrainBlackbox {
            data,
            hidden,
            dropout,
            epochs,
            batch_size,
            learning_rate,
            momentum,
            standardize,
        } => {
            let (_, part) = input(select_split(&data, cli.seed))?;
            let cfg = crate::blackbox::MlpConfig {
                hidden_layer_widths: input(parse_usize_list(&hidden))?,
                dropout_rates: input(parse_f64_list(&dropout))?,
                epochs,
                batch_size,
                learning_rate,
                momentum,
                standardize,
                seed: cli.seed,
                ..crate::blackbox::MlpConfig::default()
            };
            log(&format!("training {} model", if cfg.hidden_layer_widths.is_empty() { "logistic" } else { "mlp" }));
            let model = runtime(crate::blackbox::train_reference_model(&cfg, &part, cli.seed))?;
            let path = out_path(&cli.out, "blackbox.bin");
            runtime(crate::blackbox::save_model(&model, &path))?;
            println!("model written to {}", path.display());
            Ok(())
        }
        Command::Explain {
            data,
            model,
            base,
            kappa,
            l1,
            l2,
            max_iters,
            step_size,
        } => {
            let (full, part) = input(select_split(&data, cli.seed))?;
            let bb = input(crate::blackbox::load_model(&model))?;
            let bounds = derive_bounds(&full);
            let base = input(derive_base_values(&full, &bounds, &base_strategy(base)))?;
            let cfg = ExplainerConfig {
                kappa,
                l1_strength: l1,
                l2_strength: l2,
                max_iters,
                step_size,
                seed: cli.seed,
                ..ExplainerConfig::default()
            };
            log(&format!("explaining {} samples", part.n_samples()));
            let set = runtime(explain_dataset(&bb, &part, &base, &bounds, &cfg))?;
            let path = out_path(&cli.out, "explanations.csv");
            runtime(save_explanations(&set, part.feature_names(), &path))?;
            println!(
                "explanations written to {} (PN coverage {:.2}%)",
                path.display(),
                set.stats.pn_coverage * 100.0
            );
            Ok(())
        }
        Command::Grid {
            data,
            grid_points,
            bandwidth,
        } => {
            let (full, part) = input(select_split(&data, cli.seed))?;
            if grid_points < 2 {
                return Err(CliError {
                    code: 1,
                    source: GbflError::InvalidArgument("--grid-points must be >= 2".into()),
                });
            }
            let bounds = derive_bounds(&full);
            let rule = match bandwidth {
                Some(b) => BandwidthRule::Explicit(b),
                None => BandwidthRule::Silverman,
            };
            let grid = runtime(generate_grid(&part, &bounds, grid_points - 1, rule))?;
            let path = out_path(&cli.out, "grid.csv");
            runtime(save_grid(&grid, part.feature_names(), &path))?;
            println!("grid written to {}", path.display());
            Ok(())
        }
        Command::Gbfl {
            data,
            model,
            explanations,
            grid,
            delta,
            base,
        } => {
            let (full, part) = input(select_split(&data, cli.seed))?;
            let bb = input(crate::blackbox::load_model(&model))?;
            let bounds = derive_bounds(&full);
            let base = input(derive_base_values(&full, &bounds, &base_strategy(base)))?;
            let (grid, _) = input(load_grid(&grid))?;
            let triplets = input(load_explanations(&explanations, &part, &bb, &base))?;
            let clauses = runtime(crate::clauses::generate_clauses(
                &triplets, &grid, &base, delta,
            ))?;
            if clauses.is_empty() {
                return Err(CliError {
                    code: 2,
                    source: GbflError::NoClauses,
                });
            }
            let path = out_path(&cli.out, "clauses.json");
            runtime(save_clauses(&clauses, part.feature_names(), &path))?;
            println!("{} clauses written to {}", clauses.len(), path.display());
            Ok(())
        }
        Command::Fit {
            data,
            model,
            clauses,
            learner,
            height,
            min_leaf,
            targets,
            l1,
            epochs,
            learning_rate,
        } => {
            let (_, part) = input(select_split(&data, cli.seed))?;
            let bb = input(crate::blackbox::load_model(&model))?;
            let (clause_list, _) = input(crate::clauses::load_clauses(&clauses))?;
            // Rebuild the boolean dataset over this split.
            let matrix = runtime(crate::clauses::clause_matrix(
                &clause_list,
                part.features().view(),
            ))?;
            let target_vec: Vec<usize> = match targets {
                TargetsArg::Blackbox => runtime(bb.predict_batch(part.features().view()))?,
                TargetsArg::True => part.labels().to_vec(),
            };
            let learner_kind = match learner {
                LearnerArg::Tree => LearnerKind::Tree,
                LearnerArg::Logistic => LearnerKind::Logistic,
            };
            let model = match learner_kind {
                LearnerKind::Tree => {
                    let tree = runtime(crate::learners::fit_tree(
                        matrix.view(),
                        &target_vec,
                        part.n_classes(),
                        &crate::learners::TreeConfig {
                            max_height: height,
                            min_leaf,
                            seed: cli.seed,
                        },
                    ))?;
                    crate::learners::TransparentModel::ClauseTree {
                        tree,
                        clauses: clause_list,
                    }
                }
                LearnerKind::Logistic => {
                    let cfg = LogisticLearnerConfig {
                        l1,
                        epochs,
                        learning_rate,
                    };
                    let lm = runtime(crate::learners::fit_logistic_l1(
                        matrix.view(),
                        &target_vec,
                        part.n_classes(),
                        cfg.l1,
                        cfg.epochs,
                        cfg.learning_rate,
                        cli.seed,
                    ))?;
                    crate::learners::TransparentModel::ClauseLogistic {
                        model: lm,
                        clauses: clause_list,
                    }
                }
            };
            let path = out_path(&cli.out, "tmodel.json");
            runtime(save_transparent_model(
                &model,
                "GBFL",
                part.feature_names(),
                &path,
            ))?;
            println!("transparent model written to {}", path.display());
            Ok(())
        }
        Command::Evaluate {
            data,
            model,
            tmodel,
            explanations,
            base,
        } => {
            let (full, part) = input(select_split(&data, cli.seed))?;
            let bb = input(crate::blackbox::load_model(&model))?;
            let bounds = derive_bounds(&full);
            let base = input(derive_base_values(&full, &bounds, &base_strategy(base)))?;
            let (transparent, method, _) = input(load_transparent_model(&tmodel))?;
            let triplets = input(load_explanations(&explanations, &part, &bb, &base))?;
            let (report, acc) = runtime(evaluate_model(&transparent, &part, &triplets))?;
            let bb_preds = runtime(bb.predict_batch(part.features().view()))?;
            let bb_acc = runtime(accuracy(&bb_preds, part.labels()))?;
            let json = serde_json::json!({
                "method": method,
                "consistency": report,
                "accuracy": acc,
                "blackbox_accuracy": bb_acc,
            });
            let path = out_path(&cli.out, "metrics.json");
            runtime(
                std::fs::write(&path, serde_json::to_vec_pretty(&json).expect("serializes"))
                    .map_err(|e| GbflError::io(path.display().to_string(), e)),
            )?;
            println!(
                "c_tb {:.4}, c_tb_pp {:.4}, c_tb_pn {}, accuracy {:.4} -> {}",
                report.c_tb,
                report.c_tb_pp,
                report
                    .c_tb_pn
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "NA".into()),
                acc,
                path.display()
            );
            Ok(())
        }
        Command::Report { report } => {
            let parsed = input(RunReport::from_json_file(&report))?;
            let dir = out_path(&cli.out, ".");
            runtime(emit_report(&parsed, &dir))?;
            println!("report rendered into {}", dir.display());
            Ok(())
        }
    }
}
