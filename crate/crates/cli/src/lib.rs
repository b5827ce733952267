//! Subcommand surface: binds every pipeline operation to config files and
//! flags.
//!
//! Exit codes: 0 on success, 2 on configuration errors (bad keys, missing
//! sections, invalid values, absent inputs named by config), 3 on runtime
//! failures (divergence, infeasible budgets, malformed data files).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ccfs_core::config::{PipelineConfig, SelectionMode, SelectionSettings};
use ccfs_core::data::{load_packed, save_packed, LabeledDataset};
use ccfs_core::pipeline::{
    analysis_experiment, evaluate_coreset, load_data, phase_analysis, read_manifest,
    render_analysis, render_phase_analysis, resolve_holdout, run_ccfs,
};
use ccfs_core::scores::{read_scores, write_scores};
use ccfs_core::select::kmeans_surrogate;
use ccfs_core::textfmt::Sections;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable overriding `[pipeline] out_dir`.
pub const OUT_DIR_ENV: &str = "CCFS_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "ccfs",
    about = "Curriculum coarse-to-fine coreset selection",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct ConfigArgs {
    /// Config file ([data]/[scores]/[selection]/[filter]/[evaluation]/[pipeline]).
    #[arg(long)]
    pub config: PathBuf,
    /// Override one config key: `--set section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Compute difficulty scores and write them as a score file.
    Scores {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output score file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run curriculum selection: emits a manifest and a packed coreset.
    Select {
        #[command(flatten)]
        config: ConfigArgs,
        /// Strategy shorthand, e.g. `simplest-misclassified` or
        /// `hardest-classified` (fine mode - coarse mode).
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Selection-only run seeded by a difficulty window (no distilled set).
    SelfEvolve {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Train the evaluation model on a packed coreset and report accuracy.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Coreset file; overrides `[pipeline] coreset`.
        #[arg(long)]
        coreset: Option<PathBuf>,
    },
    /// Compare one-shot, two-shot, and reverse selection over a window sweep.
    CompareSettings {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute per-phase analytics from a manifest and a score file.
    Analyze {
        /// Manifest written by `select`.
        #[arg(long)]
        manifest: PathBuf,
        /// Score file matching the manifest's training universe.
        #[arg(long)]
        scores: PathBuf,
    },
    /// Generate a toy blob dataset and write it as packed tensor files.
    GenBlobs {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output file for the training split.
        #[arg(long)]
        out_train: PathBuf,
        /// Output file for the test split (requires `test_per_class > 0`).
        #[arg(long)]
        out_test: Option<PathBuf>,
    },
    /// Build a per-class k-means prototype set as a surrogate distilled set.
    SurrogateDistill {
        #[command(flatten)]
        config: ConfigArgs,
        /// Prototypes per class.
        #[arg(long)]
        per_class: usize,
        /// Lloyd iterations.
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        /// Initialization seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output packed file.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors carrying their exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ccfs_core::Error> for CliError {
    fn from(err: ccfs_core::Error) -> Self {
        if err.is_config() {
            CliError::Config(err.to_string())
        } else {
            CliError::Runtime(err.to_string())
        }
    }
}

/// Load a config file, apply `--set` overrides and the out-dir environment
/// override, and parse it.
pub fn load_config(args: &ConfigArgs) -> Result<PipelineConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut sections = Sections::parse(&text).map_err(CliError::from)?;
    for entry in &args.overrides {
        let (key_path, value) = entry.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--set `{entry}`: expected section.key=value"))
        })?;
        let (section, key) = key_path.trim().split_once('.').ok_or_else(|| {
            CliError::Config(format!("--set `{entry}`: key must be section.key"))
        })?;
        sections.set(section.trim(), key.trim(), value.trim());
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            sections.set("pipeline", "out_dir", dir);
        }
    }
    PipelineConfig::from_sections(&sections).map_err(CliError::from)
}

fn apply_strategy(config: &mut PipelineConfig, strategy: &str) -> Result<(), CliError> {
    use ccfs_core::select::{CoarseMode, FineMode};
    let (fine, coarse) = strategy.split_once('-').ok_or_else(|| {
        CliError::Config(format!(
            "--strategy `{strategy}`: expected <fine>-<coarse>, e.g. simplest-misclassified"
        ))
    })?;
    let sel: &mut SelectionSettings = config.selection.as_mut().ok_or_else(|| {
        CliError::Config("--strategy needs a [selection] section".into())
    })?;
    sel.config.fine_mode = match fine {
        "simplest" => FineMode::Simplest,
        "hardest" => FineMode::Hardest,
        "random" => FineMode::Random,
        other => {
            return Err(CliError::Config(format!(
                "--strategy fine mode `{other}` is not simplest/hardest/random"
            )))
        }
    };
    sel.config.coarse_mode = match coarse {
        "misclassified" => CoarseMode::Misclassified,
        "classified" => CoarseMode::Classified,
        other => {
            return Err(CliError::Config(format!(
                "--strategy coarse mode `{other}` is not misclassified/classified"
            )))
        }
    };
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Scores { config, out } => cmd_scores(&config, &out),
        Command::Select { config, strategy } => cmd_select(&config, strategy.as_deref(), None),
        Command::SelfEvolve { config, strategy } => cmd_select(
            &config,
            strategy.as_deref(),
            Some(SelectionMode::SelfEvolved),
        ),
        Command::Evaluate { config, coreset } => cmd_evaluate(&config, coreset.as_deref()),
        Command::CompareSettings { config, out } => cmd_compare_settings(&config, out.as_deref()),
        Command::Analyze { manifest, scores } => cmd_analyze(&manifest, &scores),
        Command::GenBlobs {
            config,
            out_train,
            out_test,
        } => cmd_gen_blobs(&config, &out_train, out_test.as_deref()),
        Command::SurrogateDistill {
            config,
            per_class,
            iterations,
            seed,
            out,
        } => cmd_surrogate_distill(&config, per_class, iterations, seed, &out),
    }
}

fn cmd_scores(args: &ConfigArgs, out: &Path) -> Result<(), CliError> {
    let config = load_config(args)?;
    let data_cfg = config.require_data().map_err(CliError::from)?;
    let score_cfg = config.require_scores().map_err(CliError::from)?;
    let run_cfg = config.run.clone().unwrap_or_default();
    let (train_all, test) = load_data(data_cfg)?;
    let resolved = resolve_holdout(train_all, test, run_cfg.holdout_fraction, run_cfg.holdout_seed)?;
    let scores = ccfs_core::pipeline::obtain_scores(score_cfg, &resolved.train, config.filter.as_ref())?;
    write_scores(&scores, out)?;
    println!(
        "wrote {} scores ({}) to {}",
        scores.len(),
        scores.source(),
        out.display()
    );
    Ok(())
}

fn cmd_select(
    args: &ConfigArgs,
    strategy: Option<&str>,
    force_mode: Option<SelectionMode>,
) -> Result<(), CliError> {
    let mut config = load_config(args)?;
    if let Some(strategy) = strategy {
        apply_strategy(&mut config, strategy)?;
    }
    if let Some(mode) = force_mode {
        let sel = config
            .selection
            .as_mut()
            .ok_or_else(|| CliError::Config("missing [selection] section".into()))?;
        sel.mode = mode;
    }
    let report = run_ccfs(&config)?;
    println!("config_hash = {}", report.config_hash);
    println!("phases = {}", report.records.len());
    for r in &report.records {
        println!(
            "phase {}: selected {} (backfill {})",
            r.phase,
            r.selected.len(),
            r.backfill_count
        );
    }
    println!(
        "evaluation = {:.4} ± {:.4} over {} seed(s)",
        report.evaluation.mean,
        report.evaluation.std,
        report.evaluation.accuracies.len()
    );
    println!("manifest = {}", report.manifest_path.display());
    println!("coreset = {}", report.coreset_path.display());
    println!("report = {}", report.report_path.display());
    Ok(())
}

fn cmd_evaluate(args: &ConfigArgs, coreset_flag: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(args)?;
    let data_cfg = config.require_data().map_err(CliError::from)?;
    let eval_cfg = config.require_evaluation().map_err(CliError::from)?;
    let run_cfg = config.run.clone().unwrap_or_default();
    let coreset_path = coreset_flag
        .map(Path::to_path_buf)
        .or_else(|| run_cfg.coreset.clone())
        .ok_or_else(|| {
            CliError::Config("no coreset path: pass --coreset or set [pipeline] coreset".into())
        })?;
    let coreset = load_packed(&coreset_path)?;
    let (train_all, test) = load_data(data_cfg)?;
    let resolved = resolve_holdout(train_all, test, run_cfg.holdout_fraction, run_cfg.holdout_seed)?;
    let target = resolved.holdout.as_ref().unwrap_or(&resolved.train);
    let budget_ratio = coreset.len() as f64 / resolved.train.len() as f64;
    let train_config = eval_cfg.train.resolve(budget_ratio).map_err(CliError::from)?;
    let summary = evaluate_coreset(&coreset, target, &eval_cfg.model, &train_config, eval_cfg.seeds)?;
    println!(
        "accuracy = {:.4} ± {:.4} over {} seed(s)",
        summary.mean,
        summary.std,
        summary.accuracies.len()
    );
    for (i, acc) in summary.accuracies.iter().enumerate() {
        println!("seed {i}: {acc:.4}");
    }
    Ok(())
}

fn cmd_compare_settings(args: &ConfigArgs, out: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(args)?;
    let report = analysis_experiment(&config)?;
    let rendered = render_analysis(&report);
    print!("{rendered}");
    if let Some(path) = out {
        std::fs::write(path, &rendered)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_analyze(manifest_path: &Path, scores_path: &Path) -> Result<(), CliError> {
    let manifest = read_manifest(manifest_path)?;
    let data_cfg = manifest.config.require_data().map_err(CliError::from)?;
    let run_cfg = manifest.config.run.clone().unwrap_or_default();
    let (train_all, test) = load_data(data_cfg)?;
    let resolved = resolve_holdout(train_all, test, run_cfg.holdout_fraction, run_cfg.holdout_seed)?;
    let scores = read_scores(scores_path, resolved.train.len()).map_err(|e| {
        // A score file of the wrong length is a configuration problem.
        CliError::Config(e.to_string())
    })?;
    // Rebuild minimal phase records from the manifest.
    let records: Vec<ccfs_core::select::PhaseRecord> = manifest
        .phases
        .iter()
        .enumerate()
        .map(|(i, p)| ccfs_core::select::PhaseRecord {
            phase: i + 1,
            synthetic_accuracy: None,
            pool_accuracy: None,
            holdout_accuracy: None,
            selected: p.selected.clone(),
            difficulty: ccfs_core::select::difficulty_stats(&p.selected, &scores),
            backfill_count: p.backfill,
        })
        .collect();
    let analysis = phase_analysis(&records, &scores)?;
    print!("{}", render_phase_analysis(&analysis));
    Ok(())
}

fn cmd_gen_blobs(args: &ConfigArgs, out_train: &Path, out_test: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(args)?;
    let data_cfg = config.require_data().map_err(CliError::from)?;
    let (train, test) = load_data(data_cfg)?;
    save_packed(&train.to_packed()?, out_train)?;
    println!("wrote {} training records to {}", train.len(), out_train.display());
    match (test, out_test) {
        (Some(test), Some(path)) => {
            save_packed(&test.to_packed()?, path)?;
            println!("wrote {} test records to {}", test.len(), path.display());
        }
        (None, Some(_)) => {
            return Err(CliError::Config(
                "--out-test given but the data config has no test split".into(),
            ));
        }
        _ => {}
    }
    Ok(())
}

fn cmd_surrogate_distill(
    args: &ConfigArgs,
    per_class: usize,
    iterations: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let config = load_config(args)?;
    let data_cfg = config.require_data().map_err(CliError::from)?;
    let run_cfg = config.run.clone().unwrap_or_default();
    let (train_all, test) = load_data(data_cfg)?;
    let resolved = resolve_holdout(train_all, test, run_cfg.holdout_fraction, run_cfg.holdout_seed)?;
    let set = kmeans_surrogate(&resolved.train, per_class, iterations, seed)?;
    save_packed(&set, out)?;
    println!(
        "wrote {} surrogate prototypes to {} (k-means, not optimization-based distillation)",
        set.len(),
        out.display()
    );
    Ok(())
}

// Re-exported for integration tests.
pub use ccfs_core::pipeline::obtain_scores;

/// Used by tests to build datasets without going through files.
pub fn blob_dataset(classes: usize, per_class: usize, seed: u64) -> LabeledDataset {
    ccfs_core::data::make_blobs(classes, per_class, 2, 5.0, 1.0, seed).unwrap()
}
