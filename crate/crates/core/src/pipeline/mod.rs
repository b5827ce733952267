//! End-to-end orchestration: full selection runs, the three-setting
//! analysis experiment, coreset evaluation, phase analytics, and the
//! external-prediction bridge.

mod manifest;
mod report;

pub use manifest::{read_manifest, rematerialize, write_manifest, DistilledProvenance, Manifest, ManifestPhase};
pub use report::{render_analysis, render_phase_analysis, render_report};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{
    DataConfig, DistilledSource, FilterConfig, ModelSettings, PipelineConfig, ScoreConfig,
    SelectionMode,
};
use crate::data::{class_partition, load_cifar10, load_idx, load_packed, save_packed, LabeledDataset, PackedTensorSet};
use crate::nnet::{accuracy, init_model, train, ModelSpec, TrainConfig};
use crate::scores::{forgetting_scores, logits_difficulty, read_scores, DifficultyScores};
use crate::select::{
    ceil_tol, difficulty_stats, kmeans_surrogate, kmeans_surrogate_from, run_curriculum,
    self_evolved, CoresetState, CurriculumRun, DifficultyStats, FilterSource, PhaseRecord,
    SelectionConfig,
};
use crate::{Error, Result};

/// The training universe plus whatever held-out set the run evaluates on.
pub struct ResolvedData {
    pub train: LabeledDataset,
    pub holdout: Option<LabeledDataset>,
}

/// Load the dataset named by the config.
pub fn load_data(config: &DataConfig) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    match config {
        DataConfig::Blobs {
            classes,
            per_class,
            dim,
            center_spread,
            noise_std,
            seed,
            test_per_class,
        } => {
            let total = per_class + test_per_class;
            let all = crate::data::make_blobs(
                *classes,
                total,
                *dim,
                *center_spread,
                *noise_std,
                *seed,
            )?;
            if *test_per_class == 0 {
                return Ok((all, None));
            }
            let mut train_ids = Vec::new();
            let mut test_ids = Vec::new();
            for c in 0..*classes {
                let base = c * total;
                train_ids.extend(base..base + per_class);
                test_ids.extend(base + per_class..base + total);
            }
            Ok((all.subset(&train_ids)?, Some(all.subset(&test_ids)?)))
        }
        DataConfig::Cifar10 { dir } => {
            let data = load_cifar10(dir)?;
            Ok((data.train, Some(data.test)))
        }
        DataConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train = load_idx(train_images, train_labels)?;
            let test = match (test_images, test_labels) {
                (Some(ti), Some(tl)) => Some(load_idx(ti, tl)?),
                _ => None,
            };
            Ok((train, test))
        }
        DataConfig::Packed { train, test } => {
            let train_set = LabeledDataset::from_packed(&load_packed(train)?)?;
            let test_set = match test {
                Some(p) => Some(LabeledDataset::from_packed(&load_packed(p)?)?),
                None => None,
            };
            Ok((train_set, test_set))
        }
    }
}

/// Pick the evaluation set: the dataset's own test split when present,
/// otherwise a seeded stratified split carved out of the training set
/// before any scoring or selection.
pub fn resolve_holdout(
    train: LabeledDataset,
    test: Option<LabeledDataset>,
    fraction: f64,
    seed: u64,
) -> Result<ResolvedData> {
    if let Some(test) = test {
        return Ok(ResolvedData {
            train,
            holdout: Some(test),
        });
    }
    if fraction <= 0.0 {
        return Ok(ResolvedData {
            train,
            holdout: None,
        });
    }
    let index = class_partition(&train);
    let mut holdout_ids = Vec::new();
    let mut train_ids = Vec::new();
    for c in 0..train.num_classes() {
        let mut members = index.class(c).to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64 + 1);
        members.shuffle(&mut rng);
        let take = ((members.len() as f64) * fraction).ceil() as usize;
        let take = take.min(members.len().saturating_sub(1));
        holdout_ids.extend_from_slice(&members[..take]);
        train_ids.extend_from_slice(&members[take..]);
    }
    holdout_ids.sort_unstable();
    train_ids.sort_unstable();
    let holdout = train.subset(&holdout_ids)?;
    let train = train.subset(&train_ids)?;
    Ok(ResolvedData {
        train,
        holdout: Some(holdout),
    })
}

/// Compute or ingest the difficulty scores named by the config. Computed
/// sources train the filter-section model on the full training set.
pub fn obtain_scores(
    config: &ScoreConfig,
    train_set: &LabeledDataset,
    filter: Option<&FilterConfig>,
) -> Result<DifficultyScores> {
    match config {
        ScoreConfig::File { path } => read_scores(path, train_set.len()),
        ScoreConfig::Forgetting { runs, train } => {
            let filter = filter.ok_or_else(|| {
                Error::Config("forgetting scores need a [filter] model".into())
            })?;
            let mut tc = train.resolve(1.0)?;
            tc.record_correctness = true;
            let spec = filter
                .model
                .spec_for(train_set.shape(), train_set.num_classes());
            forgetting_scores(train_set, &spec, &tc, *runs)
        }
        ScoreConfig::Logits { train } => {
            let filter = filter.ok_or_else(|| {
                Error::Config("logit scores need a [filter] model".into())
            })?;
            let tc = train.resolve(1.0)?;
            let spec = filter
                .model
                .spec_for(train_set.shape(), train_set.num_classes());
            let (model, _) = crate::nnet::train(init_model(&spec)?, train_set, &tc)?;
            logits_difficulty(&model, train_set)
        }
    }
}

/// Mean and sample standard deviation of per-seed accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl EvalSummary {
    fn from_accuracies(accuracies: Vec<f64>) -> Self {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let std = if accuracies.len() > 1 {
            (accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            accuracies,
            mean,
            std,
        }
    }
}

/// Train the evaluation model on a packed coreset once per seed and test
/// it; seed `i` shifts both the parameter init and the batch order by `i`.
pub fn evaluate_coreset(
    coreset: &PackedTensorSet,
    test_set: &LabeledDataset,
    model: &ModelSettings,
    train_config: &TrainConfig,
    seeds: usize,
) -> Result<EvalSummary> {
    if seeds == 0 {
        return Err(Error::Config("evaluation needs at least one seed".into()));
    }
    let train_set = LabeledDataset::from_packed(coreset)?;
    let mut accuracies = Vec::with_capacity(seeds);
    for i in 0..seeds as u64 {
        let spec = ModelSpec {
            init_seed: model.init_seed.wrapping_add(i),
            ..model.spec_for(train_set.shape(), train_set.num_classes())
        };
        let tc = TrainConfig {
            seed: train_config.seed.wrapping_add(i),
            ..train_config.clone()
        };
        let (trained, _) = train(init_model(&spec)?, &train_set, &tc)?;
        accuracies.push(accuracy(&trained, test_set)?);
    }
    Ok(EvalSummary::from_accuracies(accuracies))
}

/// Validated per-phase predictions from external files.
#[derive(Debug, Clone)]
pub struct ExternalPredictions {
    pub per_phase: Vec<Vec<(usize, usize)>>,
    pub provenance: String,
}

/// Parse per-phase prediction files (`index,pred[,logit_0..logit_{C-1}]`).
/// Index uniqueness and label range are checked here; coverage against
/// each phase's pool is checked when the run consumes them.
pub fn ingest_external_predictions(
    paths: &[PathBuf],
    dataset: &LabeledDataset,
) -> Result<ExternalPredictions> {
    let mut per_phase = Vec::with_capacity(paths.len());
    for path in paths {
        per_phase.push(read_prediction_file(path, dataset)?);
    }
    Ok(ExternalPredictions {
        per_phase,
        provenance: paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
    })
}

fn read_prediction_file(path: &Path, dataset: &LabeledDataset) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty prediction file"))?;
    let with_logits = match header {
        "index,pred" => false,
        h if h.starts_with("index,pred,logit_0") => true,
        other => {
            return Err(Error::format(
                path,
                format!("bad header `{other}`, expected `index,pred[,logit_*]`"),
            ))
        }
    };
    let c = dataset.num_classes();
    let mut seen = vec![false; dataset.len()];
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let idx: usize = fields
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::format(path, format!("line {}: bad index", lineno + 2)))?;
        let pred: usize = fields
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::format(path, format!("line {}: bad prediction", lineno + 2)))?;
        if idx >= dataset.len() {
            return Err(Error::format(path, format!("index {idx} out of range")));
        }
        if seen[idx] {
            return Err(Error::format(path, format!("duplicate index {idx}")));
        }
        if pred >= c {
            return Err(Error::format(
                path,
                format!("prediction {pred} out of range for {c} classes"),
            ));
        }
        let logit_count = fields.count();
        if with_logits && logit_count != c {
            return Err(Error::format(
                path,
                format!("line {}: {logit_count} logits for {c} classes", lineno + 2),
            ));
        }
        if !with_logits && logit_count != 0 {
            return Err(Error::format(
                path,
                format!("line {}: unexpected trailing fields", lineno + 2),
            ));
        }
        seen[idx] = true;
        out.push((idx, pred));
    }
    Ok(out)
}

/// Write one phase's predictions in the ingestible format.
pub fn write_predictions(covered: &[(usize, usize)], path: &Path) -> Result<()> {
    let mut text = String::from("index,pred\n");
    for &(id, pred) in covered {
        text.push_str(&format!("{id},{pred}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A full run's outputs.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub config_hash: String,
    pub mode: SelectionMode,
    pub records: Vec<PhaseRecord>,
    pub evaluation: EvalSummary,
    pub wall_time_secs: f64,
    pub manifest_path: PathBuf,
    pub coreset_path: PathBuf,
    pub report_path: PathBuf,
    /// Set when the distilled records are k-means surrogates rather than an
    /// externally distilled set.
    pub surrogate: bool,
}

/// Execute a full selection run: resolve data and scores, build the
/// initial synthetic set, drive the curriculum, export coreset + manifest,
/// and evaluate the result over the configured seeds.
pub fn run_ccfs(config: &PipelineConfig) -> Result<RunReport> {
    let started = Instant::now();
    let data_cfg = config.require_data()?;
    let score_cfg = config.require_scores()?;
    let sel = config.require_selection()?;
    let eval_cfg = config.require_evaluation()?;
    let run_cfg = config.require_run()?;

    let (train_all, test) = load_data(data_cfg)?;
    let resolved = resolve_holdout(
        train_all,
        test,
        run_cfg.holdout_fraction,
        run_cfg.holdout_seed,
    )?;
    let train_set = &resolved.train;
    let num_classes = train_set.num_classes();
    sel.config.validate(num_classes, train_set.len())?;

    let scores = obtain_scores(score_cfg, train_set, config.filter.as_ref())?;

    let budget = sel.config.ipc * num_classes;
    let ratio = budget as f64 / train_set.len() as f64;

    // External predictions replace the in-process filter when supplied.
    let external = if run_cfg.external_predictions.is_empty() {
        None
    } else {
        if run_cfg.external_predictions.len() != sel.config.num_phases {
            return Err(Error::Config(format!(
                "{} external prediction files for {} phases",
                run_cfg.external_predictions.len(),
                sel.config.num_phases
            )));
        }
        Some(ingest_external_predictions(
            &run_cfg.external_predictions,
            train_set,
        )?)
    };
    let filter_spec;
    let filter_train;
    let source = match &external {
        Some(ext) => FilterSource::External(&ext.per_phase),
        None => {
            let filter = config.require_filter()?;
            filter_spec = filter.model.spec_for(train_set.shape(), num_classes);
            filter_train = filter.train.resolve(ratio)?;
            FilterSource::Trained {
                spec: &filter_spec,
                train: &filter_train,
            }
        }
    };

    // Initial synthetic set.
    let distilled_total = ceil_tol(sel.config.distill_portion * budget as f64);
    let mut surrogate = false;
    let run: CurriculumRun = match sel.mode {
        SelectionMode::SelfEvolved => self_evolved(
            train_set,
            &scores,
            &sel.config,
            source,
            resolved.holdout.as_ref(),
        )?,
        SelectionMode::Curriculum => {
            let state = match run_cfg.distilled {
                DistilledSource::None => {
                    if distilled_total > 0 {
                        return Err(Error::Config(format!(
                            "distill_portion {} needs a distilled set; configure \
                             [pipeline] distilled = packed or surrogate",
                            sel.config.distill_portion
                        )));
                    }
                    CoresetState::empty(train_set)
                }
                DistilledSource::Packed => {
                    let path = run_cfg.distilled_path.as_ref().unwrap();
                    let set = load_packed(path)?;
                    if set.len() != distilled_total {
                        return Err(Error::Config(format!(
                            "distilled set holds {} records, distill_portion {} of budget \
                             {budget} needs {distilled_total}",
                            set.len(),
                            sel.config.distill_portion
                        )));
                    }
                    CoresetState::from_distilled(set, train_set)?
                }
                DistilledSource::Surrogate => {
                    surrogate = true;
                    if distilled_total == 0 {
                        CoresetState::empty(train_set)
                    } else {
                        if distilled_total % num_classes != 0 {
                            return Err(Error::Config(format!(
                                "surrogate mode needs a class-balanced distilled count; \
                                 {distilled_total} records over {num_classes} classes"
                            )));
                        }
                        let per_class = distilled_total / num_classes;
                        let set = kmeans_surrogate(
                            train_set,
                            per_class,
                            run_cfg.surrogate_iterations,
                            run_cfg.surrogate_seed,
                        )?;
                        CoresetState::from_distilled(set, train_set)?
                    }
                }
            };
            run_curriculum(
                train_set,
                &scores,
                state,
                &sel.config,
                source,
                resolved.holdout.as_ref(),
            )?
        }
    };

    fs::create_dir_all(&run_cfg.out_dir).map_err(|e| Error::io(&run_cfg.out_dir, e))?;
    if run_cfg.export_predictions {
        for (i, preds) in run.phase_predictions.iter().enumerate() {
            let path = run_cfg.out_dir.join(format!("predictions_phase_{}.csv", i + 1));
            write_predictions(preds, &path)?;
        }
    }

    let coreset = run.state.to_packed(train_set)?;
    let coreset_path = run_cfg.out_dir.join("coreset.cpts");
    save_packed(&coreset, &coreset_path)?;

    let distilled_provenance = match (sel.mode, run_cfg.distilled) {
        (SelectionMode::SelfEvolved, _) | (_, DistilledSource::None) => {
            DistilledProvenance::None
        }
        (_, DistilledSource::Packed) => DistilledProvenance::Packed {
            path: run_cfg.distilled_path.clone().unwrap(),
            count: distilled_total,
        },
        (_, DistilledSource::Surrogate) => DistilledProvenance::Surrogate {
            prototypes_per_class: if distilled_total == 0 {
                0
            } else {
                distilled_total / num_classes
            },
            iterations: run_cfg.surrogate_iterations,
            seed: run_cfg.surrogate_seed,
            count: distilled_total,
        },
    };
    let manifest = Manifest {
        mode: sel.mode,
        config: config.clone(),
        config_hash: config.hash(),
        distilled: distilled_provenance,
        score_source: scores.source().to_string(),
        score_provenance: scores.provenance().to_string(),
        initial_ids: run.state.initial_real.clone(),
        phases: run
            .records
            .iter()
            .map(|r| ManifestPhase {
                selected: r.selected.clone(),
                backfill: r.backfill_count,
            })
            .collect(),
    };
    let manifest_path = run_cfg.out_dir.join("manifest.txt");
    write_manifest(&manifest, &manifest_path)?;

    let eval_train = eval_cfg.train.resolve(ratio)?;
    let eval_target = resolved.holdout.as_ref().unwrap_or(train_set);
    let evaluation = evaluate_coreset(
        &coreset,
        eval_target,
        &eval_cfg.model,
        &eval_train,
        eval_cfg.seeds,
    )?;

    let report = RunReport {
        config_hash: config.hash(),
        mode: sel.mode,
        records: run.records,
        evaluation,
        wall_time_secs: started.elapsed().as_secs_f64(),
        manifest_path,
        coreset_path,
        report_path: run_cfg.out_dir.join("report.txt"),
        surrogate,
    };
    fs::write(&report.report_path, render_report(&report))
        .map_err(|e| Error::io(&report.report_path, e))?;
    Ok(report)
}

/// One analysis-experiment setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisSetting {
    /// Fixed window split: distill the easier portion, keep the harder
    /// portion as the real set.
    OneShot,
    /// Real set selected in two passes by a filter trained on the raw
    /// pre-distillation samples.
    TwoShot,
    /// Distill first, then select in two passes by a filter trained on the
    /// distilled records.
    Reverse,
}

impl AnalysisSetting {
    pub const ALL: [AnalysisSetting; 3] = [
        AnalysisSetting::OneShot,
        AnalysisSetting::TwoShot,
        AnalysisSetting::Reverse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AnalysisSetting::OneShot => "one_shot",
            AnalysisSetting::TwoShot => "two_shot",
            AnalysisSetting::Reverse => "reverse",
        }
    }
}

pub const SURROGATE_DISCLAIMER: &str = "distilled records are per-class k-means prototypes, \
     a structural surrogate, not optimization-based distillation";

/// Comparison table of the three selection settings over a window sweep.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub betas: Vec<f64>,
    /// `summaries[setting][beta]`, settings ordered as [`AnalysisSetting::ALL`].
    pub summaries: Vec<Vec<EvalSummary>>,
    pub config_hash: String,
    pub disclaimer: &'static str,
}

/// Run the three-setting comparison at each window offset. All settings
/// share the window, the surrogate-distilled records, the filter
/// configuration, and the evaluation seeds, so differences isolate the
/// selection mechanism.
pub fn analysis_experiment(config: &PipelineConfig) -> Result<AnalysisReport> {
    let data_cfg = config.require_data()?;
    let score_cfg = config.require_scores()?;
    let sel = config.require_selection()?;
    let filter = config.require_filter()?;
    let eval_cfg = config.require_evaluation()?;
    let run_cfg = config.require_run()?;

    let (train_all, test) = load_data(data_cfg)?;
    let resolved = resolve_holdout(
        train_all,
        test,
        run_cfg.holdout_fraction,
        run_cfg.holdout_seed,
    )?;
    let train_set = &resolved.train;
    let holdout = resolved.holdout.as_ref().ok_or_else(|| {
        Error::Config("settings comparison needs a test split or holdout_fraction > 0".into())
    })?;
    let num_classes = train_set.num_classes();
    sel.config.validate(num_classes, train_set.len())?;

    let scores = obtain_scores(score_cfg, train_set, config.filter.as_ref())?;
    let index = class_partition(train_set);
    let ipc = sel.config.ipc;
    let budget = ipc * num_classes;
    let ratio = budget as f64 / train_set.len() as f64;
    let filter_spec = filter.model.spec_for(train_set.shape(), num_classes);
    let filter_train = filter.train.resolve(ratio)?;
    let eval_train = eval_cfg.train.resolve(ratio)?;
    let pre_per_class = ceil_tol(sel.config.distill_portion * ipc as f64);
    if pre_per_class > ipc {
        return Err(Error::Config("distill_portion exceeds the window".into()));
    }

    let mut summaries: Vec<Vec<EvalSummary>> = vec![Vec::new(); 3];
    for &beta in &run_cfg.betas {
        // Difficulty-ranked window per class, then the easier portion
        // becomes the pre-distillation set.
        let mut harder_ids = Vec::new();
        let mut easier_per_class: Vec<Vec<usize>> = Vec::with_capacity(num_classes);
        for c in 0..num_classes {
            let members = index.class(c);
            if members.len() < ipc {
                return Err(Error::ClassTooSmall {
                    class: c,
                    have: members.len(),
                    need: ipc,
                });
            }
            let mut ranked = members.to_vec();
            ranked.sort_by(|&a, &b| {
                scores
                    .value(b)
                    .partial_cmp(&scores.value(a))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let start = (beta * (members.len() - ipc) as f64).round() as usize;
            let window = &ranked[start..start + ipc];
            harder_ids.extend_from_slice(&window[..ipc - pre_per_class]);
            easier_per_class.push(window[ipc - pre_per_class..].to_vec());
        }
        harder_ids.sort_unstable();

        let distilled = if pre_per_class > 0 {
            Some(kmeans_surrogate_from(
                train_set,
                &easier_per_class,
                run_cfg.surrogate_iterations,
            )?)
        } else {
            None
        };

        for (slot, setting) in AnalysisSetting::ALL.iter().enumerate() {
            let final_set = build_setting_coreset(
                *setting,
                train_set,
                &scores,
                &sel.config,
                &filter_spec,
                &filter_train,
                holdout,
                distilled.as_ref(),
                &easier_per_class,
                &harder_ids,
            )?;
            let summary = evaluate_coreset(
                &final_set,
                holdout,
                &eval_cfg.model,
                &eval_train,
                eval_cfg.seeds,
            )?;
            summaries[slot].push(summary);
        }
    }
    Ok(AnalysisReport {
        betas: run_cfg.betas.clone(),
        summaries,
        config_hash: config.hash(),
        disclaimer: SURROGATE_DISCLAIMER,
    })
}

/// Assemble one setting's final synthetic set.
#[allow(clippy::too_many_arguments)]
fn build_setting_coreset(
    setting: AnalysisSetting,
    train_set: &LabeledDataset,
    scores: &DifficultyScores,
    base_config: &SelectionConfig,
    filter_spec: &ModelSpec,
    filter_train: &TrainConfig,
    holdout: &LabeledDataset,
    distilled: Option<&PackedTensorSet>,
    easier_per_class: &[Vec<usize>],
    harder_ids: &[usize],
) -> Result<PackedTensorSet> {
    let two_shot = SelectionConfig {
        num_phases: 2,
        ..base_config.clone()
    };
    let source = FilterSource::Trained {
        spec: filter_spec,
        train: filter_train,
    };
    match setting {
        AnalysisSetting::OneShot => {
            // Distilled easier portion + fixed harder window portion.
            merge_final(train_set, distilled, harder_ids)
        }
        AnalysisSetting::TwoShot => {
            // Filter sees the raw pre-distillation samples; the selected
            // phases them replace the window's harder portion, and the
            // distilled records replace the pre-distillation samples.
            let initial: Vec<usize> = easier_per_class.iter().flatten().copied().collect();
            let state = CoresetState::from_initial_ids(initial, train_set)?;
            let run = run_curriculum(train_set, scores, state, &two_shot, source, Some(holdout))?;
            let selected: Vec<usize> = run.state.phases.iter().flatten().copied().collect();
            merge_final(train_set, distilled, &selected)
        }
        AnalysisSetting::Reverse => {
            let state = match distilled {
                Some(d) => CoresetState::from_distilled(d.clone(), train_set)?,
                None => CoresetState::empty(train_set),
            };
            let run = run_curriculum(train_set, scores, state, &two_shot, source, Some(holdout))?;
            run.state.to_packed(train_set)
        }
    }
}

fn merge_final(
    train_set: &LabeledDataset,
    distilled: Option<&PackedTensorSet>,
    real_ids: &[usize],
) -> Result<PackedTensorSet> {
    let mut ids = real_ids.to_vec();
    ids.sort_unstable();
    let real = if ids.is_empty() {
        None
    } else {
        Some(train_set.subset(&ids)?)
    };
    match (distilled, real) {
        (Some(d), Some(r)) => LabeledDataset::from_packed(d)?.concat(&r)?.to_packed(),
        (Some(d), None) => Ok(d.clone()),
        (None, Some(r)) => r.to_packed(),
        (None, None) => Err(Error::InfeasibleBudget("empty synthetic set".into())),
    }
}

/// Per-phase analytics recomputed from records and scores.
#[derive(Debug, Clone)]
pub struct PhaseAnalysis {
    pub rows: Vec<PhaseAnalysisRow>,
    /// Holdout (or pool) filter accuracy never decreases across phases.
    pub filter_accuracy_nondecreasing: bool,
    /// Mean selected difficulty strictly increases across phases.
    pub mean_difficulty_increasing: bool,
}

#[derive(Debug, Clone)]
pub struct PhaseAnalysisRow {
    pub phase: usize,
    pub synthetic_accuracy: Option<f64>,
    pub pool_accuracy: Option<f64>,
    pub holdout_accuracy: Option<f64>,
    pub selected_count: usize,
    pub backfill_count: usize,
    pub difficulty: Option<DifficultyStats>,
}

/// Recompute per-phase difficulty stats from the recorded ids and scores,
/// and flag the monotonicity trends the curriculum is expected to show.
pub fn phase_analysis(records: &[PhaseRecord], scores: &DifficultyScores) -> Result<PhaseAnalysis> {
    if records.is_empty() {
        return Err(Error::Manifest("no phase records to analyze".into()));
    }
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        rows.push(PhaseAnalysisRow {
            phase: r.phase,
            synthetic_accuracy: r.synthetic_accuracy,
            pool_accuracy: r.pool_accuracy,
            holdout_accuracy: r.holdout_accuracy,
            selected_count: r.selected.len(),
            backfill_count: r.backfill_count,
            difficulty: difficulty_stats(&r.selected, scores),
        });
    }
    let acc_series: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.holdout_accuracy.or(r.pool_accuracy))
        .collect();
    let filter_accuracy_nondecreasing =
        acc_series.windows(2).all(|w| w[1] >= w[0]) || acc_series.len() < 2;
    let means: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.difficulty.map(|d| d.mean))
        .collect();
    let mean_difficulty_increasing = means.windows(2).all(|w| w[1] > w[0]);
    Ok(PhaseAnalysis {
        rows,
        filter_accuracy_nondecreasing,
        mean_difficulty_increasing,
    })
}
