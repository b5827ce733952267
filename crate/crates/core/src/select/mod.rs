//! Selection mathematics: sliding-window initialization, coarse
//! misclassification filtering, fine difficulty-ranked selection, phase
//! budgets, and the curriculum driver.
//!
//! Every operation here is a pure function over immutable inputs. Scores
//! enter only through their ranks, with ties broken by ascending sample id,
//! so all outputs are invariant under positive rescaling of the scores.

mod kmeans;

pub use kmeans::{kmeans_surrogate, kmeans_surrogate_from};

use rand::prelude::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{class_partition, ClassIndex, LabeledDataset, PackedTensorSet};
use crate::nnet::{accuracy, init_model, predict, train, Model, ModelSpec, TrainConfig};
use crate::scores::DifficultyScores;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseMode {
    /// Keep samples the filter got wrong (the default strategy).
    Misclassified,
    /// Ablation: keep samples the filter got right.
    Classified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineMode {
    /// Lowest-difficulty candidates first (the default strategy).
    Simplest,
    Hardest,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackfillPolicy {
    /// Abort when a class's candidate pool is smaller than its budget.
    Error,
    /// Take every candidate, then fill from the easiest not-yet-selected
    /// samples of that class regardless of classification.
    EasiestRemaining,
}

/// The complete selection contract of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    /// Images per class: the per-class budget of the final synthetic set.
    pub ipc: usize,
    /// Fraction of the budget held by distilled records (window fraction
    /// for self-evolved runs).
    pub distill_portion: f64,
    /// Number of curriculum phases.
    pub num_phases: usize,
    /// Fractional offset of the difficulty window used for initialization.
    pub window_start: f64,
    pub coarse_mode: CoarseMode,
    pub fine_mode: FineMode,
    pub backfill: BackfillPolicy,
    pub seed: u64,
}

impl SelectionConfig {
    pub fn validate(&self, num_classes: usize, dataset_len: usize) -> Result<()> {
        if self.ipc < 1 {
            return Err(Error::Config("ipc must be >= 1".into()));
        }
        if self.ipc * num_classes > dataset_len {
            return Err(Error::Config(format!(
                "budget {} exceeds dataset size {dataset_len}",
                self.ipc * num_classes
            )));
        }
        if !(0.0..=1.0).contains(&self.distill_portion) {
            return Err(Error::Config("distill_portion must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.window_start) {
            return Err(Error::Config("window_start must lie in [0, 1]".into()));
        }
        if self.num_phases < 1 {
            return Err(Error::Config("num_phases must be >= 1".into()));
        }
        Ok(())
    }
}

/// Round `x` to the nearest integer when it sits within float noise of one,
/// otherwise take the ceiling. Budget arithmetic multiplies user fractions
/// by counts, so exact products like 0.4 * 500 must not creep upward.
pub(crate) fn ceil_tol(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

fn floor_tol(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.floor() as usize
    }
}

/// Per-class ids sorted descending by difficulty (ties toward the lower
/// id), with a contiguous window of `per_class` ids starting at
/// `round(window_start * (n_c - per_class))`. Returns all windows
/// concatenated, sorted ascending.
pub fn window_select(
    scores: &DifficultyScores,
    class_index: &ClassIndex,
    per_class: usize,
    window_start: f64,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(per_class * class_index.num_classes());
    for c in 0..class_index.num_classes() {
        let ids = class_index.class(c);
        if ids.len() < per_class {
            return Err(Error::ClassTooSmall {
                class: c,
                have: ids.len(),
                need: per_class,
            });
        }
        let mut ranked: Vec<usize> = ids.to_vec();
        // Descending score; ascending id on ties.
        ranked.sort_by(|&a, &b| {
            scores
                .value(b)
                .partial_cmp(&scores.value(a))
                .unwrap()
                .then(a.cmp(&b))
        });
        let start = (window_start * (ids.len() - per_class) as f64).round() as usize;
        out.extend_from_slice(&ranked[start..start + per_class]);
    }
    out.sort_unstable();
    Ok(out)
}

/// Candidate ids for one phase: samples whose prediction disagrees
/// (misclassified mode) or agrees (classified mode) with their label,
/// excluding already-selected ids. Returns ascending ids.
///
/// `predicted` must hold a prediction for every unexcluded id.
pub fn coarse_filter(
    predicted: &[Option<usize>],
    labels: &[usize],
    excluded: &[bool],
    mode: CoarseMode,
) -> Result<Vec<usize>> {
    debug_assert_eq!(predicted.len(), labels.len());
    debug_assert_eq!(excluded.len(), labels.len());
    let mut out = Vec::new();
    for id in 0..labels.len() {
        if excluded[id] {
            continue;
        }
        let pred = predicted[id].ok_or_else(|| {
            Error::Dataset(format!("prediction missing for unexcluded sample {id}"))
        })?;
        let keep = match mode {
            CoarseMode::Misclassified => pred != labels[id],
            CoarseMode::Classified => pred == labels[id],
        };
        if keep {
            out.push(id);
        }
    }
    Ok(out)
}

/// Pick `k_per_class` ids per class from `candidates` by difficulty rank.
/// Returns the selected ids (ascending) and the number of backfilled ids.
pub fn fine_select(
    candidates: &[usize],
    scores: &DifficultyScores,
    class_index: &ClassIndex,
    excluded: &[bool],
    k_per_class: usize,
    fine_mode: FineMode,
    backfill: BackfillPolicy,
    seed: u64,
) -> Result<(Vec<usize>, usize)> {
    let ks = vec![k_per_class; class_index.num_classes()];
    fine_select_budgets(
        candidates,
        scores,
        class_index,
        excluded,
        &ks,
        fine_mode,
        backfill,
        seed,
    )
}

/// [`fine_select`] with an individual budget per class, for runs whose
/// distilled set is class-imbalanced.
#[allow(clippy::too_many_arguments)]
pub fn fine_select_budgets(
    candidates: &[usize],
    scores: &DifficultyScores,
    class_index: &ClassIndex,
    excluded: &[bool],
    k_per_class: &[usize],
    fine_mode: FineMode,
    backfill: BackfillPolicy,
    seed: u64,
) -> Result<(Vec<usize>, usize)> {
    debug_assert!(candidates.windows(2).all(|w| w[0] < w[1]));
    let mut selected = Vec::new();
    let mut backfilled = 0usize;
    for c in 0..class_index.num_classes() {
        let k = k_per_class[c];
        if k == 0 {
            continue;
        }
        let members = class_index.class(c);
        let mut class_candidates = intersect_sorted(candidates, members);
        let is_candidate: std::collections::HashSet<usize> =
            class_candidates.iter().copied().collect();
        sort_by_score(&mut class_candidates, scores);

        let mut chosen: Vec<usize> = if class_candidates.len() >= k {
            match fine_mode {
                FineMode::Simplest => class_candidates[..k].to_vec(),
                FineMode::Hardest => class_candidates[class_candidates.len() - k..].to_vec(),
                FineMode::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(c as u64 + 1);
                    let mut pool = class_candidates.clone();
                    pool.shuffle(&mut rng);
                    pool.truncate(k);
                    pool
                }
            }
        } else {
            match backfill {
                BackfillPolicy::Error => {
                    return Err(Error::Shortfall {
                        class: c,
                        have: class_candidates.len(),
                        need: k,
                    });
                }
                BackfillPolicy::EasiestRemaining => {
                    let mut chosen = class_candidates.clone();
                    let mut pool: Vec<usize> = members
                        .iter()
                        .copied()
                        .filter(|&id| !excluded[id] && !is_candidate.contains(&id))
                        .collect();
                    sort_by_score(&mut pool, scores);
                    let need = k - chosen.len();
                    if pool.len() < need {
                        return Err(Error::InfeasibleBudget(format!(
                            "class {c} holds {} unselected samples for budget {k}",
                            class_candidates.len() + pool.len()
                        )));
                    }
                    backfilled += need;
                    chosen.extend_from_slice(&pool[..need]);
                    chosen
                }
            }
        };
        selected.append(&mut chosen);
    }
    selected.sort_unstable();
    Ok((selected, backfilled))
}

/// Ascending (score, id) order.
fn sort_by_score(ids: &mut [usize], scores: &DifficultyScores) {
    ids.sort_by(|&a, &b| {
        scores
            .value(a)
            .partial_cmp(&scores.value(b))
            .unwrap()
            .then(a.cmp(&b))
    });
}

/// Intersection of two ascending id lists.
fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Per-class real-sample budget of phase `phase` (1-based) when the
/// distilled records are spread evenly over the classes: every phase gets
/// `floor(ipc * (1 - distill_portion) / num_phases)` and the final phase
/// absorbs the remainder. Class-imbalanced distilled sets go through
/// [`phase_budgets`] instead.
pub fn phase_budget(
    ipc: usize,
    distill_portion: f64,
    num_classes: usize,
    num_phases: usize,
    phase: usize,
) -> Result<usize> {
    if phase < 1 || phase > num_phases {
        return Err(Error::Config(format!(
            "phase {phase} outside 1..={num_phases}"
        )));
    }
    if !(0.0..=1.0).contains(&distill_portion) {
        return Err(Error::Config("distill_portion must lie in [0, 1]".into()));
    }
    let distilled_total = ceil_tol(distill_portion * (ipc * num_classes) as f64);
    if distilled_total > ipc * num_classes {
        return Err(Error::InfeasibleBudget(format!(
            "distilled count {distilled_total} exceeds budget {}",
            ipc * num_classes
        )));
    }
    if distilled_total % num_classes != 0 {
        return Err(Error::Config(format!(
            "distilled count {distilled_total} does not divide evenly over {num_classes} \
             classes; use per-class budgets"
        )));
    }
    let remaining = ipc - distilled_total / num_classes;
    let base = floor_tol(ipc as f64 * (1.0 - distill_portion) / num_phases as f64);
    debug_assert_eq!(base, remaining / num_phases);
    if phase < num_phases {
        Ok(base)
    } else {
        Ok(remaining - (num_phases - 1) * base)
    }
}

/// Per-phase, per-class budgets given the records already held per class
/// (distilled plus any initial window). `result[j][c]` is phase `j+1`'s
/// budget for class `c`.
pub fn phase_budgets(
    ipc: usize,
    initial_per_class: &[usize],
    num_phases: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut budgets = vec![vec![0usize; initial_per_class.len()]; num_phases];
    for (c, &held) in initial_per_class.iter().enumerate() {
        if held > ipc {
            return Err(Error::InfeasibleBudget(format!(
                "class {c} already holds {held} records for an ipc of {ipc}"
            )));
        }
        let remaining = ipc - held;
        let base = remaining / num_phases;
        for row in budgets.iter_mut().take(num_phases - 1) {
            row[c] = base;
        }
        budgets[num_phases - 1][c] = remaining - (num_phases - 1) * base;
    }
    Ok(budgets)
}

/// The evolving synthetic set: distilled records plus per-phase lists of
/// selected real sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct CoresetState {
    /// Distilled (or surrogate) records; absent for pure selection runs.
    pub distilled: Option<PackedTensorSet>,
    /// Window-selected real ids seeding a self-evolved run, ascending.
    pub initial_real: Vec<usize>,
    /// Per-phase selected ids, each ascending, pairwise disjoint.
    pub phases: Vec<Vec<usize>>,
    excluded: Vec<bool>,
}

impl CoresetState {
    pub fn from_distilled(distilled: PackedTensorSet, dataset: &LabeledDataset) -> Result<Self> {
        if distilled.shape() != dataset.shape() {
            return Err(Error::ShapeMismatch(format!(
                "distilled shape {:?} does not match dataset {:?}",
                distilled.shape(),
                dataset.shape()
            )));
        }
        if distilled.num_classes() != dataset.num_classes() {
            return Err(Error::ShapeMismatch(
                "distilled class count does not match dataset".into(),
            ));
        }
        Ok(Self {
            distilled: Some(distilled),
            initial_real: Vec::new(),
            phases: Vec::new(),
            excluded: vec![false; dataset.len()],
        })
    }

    pub fn from_initial_ids(mut ids: Vec<usize>, dataset: &LabeledDataset) -> Result<Self> {
        ids.sort_unstable();
        let mut excluded = vec![false; dataset.len()];
        for &id in &ids {
            if id >= dataset.len() {
                return Err(Error::Dataset(format!("initial id {id} out of range")));
            }
            if excluded[id] {
                return Err(Error::Dataset(format!("initial id {id} repeated")));
            }
            excluded[id] = true;
        }
        Ok(Self {
            distilled: None,
            initial_real: ids,
            phases: Vec::new(),
            excluded,
        })
    }

    pub fn empty(dataset: &LabeledDataset) -> Self {
        Self {
            distilled: None,
            initial_real: Vec::new(),
            phases: Vec::new(),
            excluded: vec![false; dataset.len()],
        }
    }

    /// Rebuild a finished state from recorded parts (manifest replay),
    /// re-checking disjointness and id ranges.
    pub fn reconstruct(
        distilled: Option<PackedTensorSet>,
        initial_real: Vec<usize>,
        phases: Vec<Vec<usize>>,
        dataset: &LabeledDataset,
    ) -> Result<Self> {
        let mut state = match distilled {
            Some(d) => Self::from_distilled(d, dataset)?,
            None => Self::empty(dataset),
        };
        for &id in &initial_real {
            if id >= dataset.len() {
                return Err(Error::Dataset(format!("initial id {id} out of range")));
            }
            if state.excluded[id] {
                return Err(Error::Dataset(format!("id {id} recorded twice")));
            }
            state.excluded[id] = true;
        }
        state.initial_real = initial_real;
        state.initial_real.sort_unstable();
        for phase in phases {
            for &id in &phase {
                if id >= dataset.len() {
                    return Err(Error::Dataset(format!("phase id {id} out of range")));
                }
                if state.excluded[id] {
                    return Err(Error::Dataset(format!("id {id} recorded twice")));
                }
                state.excluded[id] = true;
            }
            state.phases.push(phase);
        }
        Ok(state)
    }

    /// Ids no longer eligible for selection (initial window plus all
    /// phases).
    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    pub fn distilled_len(&self) -> usize {
        self.distilled.as_ref().map_or(0, |d| d.len())
    }

    /// Real ids held so far.
    pub fn selected_len(&self) -> usize {
        self.initial_real.len() + self.phases.iter().map(|p| p.len()).sum::<usize>()
    }

    /// Total records of the synthetic set (distilled + real).
    pub fn total_len(&self) -> usize {
        self.distilled_len() + self.selected_len()
    }

    /// Records already held per class before any curriculum phase.
    pub fn initial_per_class(&self, dataset: &LabeledDataset) -> Vec<usize> {
        let mut counts = self
            .distilled
            .as_ref()
            .map_or_else(|| vec![0; dataset.num_classes()], |d| d.per_class_counts());
        for &id in &self.initial_real {
            counts[dataset.label(id)] += 1;
        }
        counts
    }

    fn push_phase(&mut self, ids: Vec<usize>) {
        for &id in &ids {
            debug_assert!(!self.excluded[id]);
            self.excluded[id] = true;
        }
        self.phases.push(ids);
    }

    /// All real ids in materialization order: initial window, then each
    /// phase ascending.
    pub fn real_ids(&self) -> Vec<usize> {
        let mut ids = self.initial_real.clone();
        for phase in &self.phases {
            ids.extend_from_slice(phase);
        }
        ids
    }

    /// Build the synthetic set as a trainable dataset: distilled records
    /// first, then the selected real samples. Empty states yield `None`.
    pub fn materialize(&self, dataset: &LabeledDataset) -> Result<Option<LabeledDataset>> {
        let real_ids = self.real_ids();
        let real = if real_ids.is_empty() {
            None
        } else {
            Some(dataset.subset(&real_ids)?)
        };
        let distilled = self
            .distilled
            .as_ref()
            .map(LabeledDataset::from_packed)
            .transpose()?;
        match (distilled, real) {
            (Some(d), Some(r)) => d.concat(&r).map(Some),
            (Some(d), None) => Ok(Some(d)),
            (None, Some(r)) => Ok(Some(r)),
            (None, None) => Ok(None),
        }
    }

    /// Export the final coreset: distilled records followed by the selected
    /// real samples, as a packed record set.
    pub fn to_packed(&self, dataset: &LabeledDataset) -> Result<PackedTensorSet> {
        let materialized = self.materialize(dataset)?.ok_or_else(|| {
            Error::InfeasibleBudget("coreset is empty, nothing to export".into())
        })?;
        materialized.to_packed()
    }
}

/// Distribution summary of the difficulty of a set of selected ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Quartiles by linear interpolation over the sorted values.
pub fn difficulty_stats(ids: &[usize], scores: &DifficultyScores) -> Option<DifficultyStats> {
    if ids.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = ids.iter().map(|&i| scores.value(i)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let h = (v.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some(DifficultyStats {
        min: v[0],
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

/// Diagnostics of one curriculum phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    /// 1-based phase index.
    pub phase: usize,
    /// Filter accuracy on the synthetic set it was trained on; absent in
    /// external-prediction mode or when the phase started from nothing.
    pub synthetic_accuracy: Option<f64>,
    /// Filter accuracy over the prediction pool (the full training set for
    /// in-process filters).
    pub pool_accuracy: Option<f64>,
    /// Filter accuracy on the held-out set, when one was supplied.
    pub holdout_accuracy: Option<f64>,
    /// Selected ids, ascending.
    pub selected: Vec<usize>,
    /// Difficulty distribution of the selected ids; absent when the phase
    /// selected nothing.
    pub difficulty: Option<DifficultyStats>,
    pub backfill_count: usize,
}

/// Where a phase's predictions come from.
pub enum FilterSource<'a> {
    /// Train the filter from scratch on the current synthetic set. Phase
    /// `j` derives its seeds as `init_seed + j` / `train seed + j`.
    Trained {
        spec: &'a ModelSpec,
        train: &'a TrainConfig,
    },
    /// Pre-computed predictions, one `(id, predicted_label)` list per
    /// phase. Each list must cover exactly the phase's unexcluded pool.
    External(&'a [Vec<(usize, usize)>]),
}

/// Result of a curriculum run.
pub struct CurriculumRun {
    pub state: CoresetState,
    pub records: Vec<PhaseRecord>,
    /// Covered `(id, predicted_label)` pairs per phase, for export.
    pub phase_predictions: Vec<Vec<(usize, usize)>>,
    /// The filter trained in the final phase, when filters run in-process.
    pub last_filter: Option<Model>,
}

/// Drive the curriculum: for each phase, train (or look up) the filter on
/// the current synthetic set, filter the unexcluded pool coarsely, select
/// finely against the per-class budget, and grow the state.
#[allow(clippy::too_many_arguments)]
pub fn run_curriculum(
    dataset: &LabeledDataset,
    scores: &DifficultyScores,
    initial: CoresetState,
    config: &SelectionConfig,
    source: FilterSource<'_>,
    holdout: Option<&LabeledDataset>,
) -> Result<CurriculumRun> {
    config.validate(dataset.num_classes(), dataset.len())?;
    if scores.len() != dataset.len() {
        return Err(Error::Scores(format!(
            "{} scores for {} samples",
            scores.len(),
            dataset.len()
        )));
    }

    let mut state = initial;
    let initial_counts = state.initial_per_class(dataset);
    let budgets = phase_budgets(config.ipc, &initial_counts, config.num_phases)?;
    let class_index = class_partition(dataset);
    let target = config.ipc * dataset.num_classes();

    let mut records = Vec::new();
    let mut phase_predictions = Vec::new();
    let mut last_filter = None;

    // Nothing left to select: the initial set already fills the budget.
    let remaining: usize = budgets.iter().flatten().sum();
    if remaining > 0 {
        for phase in 1..=config.num_phases {
            let synthetic = state.materialize(dataset)?;
            let (predicted, synthetic_accuracy, holdout_accuracy) = match &source {
                FilterSource::Trained { spec, train: tc } => {
                    let (filter, synth_acc) =
                        train_phase_filter(spec, tc, synthetic.as_ref(), phase)?;
                    let preds = predict(&filter, dataset, false)?;
                    let holdout_acc = match holdout {
                        Some(h) => Some(accuracy(&filter, h)?),
                        None => None,
                    };
                    let predicted: Vec<Option<usize>> =
                        preds.labels.iter().map(|&l| Some(l)).collect();
                    last_filter = Some(filter);
                    (predicted, synth_acc, holdout_acc)
                }
                FilterSource::External(files) => {
                    let covered = files.get(phase - 1).ok_or_else(|| Error::Coverage {
                        phase,
                        msg: format!("no prediction set for phase {phase}"),
                    })?;
                    let predicted =
                        external_phase_predictions(covered, dataset.len(), state.excluded(), phase)?;
                    (predicted, None, None)
                }
            };

            let pool_accuracy = covered_accuracy(&predicted, dataset.labels());
            // Exported predictions carry exactly the phase's unexcluded
            // pool, which is what an external filter must supply.
            phase_predictions.push(
                predicted
                    .iter()
                    .enumerate()
                    .filter(|&(id, _)| !state.excluded()[id])
                    .filter_map(|(id, p)| p.map(|p| (id, p)))
                    .collect(),
            );

            let candidates =
                coarse_filter(&predicted, dataset.labels(), state.excluded(), config.coarse_mode)?;
            let (selected, backfill_count) = fine_select_budgets(
                &candidates,
                scores,
                &class_index,
                state.excluded(),
                &budgets[phase - 1],
                config.fine_mode,
                config.backfill,
                config.seed.wrapping_add(phase as u64),
            )?;
            let difficulty = difficulty_stats(&selected, scores);
            records.push(PhaseRecord {
                phase,
                synthetic_accuracy,
                pool_accuracy,
                holdout_accuracy,
                selected: selected.clone(),
                difficulty,
                backfill_count,
            });
            state.push_phase(selected);
        }
    }

    if state.total_len() != target {
        return Err(Error::InfeasibleBudget(format!(
            "final synthetic set holds {} records, budget is {target}",
            state.total_len()
        )));
    }
    Ok(CurriculumRun {
        state,
        records,
        phase_predictions,
        last_filter,
    })
}

/// Train the phase filter from scratch on the synthetic set. An empty
/// synthetic set (a zero-portion start) leaves the filter at its random
/// initialization.
fn train_phase_filter(
    spec: &ModelSpec,
    config: &TrainConfig,
    synthetic: Option<&LabeledDataset>,
    phase: usize,
) -> Result<(Model, Option<f64>)> {
    let phase_spec = ModelSpec {
        init_seed: spec.init_seed.wrapping_add(phase as u64),
        ..spec.clone()
    };
    let model = init_model(&phase_spec)?;
    match synthetic {
        Some(synth) => {
            let phase_config = TrainConfig {
                seed: config.seed.wrapping_add(phase as u64),
                ..config.clone()
            };
            let (trained, _) = train(model, synth, &phase_config)?;
            let acc = accuracy(&trained, synth)?;
            Ok((trained, Some(acc)))
        }
        None => Ok((model, None)),
    }
}

/// Validate an external prediction list against the phase's pool and
/// spread it over a full-length vector.
fn external_phase_predictions(
    covered: &[(usize, usize)],
    n: usize,
    excluded: &[bool],
    phase: usize,
) -> Result<Vec<Option<usize>>> {
    let mut predicted = vec![None; n];
    for &(id, pred) in covered {
        if id >= n {
            return Err(Error::Coverage {
                phase,
                msg: format!("prediction for out-of-range sample {id}"),
            });
        }
        if excluded[id] {
            return Err(Error::Coverage {
                phase,
                msg: format!("prediction for already-selected sample {id}"),
            });
        }
        if predicted[id].is_some() {
            return Err(Error::Coverage {
                phase,
                msg: format!("duplicate prediction for sample {id}"),
            });
        }
        predicted[id] = Some(pred);
    }
    for id in 0..n {
        if !excluded[id] && predicted[id].is_none() {
            return Err(Error::Coverage {
                phase,
                msg: format!("no prediction for unexcluded sample {id}"),
            });
        }
    }
    Ok(predicted)
}

fn covered_accuracy(predicted: &[Option<usize>], labels: &[usize]) -> Option<f64> {
    let mut covered = 0usize;
    let mut correct = 0usize;
    for (p, &l) in predicted.iter().zip(labels) {
        if let Some(p) = p {
            covered += 1;
            correct += (*p == l) as usize;
        }
    }
    (covered > 0).then(|| correct as f64 / covered as f64)
}

/// Selection-only variant: seed the coreset with a difficulty window of
/// `ceil(distill_portion * ipc)` real samples per class, then expand it
/// through the curriculum with no distilled records.
pub fn self_evolved(
    dataset: &LabeledDataset,
    scores: &DifficultyScores,
    config: &SelectionConfig,
    source: FilterSource<'_>,
    holdout: Option<&LabeledDataset>,
) -> Result<CurriculumRun> {
    config.validate(dataset.num_classes(), dataset.len())?;
    let window = ceil_tol(config.distill_portion * config.ipc as f64);
    let state = if window > 0 {
        let class_index = class_partition(dataset);
        let ids = window_select(scores, &class_index, window, config.window_start)?;
        CoresetState::from_initial_ids(ids, dataset)?
    } else {
        CoresetState::empty(dataset)
    };
    run_curriculum(dataset, scores, state, config, source, holdout)
}
