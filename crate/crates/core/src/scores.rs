//! Per-sample difficulty scores.
//!
//! All sources share one convention: higher means harder. Selection never
//! branches on where a score came from, so forgetting counts, negated
//! filter logits, and externally computed scores are interchangeable.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::LabeledDataset;
use crate::nnet::{init_model, predict, train, Model, ModelSpec, TrainConfig, TrainHistory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreSource {
    Forgetting,
    Logits,
    External,
}

impl std::fmt::Display for ScoreSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScoreSource::Forgetting => write!(f, "forgetting"),
            ScoreSource::Logits => write!(f, "logits"),
            ScoreSource::External => write!(f, "external"),
        }
    }
}

/// Difficulty values for every sample of a dataset, higher = harder.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyScores {
    values: Vec<f64>,
    source: ScoreSource,
    /// Free-form origin note: seeds and epochs for computed scores, the
    /// file path for ingested ones.
    provenance: String,
}

impl DifficultyScores {
    pub fn new(values: Vec<f64>, source: ScoreSource, provenance: String) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Scores(format!("non-finite score {bad}")));
        }
        if values.is_empty() {
            return Err(Error::Scores("score vector is empty".into()));
        }
        Ok(Self {
            values,
            source,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn source(&self) -> ScoreSource {
        self.source
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }
}

/// Forgetting events averaged over independent training runs.
///
/// A forgetting event is a correct-to-incorrect transition between
/// consecutive epoch bitmaps. Samples never classified correctly within a
/// run receive the sentinel value `epochs`, which sorts above any possible
/// event count. Run `r` derives its seeds as `init_seed + r` and
/// `train seed + r`.
pub fn forgetting_scores(
    dataset: &LabeledDataset,
    spec: &ModelSpec,
    train_config: &TrainConfig,
    num_runs: usize,
) -> Result<DifficultyScores> {
    let (scores, _) = forgetting_scores_with_history(dataset, spec, train_config, num_runs)?;
    Ok(scores)
}

/// As [`forgetting_scores`], also returning each run's epoch bitmaps so the
/// event counting can be replayed independently.
pub fn forgetting_scores_with_history(
    dataset: &LabeledDataset,
    spec: &ModelSpec,
    train_config: &TrainConfig,
    num_runs: usize,
) -> Result<(DifficultyScores, Vec<TrainHistory>)> {
    if num_runs < 1 {
        return Err(Error::Config("num_runs must be >= 1".into()));
    }
    if !train_config.record_correctness {
        return Err(Error::Config(
            "forgetting scores require record_correctness".into(),
        ));
    }
    let n = dataset.len();
    let mut sums = vec![0.0f64; n];
    let mut histories = Vec::with_capacity(num_runs);
    for run in 0..num_runs as u64 {
        let run_spec = ModelSpec {
            init_seed: spec.init_seed.wrapping_add(run),
            ..spec.clone()
        };
        let run_config = TrainConfig {
            seed: train_config.seed.wrapping_add(run),
            ..train_config.clone()
        };
        let (_, history) = train(init_model(&run_spec)?, dataset, &run_config)?;
        for (id, sum) in sums.iter_mut().enumerate() {
            *sum += events_for_sample(&history.correctness, id, train_config.epochs) as f64;
        }
        histories.push(history);
    }
    let values: Vec<f64> = sums.iter().map(|s| s / num_runs as f64).collect();
    let provenance = format!(
        "forgetting: runs={num_runs} epochs={} init_seed={} train_seed={}",
        train_config.epochs, spec.init_seed, train_config.seed
    );
    Ok((
        DifficultyScores::new(values, ScoreSource::Forgetting, provenance)?,
        histories,
    ))
}

/// Event count of one sample in one run; `epochs` for never-learned samples.
fn events_for_sample(bitmaps: &[Vec<bool>], id: usize, epochs: usize) -> usize {
    let mut learned = false;
    let mut events = 0;
    let mut prev = false;
    for bitmap in bitmaps {
        let cur = bitmap[id];
        learned |= cur;
        if prev && !cur {
            events += 1;
        }
        prev = cur;
    }
    if learned {
        events
    } else {
        epochs
    }
}

/// Difficulty as the negated true-class logit of a trained model, so that
/// smaller logits (harder samples) map to larger scores.
pub fn logits_difficulty(model: &Model, dataset: &LabeledDataset) -> Result<DifficultyScores> {
    let preds = predict(model, dataset, false)?;
    let values: Vec<f64> = preds.true_class_logit.iter().map(|&l| -l).collect();
    DifficultyScores::new(
        values,
        ScoreSource::Logits,
        format!("logits: init_seed={}", model.spec().init_seed),
    )
}

/// Read a score file: header `index,score`, then one `id,value` record per
/// sample, ids 0..N-1 each exactly once.
pub fn read_scores(path: &Path, expected_n: usize) -> Result<DifficultyScores> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("index,score") => {}
        other => {
            return Err(Error::Scores(format!(
                "missing `index,score` header, found {other:?}"
            )))
        }
    }
    let mut values = vec![0.0f64; expected_n];
    let mut seen = vec![false; expected_n];
    let mut count = 0usize;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (idx, val) = line.split_once(',').ok_or_else(|| {
            Error::Scores(format!("line {}: expected `index,score`", lineno + 2))
        })?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::Scores(format!("line {}: bad index `{idx}`", lineno + 2)))?;
        let val: f64 = val
            .trim()
            .parse()
            .map_err(|_| Error::Scores(format!("line {}: bad score `{val}`", lineno + 2)))?;
        if idx >= expected_n {
            return Err(Error::Scores(format!(
                "index {idx} out of range for {expected_n} samples"
            )));
        }
        if seen[idx] {
            return Err(Error::Scores(format!("duplicate index {idx}")));
        }
        if !val.is_finite() {
            return Err(Error::Scores(format!("non-finite score at index {idx}")));
        }
        seen[idx] = true;
        values[idx] = val;
        count += 1;
    }
    if count != expected_n {
        return Err(Error::Scores(format!(
            "{count} scores for {expected_n} samples"
        )));
    }
    DifficultyScores::new(
        values,
        ScoreSource::External,
        format!("external: {}", path.display()),
    )
}

/// Write a score file in the format [`read_scores`] expects. Values are
/// printed with enough digits to round-trip exactly.
pub fn write_scores(scores: &DifficultyScores, path: &Path) -> Result<()> {
    let mut out = String::from("index,score\n");
    for (i, v) in scores.values.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
