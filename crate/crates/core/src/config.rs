//! Typed run configuration and its text format.
//!
//! A config file holds `[data]`, `[scores]`, `[selection]`, `[filter]`,
//! `[evaluation]`, and `[pipeline]` sections of `key = value` lines.
//! Sections are optional as a whole — each command demands the ones it
//! needs — but inside a present section unknown keys are hard errors and
//! every value is range-checked before any work starts.
//!
//! The canonical rendering (fixed section and key order, defaults
//! materialized) is what gets fingerprinted into every output artifact.

use std::path::{Path, PathBuf};

use crate::nnet::{Architecture, Augmentation, LrSchedule, ModelSpec, TrainConfig};
use crate::select::{BackfillPolicy, CoarseMode, FineMode, SelectionConfig};
use crate::textfmt::{content_hash, Sections};
use crate::{Error, Result};

const SECTION_ORDER: [&str; 6] = [
    "data",
    "scores",
    "selection",
    "filter",
    "evaluation",
    "pipeline",
];

#[derive(Debug, Clone, PartialEq)]
pub enum DataConfig {
    Blobs {
        classes: usize,
        per_class: usize,
        dim: usize,
        center_spread: f64,
        noise_std: f64,
        seed: u64,
        /// Extra per-class samples generated as a held-out test split.
        test_per_class: usize,
    },
    Cifar10 {
        dir: PathBuf,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
    },
    Packed {
        train: PathBuf,
        test: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreConfig {
    Forgetting { runs: usize, train: TrainSettings },
    Logits { train: TrainSettings },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    Curriculum,
    SelfEvolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSettings {
    pub mode: SelectionMode,
    pub config: SelectionConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Small-image defaults: lr 0.1, momentum 0.9, weight decay 5e-4,
    /// cosine schedule, flip-crop augmentation, epochs and batch size
    /// resolved from the compression ratio.
    CifarSmall,
    /// Larger-image defaults: epochs 100, batch 64, lr 0.2, momentum 0.9,
    /// weight decay 1e-4, cosine schedule, flip-crop augmentation.
    TinyLike,
}

/// Trainer settings as configured: a preset fills whatever the file leaves
/// unset; explicit keys always win. Resolution happens against the run's
/// compression ratio.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainSettings {
    pub preset: Option<Preset>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub base_lr: Option<f64>,
    pub momentum: Option<f64>,
    pub weight_decay: Option<f64>,
    pub lr_schedule: Option<LrSchedule>,
    pub augmentation: Option<Augmentation>,
    pub seed: u64,
}

impl TrainSettings {
    /// Concrete trainer config at the given compression ratio
    /// (`budget / dataset size`).
    pub fn resolve(&self, ratio: f64) -> Result<TrainConfig> {
        let preset = self.preset.map(|p| preset_defaults(p, ratio));
        let pick = |explicit: Option<usize>, from_preset: Option<usize>, name: &str| {
            explicit
                .or(from_preset)
                .ok_or_else(|| Error::Config(format!("missing `{name}` (no preset supplies it)")))
        };
        let pickf = |explicit: Option<f64>, from_preset: Option<f64>, name: &str| {
            explicit
                .or(from_preset)
                .ok_or_else(|| Error::Config(format!("missing `{name}` (no preset supplies it)")))
        };
        let config = TrainConfig {
            epochs: pick(self.epochs, preset.as_ref().map(|p| p.epochs), "epochs")?,
            batch_size: pick(
                self.batch_size,
                preset.as_ref().map(|p| p.batch_size),
                "batch_size",
            )?,
            base_lr: pickf(self.base_lr, preset.as_ref().map(|p| p.base_lr), "base_lr")?,
            momentum: pickf(
                self.momentum,
                preset.as_ref().map(|p| p.momentum),
                "momentum",
            )?,
            weight_decay: pickf(
                self.weight_decay,
                preset.as_ref().map(|p| p.weight_decay),
                "weight_decay",
            )?,
            lr_schedule: self
                .lr_schedule
                .or(preset.as_ref().map(|p| p.lr_schedule))
                .unwrap_or(LrSchedule::Cosine),
            augmentation: self
                .augmentation
                .or(preset.as_ref().map(|p| p.augmentation))
                .unwrap_or(Augmentation::None),
            seed: self.seed,
            record_correctness: false,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Ratio-keyed defaults shipped as named presets.
fn preset_defaults(preset: Preset, ratio: f64) -> TrainConfig {
    match preset {
        Preset::CifarSmall => {
            let epochs = if ratio <= 0.10 {
                500
            } else if ratio <= 0.20 {
                250
            } else {
                200
            };
            let batch_size = if ratio <= 0.05 {
                32
            } else if ratio <= 0.20 {
                64
            } else {
                128
            };
            TrainConfig {
                epochs,
                batch_size,
                base_lr: 0.1,
                momentum: 0.9,
                weight_decay: 5e-4,
                lr_schedule: LrSchedule::Cosine,
                augmentation: Augmentation::FlipCrop,
                seed: 0,
                record_correctness: false,
            }
        }
        Preset::TinyLike => TrainConfig {
            epochs: 100,
            batch_size: 64,
            base_lr: 0.2,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_schedule: LrSchedule::Cosine,
            augmentation: Augmentation::FlipCrop,
            seed: 0,
            record_correctness: false,
        },
    }
}

/// Model architecture as configured; the input shape and class count come
/// from the dataset at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub architecture: Architecture,
    pub init_seed: u64,
}

impl ModelSettings {
    pub fn spec_for(&self, shape: &[usize], num_classes: usize) -> ModelSpec {
        ModelSpec {
            architecture: self.architecture.clone(),
            input_shape: shape.to_vec(),
            num_classes,
            init_seed: self.init_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub model: ModelSettings,
    pub train: TrainSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub model: ModelSettings,
    pub train: TrainSettings,
    /// Number of evaluation seeds (>= 1).
    pub seeds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistilledSource {
    None,
    Packed,
    Surrogate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub distilled: DistilledSource,
    pub distilled_path: Option<PathBuf>,
    pub surrogate_iterations: usize,
    pub surrogate_seed: u64,
    pub export_predictions: bool,
    pub external_predictions: Vec<PathBuf>,
    pub holdout_fraction: f64,
    pub holdout_seed: u64,
    /// Coreset file consumed by the evaluate command.
    pub coreset: Option<PathBuf>,
    /// Window offsets swept by the settings-comparison command.
    pub betas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("."),
            distilled: DistilledSource::None,
            distilled_path: None,
            surrogate_iterations: 10,
            surrogate_seed: 0,
            export_predictions: false,
            external_predictions: Vec::new(),
            holdout_fraction: 0.1,
            holdout_seed: 0,
            coreset: None,
            betas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

/// The fully parsed configuration. Sections a command does not need may be
/// absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub data: Option<DataConfig>,
    pub scores: Option<ScoreConfig>,
    pub selection: Option<SelectionSettings>,
    pub filter: Option<FilterConfig>,
    pub evaluation: Option<EvalConfig>,
    pub run: Option<RunConfig>,
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_sections(&Sections::parse(text)?)
    }

    pub fn from_sections(sections: &Sections) -> Result<Self> {
        for name in sections.section_names() {
            if !SECTION_ORDER.contains(&name) {
                return Err(Error::Config(format!("unknown section [{name}]")));
            }
        }
        Ok(Self {
            data: sections
                .section("data")
                .map(|p| parse_data(p))
                .transpose()?,
            scores: sections
                .section("scores")
                .map(|p| parse_scores(p))
                .transpose()?,
            selection: sections
                .section("selection")
                .map(|p| parse_selection(p))
                .transpose()?,
            filter: sections
                .section("filter")
                .map(|p| parse_filter(p))
                .transpose()?,
            evaluation: sections
                .section("evaluation")
                .map(|p| parse_evaluation(p))
                .transpose()?,
            run: sections
                .section("pipeline")
                .map(|p| parse_run(p))
                .transpose()?,
        })
    }

    pub fn require_data(&self) -> Result<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("missing [data] section".into()))
    }

    pub fn require_scores(&self) -> Result<&ScoreConfig> {
        self.scores
            .as_ref()
            .ok_or_else(|| Error::Config("missing [scores] section".into()))
    }

    pub fn require_selection(&self) -> Result<&SelectionSettings> {
        self.selection
            .as_ref()
            .ok_or_else(|| Error::Config("missing [selection] section".into()))
    }

    pub fn require_filter(&self) -> Result<&FilterConfig> {
        self.filter
            .as_ref()
            .ok_or_else(|| Error::Config("missing [filter] section".into()))
    }

    pub fn require_evaluation(&self) -> Result<&EvalConfig> {
        self.evaluation
            .as_ref()
            .ok_or_else(|| Error::Config("missing [evaluation] section".into()))
    }

    pub fn require_run(&self) -> Result<&RunConfig> {
        self.run
            .as_ref()
            .ok_or_else(|| Error::Config("missing [pipeline] section".into()))
    }

    /// Deterministic rendering with defaults materialized.
    pub fn canonical_text(&self) -> String {
        self.canonical_sections().render()
    }

    /// Content hash of the canonical rendering.
    pub fn hash(&self) -> String {
        content_hash(&self.canonical_text())
    }

    pub fn canonical_sections(&self) -> Sections {
        let mut s = Sections::new();
        if let Some(data) = &self.data {
            render_data(&mut s, data);
        }
        if let Some(scores) = &self.scores {
            render_scores(&mut s, scores);
        }
        if let Some(sel) = &self.selection {
            render_selection(&mut s, sel);
        }
        if let Some(filter) = &self.filter {
            render_model_train(&mut s, "filter", &filter.model, &filter.train, None);
        }
        if let Some(eval) = &self.evaluation {
            render_model_train(&mut s, "evaluation", &eval.model, &eval.train, Some(eval.seeds));
        }
        if let Some(run) = &self.run {
            render_run(&mut s, run);
        }
        s
    }
}

// ----------------------------------------------------------------- keymap

struct KeyMap<'a> {
    section: &'a str,
    pairs: &'a [(String, String)],
    used: Vec<bool>,
}

impl<'a> KeyMap<'a> {
    fn new(section: &'a str, pairs: &'a [(String, String)]) -> Self {
        Self {
            section,
            pairs,
            used: vec![false; pairs.len()],
        }
    }

    fn get(&mut self, key: &str) -> Result<Option<&'a str>> {
        let mut found = None;
        for (i, (k, v)) in self.pairs.iter().enumerate() {
            if k == key {
                if found.is_some() {
                    return Err(Error::Config(format!(
                        "duplicate key `{key}` in [{}]",
                        self.section
                    )));
                }
                self.used[i] = true;
                found = Some(v.as_str());
            }
        }
        Ok(found)
    }

    fn require(&mut self, key: &str) -> Result<&'a str> {
        self.get(key)?.ok_or_else(|| {
            Error::Config(format!("missing key `{key}` in [{}]", self.section))
        })
    }

    fn finish(self) -> Result<()> {
        for (i, (k, _)) in self.pairs.iter().enumerate() {
            if !self.used[i] {
                return Err(Error::Config(format!(
                    "unknown key `{k}` in [{}]",
                    self.section
                )));
            }
        }
        Ok(())
    }
}

fn parse_usize(section: &str, key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: `{value}` is not a count")))
}

fn parse_u64(section: &str, key: &str, value: &str) -> Result<u64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: `{value}` is not a seed")))
}

fn parse_f64(section: &str, key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: `{value}` is not a number")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "[{section}] {key}: `{value}` is not true/false"
        ))),
    }
}

// ----------------------------------------------------------------- [data]

fn parse_data(pairs: &[(String, String)]) -> Result<DataConfig> {
    let mut keys = KeyMap::new("data", pairs);
    let source = keys.require("source")?;
    let out = match source {
        "blobs" => {
            let classes = parse_usize("data", "classes", keys.require("classes")?)?;
            let per_class = parse_usize("data", "per_class", keys.require("per_class")?)?;
            let dim = parse_usize("data", "dim", keys.require("dim")?)?;
            let center_spread =
                parse_f64("data", "center_spread", keys.require("center_spread")?)?;
            let noise_std = parse_f64("data", "noise_std", keys.require("noise_std")?)?;
            let seed = match keys.get("seed")? {
                Some(v) => parse_u64("data", "seed", v)?,
                None => 0,
            };
            let test_per_class = match keys.get("test_per_class")? {
                Some(v) => parse_usize("data", "test_per_class", v)?,
                None => 0,
            };
            if classes == 0 || per_class == 0 || dim == 0 {
                return Err(Error::Config("[data] blob counts must be positive".into()));
            }
            if noise_std < 0.0 {
                return Err(Error::Config("[data] noise_std must be >= 0".into()));
            }
            DataConfig::Blobs {
                classes,
                per_class,
                dim,
                center_spread,
                noise_std,
                seed,
                test_per_class,
            }
        }
        "cifar10" => DataConfig::Cifar10 {
            dir: PathBuf::from(keys.require("dir")?),
        },
        "idx" => DataConfig::Idx {
            train_images: PathBuf::from(keys.require("train_images")?),
            train_labels: PathBuf::from(keys.require("train_labels")?),
            test_images: keys.get("test_images")?.map(PathBuf::from),
            test_labels: keys.get("test_labels")?.map(PathBuf::from),
        },
        "packed" => DataConfig::Packed {
            train: PathBuf::from(keys.require("train")?),
            test: keys.get("test")?.map(PathBuf::from),
        },
        other => {
            return Err(Error::Config(format!(
                "[data] source: `{other}` is not one of blobs/cifar10/idx/packed"
            )))
        }
    };
    if let DataConfig::Idx {
        test_images,
        test_labels,
        ..
    } = &out
    {
        if test_images.is_some() != test_labels.is_some() {
            return Err(Error::Config(
                "[data] test_images and test_labels must be given together".into(),
            ));
        }
    }
    keys.finish()?;
    Ok(out)
}

fn render_data(s: &mut Sections, data: &DataConfig) {
    match data {
        DataConfig::Blobs {
            classes,
            per_class,
            dim,
            center_spread,
            noise_std,
            seed,
            test_per_class,
        } => {
            s.set("data", "source", "blobs");
            s.set("data", "classes", classes);
            s.set("data", "per_class", per_class);
            s.set("data", "dim", dim);
            s.set("data", "center_spread", center_spread);
            s.set("data", "noise_std", noise_std);
            s.set("data", "seed", seed);
            s.set("data", "test_per_class", test_per_class);
        }
        DataConfig::Cifar10 { dir } => {
            s.set("data", "source", "cifar10");
            s.set("data", "dir", dir.display());
        }
        DataConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            s.set("data", "source", "idx");
            s.set("data", "train_images", train_images.display());
            s.set("data", "train_labels", train_labels.display());
            if let (Some(ti), Some(tl)) = (test_images, test_labels) {
                s.set("data", "test_images", ti.display());
                s.set("data", "test_labels", tl.display());
            }
        }
        DataConfig::Packed { train, test } => {
            s.set("data", "source", "packed");
            s.set("data", "train", train.display());
            if let Some(test) = test {
                s.set("data", "test", test.display());
            }
        }
    }
}

// ----------------------------------------------------- shared train keys

fn parse_train_settings(section: &str, keys: &mut KeyMap<'_>) -> Result<TrainSettings> {
    let preset = match keys.get("preset")? {
        Some("cifar_small") => Some(Preset::CifarSmall),
        Some("tiny_like") => Some(Preset::TinyLike),
        Some(other) => {
            return Err(Error::Config(format!(
                "[{section}] preset: `{other}` is not cifar_small/tiny_like"
            )))
        }
        None => None,
    };
    let lr_schedule = match keys.get("schedule")? {
        Some("cosine") => Some(LrSchedule::Cosine),
        Some("constant") => Some(LrSchedule::Constant),
        Some(other) => {
            return Err(Error::Config(format!(
                "[{section}] schedule: `{other}` is not cosine/constant"
            )))
        }
        None => None,
    };
    let augmentation = match keys.get("augmentation")? {
        Some("none") => Some(Augmentation::None),
        Some("flip_crop") => Some(Augmentation::FlipCrop),
        Some(other) => {
            return Err(Error::Config(format!(
                "[{section}] augmentation: `{other}` is not none/flip_crop"
            )))
        }
        None => None,
    };
    Ok(TrainSettings {
        preset,
        epochs: keys
            .get("epochs")?
            .map(|v| parse_usize(section, "epochs", v))
            .transpose()?,
        batch_size: keys
            .get("batch_size")?
            .map(|v| parse_usize(section, "batch_size", v))
            .transpose()?,
        base_lr: keys
            .get("base_lr")?
            .map(|v| parse_f64(section, "base_lr", v))
            .transpose()?,
        momentum: keys
            .get("momentum")?
            .map(|v| parse_f64(section, "momentum", v))
            .transpose()?,
        weight_decay: keys
            .get("weight_decay")?
            .map(|v| parse_f64(section, "weight_decay", v))
            .transpose()?,
        lr_schedule,
        augmentation,
        seed: match keys.get("seed")? {
            Some(v) => parse_u64(section, "seed", v)?,
            None => 0,
        },
    })
}

fn render_train_settings(s: &mut Sections, section: &str, t: &TrainSettings) {
    if let Some(p) = t.preset {
        s.set(
            section,
            "preset",
            match p {
                Preset::CifarSmall => "cifar_small",
                Preset::TinyLike => "tiny_like",
            },
        );
    }
    if let Some(v) = t.epochs {
        s.set(section, "epochs", v);
    }
    if let Some(v) = t.batch_size {
        s.set(section, "batch_size", v);
    }
    if let Some(v) = t.base_lr {
        s.set(section, "base_lr", v);
    }
    if let Some(v) = t.momentum {
        s.set(section, "momentum", v);
    }
    if let Some(v) = t.weight_decay {
        s.set(section, "weight_decay", v);
    }
    if let Some(v) = t.lr_schedule {
        s.set(
            section,
            "schedule",
            match v {
                LrSchedule::Cosine => "cosine",
                LrSchedule::Constant => "constant",
            },
        );
    }
    if let Some(v) = t.augmentation {
        s.set(
            section,
            "augmentation",
            match v {
                Augmentation::None => "none",
                Augmentation::FlipCrop => "flip_crop",
            },
        );
    }
    s.set(section, "seed", t.seed);
}

fn parse_model_settings(section: &str, keys: &mut KeyMap<'_>) -> Result<ModelSettings> {
    let architecture = match keys.require("arch")? {
        "linear" => Architecture::Linear,
        "mlp" => {
            let hidden_text = keys.require("hidden")?;
            let hidden: Vec<usize> = hidden_text
                .split(',')
                .map(|t| parse_usize(section, "hidden", t.trim()))
                .collect::<Result<_>>()?;
            if hidden.is_empty() || hidden.iter().any(|&h| h == 0) {
                return Err(Error::Config(format!(
                    "[{section}] hidden sizes must be positive"
                )));
            }
            Architecture::Mlp { hidden }
        }
        "cnn_small" => Architecture::CnnSmall,
        other => {
            return Err(Error::Config(format!(
                "[{section}] arch: `{other}` is not linear/mlp/cnn_small"
            )))
        }
    };
    Ok(ModelSettings {
        architecture,
        init_seed: match keys.get("init_seed")? {
            Some(v) => parse_u64(section, "init_seed", v)?,
            None => 0,
        },
    })
}

fn render_model_train(
    s: &mut Sections,
    section: &str,
    model: &ModelSettings,
    train: &TrainSettings,
    seeds: Option<usize>,
) {
    match &model.architecture {
        Architecture::Linear => s.set(section, "arch", "linear"),
        Architecture::Mlp { hidden } => {
            s.set(section, "arch", "mlp");
            s.set(
                section,
                "hidden",
                hidden
                    .iter()
                    .map(|h| h.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        Architecture::CnnSmall => s.set(section, "arch", "cnn_small"),
    }
    s.set(section, "init_seed", model.init_seed);
    render_train_settings(s, section, train);
    if let Some(seeds) = seeds {
        s.set(section, "seeds", seeds);
    }
}

// --------------------------------------------------------------- [scores]

fn parse_scores(pairs: &[(String, String)]) -> Result<ScoreConfig> {
    let mut keys = KeyMap::new("scores", pairs);
    let out = match keys.require("source")? {
        "forgetting" => {
            let runs = match keys.get("runs")? {
                Some(v) => parse_usize("scores", "runs", v)?,
                None => 1,
            };
            if runs == 0 {
                return Err(Error::Config("[scores] runs must be >= 1".into()));
            }
            ScoreConfig::Forgetting {
                runs,
                train: parse_train_settings("scores", &mut keys)?,
            }
        }
        "logits" => ScoreConfig::Logits {
            train: parse_train_settings("scores", &mut keys)?,
        },
        "file" => ScoreConfig::File {
            path: PathBuf::from(keys.require("path")?),
        },
        other => {
            return Err(Error::Config(format!(
                "[scores] source: `{other}` is not one of forgetting/logits/file"
            )))
        }
    };
    keys.finish()?;
    Ok(out)
}

fn render_scores(s: &mut Sections, scores: &ScoreConfig) {
    match scores {
        ScoreConfig::Forgetting { runs, train } => {
            s.set("scores", "source", "forgetting");
            s.set("scores", "runs", runs);
            render_train_settings(s, "scores", train);
        }
        ScoreConfig::Logits { train } => {
            s.set("scores", "source", "logits");
            render_train_settings(s, "scores", train);
        }
        ScoreConfig::File { path } => {
            s.set("scores", "source", "file");
            s.set("scores", "path", path.display());
        }
    }
}

// ------------------------------------------------------------ [selection]

fn parse_selection(pairs: &[(String, String)]) -> Result<SelectionSettings> {
    let mut keys = KeyMap::new("selection", pairs);
    let mode = match keys.get("mode")? {
        Some("curriculum") | None => SelectionMode::Curriculum,
        Some("self_evolved") => SelectionMode::SelfEvolved,
        Some(other) => {
            return Err(Error::Config(format!(
                "[selection] mode: `{other}` is not curriculum/self_evolved"
            )))
        }
    };
    let ipc = parse_usize("selection", "ipc", keys.require("ipc")?)?;
    let distill_portion = parse_f64(
        "selection",
        "distill_portion",
        keys.require("distill_portion")?,
    )?;
    let num_phases = match keys.get("phases")? {
        Some(v) => parse_usize("selection", "phases", v)?,
        None => 3,
    };
    let window_start = match keys.get("window_start")? {
        Some(v) => parse_f64("selection", "window_start", v)?,
        None => 0.5,
    };
    let coarse_mode = match keys.get("coarse")? {
        Some("misclassified") | None => CoarseMode::Misclassified,
        Some("classified") => CoarseMode::Classified,
        Some(other) => {
            return Err(Error::Config(format!(
                "[selection] coarse: `{other}` is not misclassified/classified"
            )))
        }
    };
    let fine_mode = match keys.get("fine")? {
        Some("simplest") | None => FineMode::Simplest,
        Some("hardest") => FineMode::Hardest,
        Some("random") => FineMode::Random,
        Some(other) => {
            return Err(Error::Config(format!(
                "[selection] fine: `{other}` is not simplest/hardest/random"
            )))
        }
    };
    let backfill = match keys.get("backfill")? {
        Some("easiest_remaining") | None => BackfillPolicy::EasiestRemaining,
        Some("error") => BackfillPolicy::Error,
        Some(other) => {
            return Err(Error::Config(format!(
                "[selection] backfill: `{other}` is not error/easiest_remaining"
            )))
        }
    };
    let seed = match keys.get("seed")? {
        Some(v) => parse_u64("selection", "seed", v)?,
        None => 0,
    };
    keys.finish()?;
    let config = SelectionConfig {
        ipc,
        distill_portion,
        num_phases,
        window_start,
        coarse_mode,
        fine_mode,
        backfill,
        seed,
    };
    if ipc == 0 {
        return Err(Error::Config("[selection] ipc must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&distill_portion) {
        return Err(Error::Config(
            "[selection] distill_portion must lie in [0, 1]".into(),
        ));
    }
    if !(0.0..=1.0).contains(&window_start) {
        return Err(Error::Config(
            "[selection] window_start must lie in [0, 1]".into(),
        ));
    }
    if num_phases == 0 {
        return Err(Error::Config("[selection] phases must be >= 1".into()));
    }
    Ok(SelectionSettings { mode, config })
}

fn render_selection(s: &mut Sections, sel: &SelectionSettings) {
    s.set(
        "selection",
        "mode",
        match sel.mode {
            SelectionMode::Curriculum => "curriculum",
            SelectionMode::SelfEvolved => "self_evolved",
        },
    );
    s.set("selection", "ipc", sel.config.ipc);
    s.set("selection", "distill_portion", sel.config.distill_portion);
    s.set("selection", "phases", sel.config.num_phases);
    s.set("selection", "window_start", sel.config.window_start);
    s.set(
        "selection",
        "coarse",
        match sel.config.coarse_mode {
            CoarseMode::Misclassified => "misclassified",
            CoarseMode::Classified => "classified",
        },
    );
    s.set(
        "selection",
        "fine",
        match sel.config.fine_mode {
            FineMode::Simplest => "simplest",
            FineMode::Hardest => "hardest",
            FineMode::Random => "random",
        },
    );
    s.set(
        "selection",
        "backfill",
        match sel.config.backfill {
            BackfillPolicy::Error => "error",
            BackfillPolicy::EasiestRemaining => "easiest_remaining",
        },
    );
    s.set("selection", "seed", sel.config.seed);
}

// --------------------------------------------------- [filter]/[evaluation]

fn parse_filter(pairs: &[(String, String)]) -> Result<FilterConfig> {
    let mut keys = KeyMap::new("filter", pairs);
    let model = parse_model_settings("filter", &mut keys)?;
    let train = parse_train_settings("filter", &mut keys)?;
    keys.finish()?;
    Ok(FilterConfig { model, train })
}

fn parse_evaluation(pairs: &[(String, String)]) -> Result<EvalConfig> {
    let mut keys = KeyMap::new("evaluation", pairs);
    let model = parse_model_settings("evaluation", &mut keys)?;
    let train = parse_train_settings("evaluation", &mut keys)?;
    let seeds = match keys.get("seeds")? {
        Some(v) => parse_usize("evaluation", "seeds", v)?,
        None => 1,
    };
    keys.finish()?;
    if seeds == 0 {
        return Err(Error::Config("[evaluation] seeds must be >= 1".into()));
    }
    Ok(EvalConfig {
        model,
        train,
        seeds,
    })
}

// -------------------------------------------------------------- [pipeline]

fn parse_run(pairs: &[(String, String)]) -> Result<RunConfig> {
    let mut keys = KeyMap::new("pipeline", pairs);
    let defaults = RunConfig::default();
    let out_dir = keys
        .get("out_dir")?
        .map(PathBuf::from)
        .unwrap_or(defaults.out_dir);
    let distilled = match keys.get("distilled")? {
        Some("none") | None => DistilledSource::None,
        Some("packed") => DistilledSource::Packed,
        Some("surrogate") => DistilledSource::Surrogate,
        Some(other) => {
            return Err(Error::Config(format!(
                "[pipeline] distilled: `{other}` is not none/packed/surrogate"
            )))
        }
    };
    let distilled_path = keys.get("distilled_path")?.map(PathBuf::from);
    if distilled == DistilledSource::Packed && distilled_path.is_none() {
        return Err(Error::Config(
            "[pipeline] distilled = packed requires distilled_path".into(),
        ));
    }
    let surrogate_iterations = match keys.get("surrogate_iterations")? {
        Some(v) => parse_usize("pipeline", "surrogate_iterations", v)?,
        None => defaults.surrogate_iterations,
    };
    if surrogate_iterations == 0 {
        return Err(Error::Config(
            "[pipeline] surrogate_iterations must be >= 1".into(),
        ));
    }
    let surrogate_seed = match keys.get("surrogate_seed")? {
        Some(v) => parse_u64("pipeline", "surrogate_seed", v)?,
        None => defaults.surrogate_seed,
    };
    let export_predictions = match keys.get("export_predictions")? {
        Some(v) => parse_bool("pipeline", "export_predictions", v)?,
        None => false,
    };
    let external_predictions = match keys.get("external_predictions")? {
        Some(v) if !v.trim().is_empty() => v.split(',').map(|p| PathBuf::from(p.trim())).collect(),
        _ => Vec::new(),
    };
    let holdout_fraction = match keys.get("holdout_fraction")? {
        Some(v) => parse_f64("pipeline", "holdout_fraction", v)?,
        None => defaults.holdout_fraction,
    };
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::Config(
            "[pipeline] holdout_fraction must lie in [0, 1)".into(),
        ));
    }
    let holdout_seed = match keys.get("holdout_seed")? {
        Some(v) => parse_u64("pipeline", "holdout_seed", v)?,
        None => defaults.holdout_seed,
    };
    let coreset = keys.get("coreset")?.map(PathBuf::from);
    let betas = match keys.get("betas")? {
        Some(v) => {
            let betas: Vec<f64> = v
                .split(',')
                .map(|t| parse_f64("pipeline", "betas", t.trim()))
                .collect::<Result<_>>()?;
            if betas.is_empty() || betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
                return Err(Error::Config(
                    "[pipeline] betas must be a non-empty list in [0, 1]".into(),
                ));
            }
            betas
        }
        None => defaults.betas,
    };
    keys.finish()?;
    Ok(RunConfig {
        out_dir,
        distilled,
        distilled_path,
        surrogate_iterations,
        surrogate_seed,
        export_predictions,
        external_predictions,
        holdout_fraction,
        holdout_seed,
        coreset,
        betas,
    })
}

fn render_run(s: &mut Sections, run: &RunConfig) {
    s.set("pipeline", "out_dir", run.out_dir.display());
    s.set(
        "pipeline",
        "distilled",
        match run.distilled {
            DistilledSource::None => "none",
            DistilledSource::Packed => "packed",
            DistilledSource::Surrogate => "surrogate",
        },
    );
    if let Some(p) = &run.distilled_path {
        s.set("pipeline", "distilled_path", p.display());
    }
    s.set("pipeline", "surrogate_iterations", run.surrogate_iterations);
    s.set("pipeline", "surrogate_seed", run.surrogate_seed);
    s.set("pipeline", "export_predictions", run.export_predictions);
    if !run.external_predictions.is_empty() {
        s.set(
            "pipeline",
            "external_predictions",
            run.external_predictions
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
    }
    s.set("pipeline", "holdout_fraction", run.holdout_fraction);
    s.set("pipeline", "holdout_seed", run.holdout_seed);
    if let Some(p) = &run.coreset {
        s.set("pipeline", "coreset", p.display());
    }
    s.set(
        "pipeline",
        "betas",
        run.betas
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
}
