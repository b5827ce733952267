//! Coreset manifest: everything needed to reconstruct the exported coreset
//! from the original dataset files, plus selection provenance.

use std::path::{Path, PathBuf};

use crate::config::{PipelineConfig, SelectionMode};
use crate::data::{load_packed, PackedTensorSet};
use crate::select::{kmeans_surrogate, CoresetState};
use crate::textfmt::{join_ids, split_ids, Sections};
use crate::{Error, Result};

const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum DistilledProvenance {
    None,
    Packed {
        path: PathBuf,
        count: usize,
    },
    Surrogate {
        prototypes_per_class: usize,
        iterations: usize,
        seed: u64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestPhase {
    pub selected: Vec<usize>,
    pub backfill: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub mode: SelectionMode,
    pub config: PipelineConfig,
    pub config_hash: String,
    pub distilled: DistilledProvenance,
    pub score_source: String,
    pub score_provenance: String,
    pub initial_ids: Vec<usize>,
    pub phases: Vec<ManifestPhase>,
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut s = Sections::new();
    s.set("manifest", "version", VERSION);
    s.set(
        "manifest",
        "mode",
        match manifest.mode {
            SelectionMode::Curriculum => "curriculum",
            SelectionMode::SelfEvolved => "self_evolved",
        },
    );
    s.set("manifest", "config_hash", &manifest.config_hash);
    s.set("manifest", "phases", manifest.phases.len());

    // Config echo, section names prefixed so they nest inside the manifest.
    let config = manifest.config.canonical_sections();
    for name in config.section_names() {
        for (k, v) in config.section(name).unwrap() {
            s.set(&format!("config.{name}"), k, v);
        }
    }

    match &manifest.distilled {
        DistilledProvenance::None => {
            s.set("distilled", "source", "none");
            s.set("distilled", "count", 0);
        }
        DistilledProvenance::Packed { path, count } => {
            s.set("distilled", "source", "packed");
            s.set("distilled", "path", path.display());
            s.set("distilled", "count", count);
        }
        DistilledProvenance::Surrogate {
            prototypes_per_class,
            iterations,
            seed,
            count,
        } => {
            s.set("distilled", "source", "surrogate");
            s.set("distilled", "prototypes_per_class", prototypes_per_class);
            s.set("distilled", "iterations", iterations);
            s.set("distilled", "seed", seed);
            s.set("distilled", "count", count);
        }
    }

    s.set("score_meta", "source", &manifest.score_source);
    s.set("score_meta", "provenance", &manifest.score_provenance);
    s.set("initial", "ids", join_ids(&manifest.initial_ids));
    for (i, phase) in manifest.phases.iter().enumerate() {
        let name = format!("phase {}", i + 1);
        s.set(&name, "selected", join_ids(&phase.selected));
        s.set(&name, "backfill", phase.backfill);
    }
    std::fs::write(path, s.render()).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let s = Sections::parse(&text)?;
    let get = |section: &str, key: &str| -> Result<&str> {
        s.get(section, key)
            .ok_or_else(|| Error::Manifest(format!("missing {section}.{key}")))
    };

    let version: u32 = get("manifest", "version")?
        .parse()
        .map_err(|_| Error::Manifest("bad version".into()))?;
    if version != VERSION {
        return Err(Error::Manifest(format!("unsupported version {version}")));
    }
    let mode = match get("manifest", "mode")? {
        "curriculum" => SelectionMode::Curriculum,
        "self_evolved" => SelectionMode::SelfEvolved,
        other => return Err(Error::Manifest(format!("unknown mode `{other}`"))),
    };
    let config_hash = get("manifest", "config_hash")?.to_string();
    let phase_count: usize = get("manifest", "phases")?
        .parse()
        .map_err(|_| Error::Manifest("bad phase count".into()))?;

    // Recover the embedded config.
    let mut config_sections = Sections::new();
    for name in s.section_names() {
        if let Some(inner) = name.strip_prefix("config.") {
            for (k, v) in s.section(name).unwrap() {
                config_sections.set(inner, k, v);
            }
        }
    }
    let config = PipelineConfig::from_sections(&config_sections)?;
    if config.hash() != config_hash {
        return Err(Error::Manifest(format!(
            "config hash mismatch: recorded {config_hash}, echo hashes to {}",
            config.hash()
        )));
    }

    let distilled = match get("distilled", "source")? {
        "none" => DistilledProvenance::None,
        "packed" => DistilledProvenance::Packed {
            path: PathBuf::from(get("distilled", "path")?),
            count: get("distilled", "count")?
                .parse()
                .map_err(|_| Error::Manifest("bad distilled count".into()))?,
        },
        "surrogate" => DistilledProvenance::Surrogate {
            prototypes_per_class: get("distilled", "prototypes_per_class")?
                .parse()
                .map_err(|_| Error::Manifest("bad prototype count".into()))?,
            iterations: get("distilled", "iterations")?
                .parse()
                .map_err(|_| Error::Manifest("bad iteration count".into()))?,
            seed: get("distilled", "seed")?
                .parse()
                .map_err(|_| Error::Manifest("bad seed".into()))?,
            count: get("distilled", "count")?
                .parse()
                .map_err(|_| Error::Manifest("bad distilled count".into()))?,
        },
        other => return Err(Error::Manifest(format!("unknown distilled source `{other}`"))),
    };

    let mut phases = Vec::with_capacity(phase_count);
    for i in 1..=phase_count {
        let name = format!("phase {i}");
        phases.push(ManifestPhase {
            selected: split_ids(get(&name, "selected")?)?,
            backfill: get(&name, "backfill")?
                .parse()
                .map_err(|_| Error::Manifest("bad backfill count".into()))?,
        });
    }

    Ok(Manifest {
        mode,
        config,
        config_hash,
        distilled,
        score_source: get("score_meta", "source")?.to_string(),
        score_provenance: get("score_meta", "provenance")?.to_string(),
        initial_ids: split_ids(get("initial", "ids")?)?,
        phases,
    })
}

/// Rebuild the exported coreset from the manifest and the dataset files it
/// names. The result is byte-identical to the original export.
pub fn rematerialize(manifest: &Manifest) -> Result<PackedTensorSet> {
    let data_cfg = manifest.config.require_data()?;
    let run_cfg = manifest.config.require_run()?;
    let (train_all, test) = super::load_data(data_cfg)?;
    let resolved = super::resolve_holdout(
        train_all,
        test,
        run_cfg.holdout_fraction,
        run_cfg.holdout_seed,
    )?;
    let train_set = &resolved.train;

    let distilled = match &manifest.distilled {
        DistilledProvenance::None => None,
        DistilledProvenance::Packed { path, count } => {
            let set = load_packed(path)?;
            if set.len() != *count {
                return Err(Error::Manifest(format!(
                    "distilled file holds {} records, manifest says {count}",
                    set.len()
                )));
            }
            Some(set)
        }
        DistilledProvenance::Surrogate {
            prototypes_per_class,
            iterations,
            seed,
            count,
        } => {
            if *count == 0 {
                None
            } else {
                let set = kmeans_surrogate(train_set, *prototypes_per_class, *iterations, *seed)?;
                if set.len() != *count {
                    return Err(Error::Manifest(format!(
                        "surrogate rebuild yielded {} records, manifest says {count}",
                        set.len()
                    )));
                }
                Some(set)
            }
        }
    };

    let state = CoresetState::reconstruct(
        distilled,
        manifest.initial_ids.clone(),
        manifest.phases.iter().map(|p| p.selected.clone()).collect(),
        train_set,
    )?;
    state.to_packed(train_set)
}
