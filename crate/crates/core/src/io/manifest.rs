//! TOML manifest binding layouts, feature files, heads and trials.
//!
//! ```toml
//! format_version = 1
//!
//! [[heads]]
//! kind = "category"
//! labels = ["dog", "cat"]
//! weights = "heads/category.weights.gzt"
//! bias = "heads/category.bias.gzt"
//!
//! [[collages]]
//! id = "c1"
//! screen_width_px = 1920.0
//! screen_height_px = 1200.0
//!
//! [[collages.images]]
//! id = "c1-a"
//! bbox = [0.0, 0.0, 480.0, 300.0]
//! features = "features/c1-a.gzt"
//!
//! [[trials]]
//! participant = "p01"
//! task_kind = "category"
//! task_label = "dog"
//! collage = "c1"
//! log = "logs/p01.csv"
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixlog::{read_logs, write_logs};
use super::tensor::{read_feature_map, read_head, write_feature_map, write_head};
use crate::error::{Error, FormatError, Result};
use crate::eval::{Suite, Trial};
use crate::types::{BoundingBox, CollageLayout, FixationLog, LayoutEntry, Task, TaskKind};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    #[serde(default)]
    pub heads: Vec<HeadEntry>,
    #[serde(default)]
    pub collages: Vec<CollageEntry>,
    #[serde(default)]
    pub trials: Vec<TrialEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadEntry {
    pub kind: TaskKind,
    pub labels: Vec<String>,
    pub weights: PathBuf,
    pub bias: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollageEntry {
    pub id: String,
    pub screen_width_px: f64,
    pub screen_height_px: f64,
    pub images: Vec<ImageEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub id: String,
    pub bbox: [f64; 4],
    pub features: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialEntry {
    pub participant: String,
    pub task_kind: TaskKind,
    pub task_label: String,
    pub collage: String,
    pub log: PathBuf,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| Error::format(path, FormatError::Manifest(e.message().to_owned())))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            FormatError::Manifest(format!("unsupported format_version {}", manifest.format_version)),
        ));
    }
    Ok(manifest)
}

/// Loads a manifest and everything it references, validating cross references.
pub fn load_suite(path: &Path) -> Result<Suite> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let manifest_err = |msg: String| Error::format(path, FormatError::Manifest(msg));
    let resolve = |rel: &Path, referenced_by: String| -> Result<PathBuf> {
        let full = base.join(rel);
        if full.is_file() {
            Ok(full)
        } else {
            Err(Error::format(
                path,
                FormatError::MissingPath {
                    path: full,
                    referenced_by,
                },
            ))
        }
    };

    let mut heads = Vec::with_capacity(manifest.heads.len());
    for h in &manifest.heads {
        if heads.iter().any(|x: &crate::types::ClassifierHead| x.kind() == h.kind) {
            return Err(manifest_err(format!("duplicate {} head", h.kind)));
        }
        let who = format!("{} head", h.kind);
        let w = resolve(&h.weights, who.clone())?;
        let b = resolve(&h.bias, who)?;
        heads.push(read_head(h.kind, h.labels.clone(), &w, &b)?);
    }

    let mut layouts = BTreeMap::new();
    let mut feature_jobs = Vec::new();
    for c in &manifest.collages {
        let mut entries = Vec::with_capacity(c.images.len());
        for img in &c.images {
            let [x0, y0, x1, y1] = img.bbox;
            entries.push(LayoutEntry {
                image_id: img.id.clone(),
                bbox: BoundingBox::new(x0, y0, x1, y1),
            });
            let file = resolve(&img.features, format!("image {:?} of collage {:?}", img.id, c.id))?;
            feature_jobs.push((img.id.clone(), file));
        }
        let layout = CollageLayout::new(c.id.clone(), c.screen_width_px, c.screen_height_px, entries)
            .map_err(|v| manifest_err(format!("collage {:?}: {v}", c.id)))?;
        if layouts.insert(c.id.clone(), layout).is_some() {
            return Err(manifest_err(format!("duplicate collage {:?}", c.id)));
        }
    }
    let loaded: Vec<_> = feature_jobs
        .par_iter()
        .map(|(id, file)| read_feature_map(file, id).map(|f| (id.clone(), f)))
        .collect::<Result<_>>()?;
    let mut features = HashMap::with_capacity(loaded.len());
    for (id, f) in loaded {
        if features.insert(id.clone(), f).is_some() {
            return Err(manifest_err(format!("image {id:?} appears in more than one collage")));
        }
    }

    let mut log_files: HashMap<PathBuf, HashMap<(String, String, Task), FixationLog>> = HashMap::new();
    let mut trials = Vec::with_capacity(manifest.trials.len());
    for t in &manifest.trials {
        let name = format!("trial {}/{}/{}:{}", t.participant, t.collage, t.task_kind, t.task_label);
        if !layouts.contains_key(&t.collage) {
            return Err(manifest_err(format!("{name} references unknown collage {:?}", t.collage)));
        }
        let head = heads
            .iter()
            .find(|h| h.kind() == t.task_kind)
            .ok_or_else(|| manifest_err(format!("{name} has no {} head", t.task_kind)))?;
        if head.label_index(&t.task_label).is_none() {
            return Err(manifest_err(format!("{name}: label {:?} is not in the head", t.task_label)));
        }
        let file = resolve(&t.log, name.clone())?;
        if !log_files.contains_key(&file) {
            let logs = read_logs(&file)?
                .into_iter()
                .map(|l| ((l.participant_id().to_owned(), l.collage_id().to_owned(), l.task().clone()), l))
                .collect();
            log_files.insert(file.clone(), logs);
        }
        let key = (
            t.participant.clone(),
            t.collage.clone(),
            Task::new(t.task_kind, t.task_label.clone()),
        );
        let log = log_files[&file]
            .get(&key)
            .ok_or_else(|| manifest_err(format!("{name}: no rows in {}", file.display())))?;
        trials.push(Trial::new(log.clone()));
    }

    Ok(Suite {
        layouts,
        features,
        heads,
        trials,
    })
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Writes `suite` as a manifest tree under `dir` and returns the manifest path.
pub fn store_suite(dir: &Path, suite: &Suite) -> Result<PathBuf> {
    for sub in ["features", "heads", "logs"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut manifest = Manifest {
        format_version: FORMAT_VERSION,
        heads: Vec::new(),
        collages: Vec::new(),
        trials: Vec::new(),
    };
    for head in &suite.heads {
        let weights = PathBuf::from(format!("heads/{}.weights.gzt", head.kind()));
        let bias = PathBuf::from(format!("heads/{}.bias.gzt", head.kind()));
        write_head(head, &dir.join(&weights), &dir.join(&bias))?;
        manifest.heads.push(HeadEntry {
            kind: head.kind(),
            labels: head.labels().to_vec(),
            weights,
            bias,
        });
    }
    let mut jobs = Vec::new();
    for layout in suite.layouts.values() {
        let mut images = Vec::with_capacity(layout.entries().len());
        for e in layout.entries() {
            let features = PathBuf::from(format!("features/{}.gzt", file_stem(&e.image_id)));
            let map = suite
                .features
                .get(&e.image_id)
                .ok_or_else(|| Error::MissingFeatureMap(e.image_id.clone()))?;
            jobs.push((dir.join(&features), map));
            let b = e.bbox;
            images.push(ImageEntry {
                id: e.image_id.clone(),
                bbox: [b.x0, b.y0, b.x1, b.y1],
                features,
            });
        }
        manifest.collages.push(CollageEntry {
            id: layout.collage_id().to_owned(),
            screen_width_px: layout.screen_width_px(),
            screen_height_px: layout.screen_height_px(),
            images,
        });
    }
    jobs.par_iter()
        .map(|(p, map)| write_feature_map(p, map))
        .collect::<Result<()>>()?;

    let mut by_participant: BTreeMap<&str, Vec<FixationLog>> = BTreeMap::new();
    for t in &suite.trials {
        let log = PathBuf::from(format!("logs/{}.csv", file_stem(t.participant_id())));
        manifest.trials.push(TrialEntry {
            participant: t.participant_id().to_owned(),
            task_kind: t.kind(),
            task_label: t.target().to_owned(),
            collage: t.collage_id().to_owned(),
            log,
        });
        by_participant.entry(t.participant_id()).or_default().push(t.log().clone());
    }
    for (participant, logs) in &by_participant {
        write_logs(&dir.join(format!("logs/{}.csv", file_stem(participant))), logs)?;
    }

    let path = dir.join("manifest.toml");
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::format(&path, FormatError::Manifest(e.to_string())))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
