//! Balanced corpora of rendered frames with object-disjoint splits.

mod batches;
mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::GlitchClass;
use crate::seed::derive_seed;
use crate::synth::{synth_sample, GlitchRanges, PlaceholderStyle, SynthConfig, SynthError, TextureSource};

pub use batches::{decode_frame, epoch_order, frames_to_tensor, load_batches, Batch, BatchStream, SplitData};
pub use manifest::{read_manifest, write_manifest, MANIFEST_FILE, MANIFEST_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::Train, Split::Val];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(format!("unknown split `{other}` (expected train or val)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub object_id: u32,
    pub view_id: u32,
    pub class: GlitchClass,
    /// Corpus-wide placeholder mode, recorded on every sample.
    pub placeholder_style: PlaceholderStyle,
    pub split: Split,
    /// Relative to the manifest's directory.
    pub image_path: String,
    /// Seed of the rendered scene.
    pub seed: u64,
}

/// Everything needed to regenerate a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_objects: u32,
    pub views_per_object: u32,
    pub image_size: (u32, u32),
    pub placeholder_style: PlaceholderStyle,
    pub master_seed: u64,
    #[serde(default)]
    pub ranges: GlitchRanges,
    #[serde(default)]
    pub textures: TextureSource,
    /// Set once the corpus has been split.
    #[serde(default)]
    pub split: Option<SplitConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub val_fraction: f64,
    pub split_seed: u64,
}

impl CorpusConfig {
    pub fn new(n_objects: u32, views_per_object: u32, image_size: (u32, u32), placeholder_style: PlaceholderStyle, master_seed: u64) -> Self {
        Self {
            n_objects,
            views_per_object,
            image_size,
            placeholder_style,
            master_seed,
            ranges: GlitchRanges::default(),
            textures: TextureSource::default(),
            split: None,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.n_objects < 5 {
            return Err(CorpusError::Parameter(format!("need at least 5 objects, got {}", self.n_objects)));
        }
        if self.views_per_object == 0 || self.views_per_object % GlitchClass::COUNT as u32 != 0 {
            return Err(CorpusError::Parameter(format!("views per object must be a positive multiple of 5, got {}", self.views_per_object)));
        }
        if self.image_size.0 < 8 || self.image_size.1 < 8 {
            return Err(CorpusError::Parameter(format!("image size {:?} is too small", self.image_size)));
        }
        Ok(())
    }

    /// Synthesis settings that reproduce this corpus' frames, including
    /// views beyond `views_per_object`.
    pub fn synth_config(&self) -> Result<SynthConfig, CorpusError> {
        let bank = self.textures.load().map_err(|source| CorpusError::Synthesis { sample_id: "<texture bank>".into(), source })?;
        let mut cfg = SynthConfig::new(bank, self.image_size, self.placeholder_style);
        cfg.ranges = self.ranges.clone();
        Ok(cfg)
    }
}

/// Class carried by view `view_id` of any object; cycling through the five
/// classes keeps every object balanced.
pub fn class_for_view(view_id: u32) -> GlitchClass {
    GlitchClass::from_index(view_id as usize % GlitchClass::COUNT).expect("index below class count")
}

pub fn sample_id(object_id: u32, view_id: u32) -> String {
    format!("o{object_id:04}_v{view_id:03}")
}

/// Per-split, per-class sample counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub counts: BTreeMap<Split, BTreeMap<GlitchClass, usize>>,
}

impl CorpusStats {
    pub fn from_records(records: &[SampleRecord]) -> Self {
        let mut counts: BTreeMap<Split, BTreeMap<GlitchClass, usize>> = BTreeMap::new();
        for r in records {
            *counts.entry(r.split).or_insert_with(|| GlitchClass::ALL.iter().map(|&c| (c, 0)).collect()).entry(r.class).or_default() += 1;
        }
        Self { counts }
    }

    pub fn count(&self, split: Split, class: GlitchClass) -> usize {
        self.counts.get(&split).and_then(|m| m.get(&class)).copied().unwrap_or(0)
    }

    pub fn split_total(&self, split: Split) -> usize {
        self.counts.get(&split).map(|m| m.values().sum()).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub version: u32,
    pub config: CorpusConfig,
    pub records: Vec<SampleRecord>,
    pub stats: CorpusStats,
    /// Directory that relative image paths resolve against.
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn image_path(&self, record: &SampleRecord) -> PathBuf {
        self.root.join(&record.image_path)
    }

    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn object_ids(&self) -> BTreeSet<u32> {
        self.records.iter().map(|r| r.object_id).collect()
    }

    /// SHA-256 over the sample identities, labels, splits and seeds.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        for r in &self.records {
            h.update(format!("{}|{}|{}|{}\n", r.sample_id, r.class, r.split, r.seed));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid corpus parameter: {0}")]
    Parameter(String),
    #[error("output directory {0} already holds a corpus; pass overwrite to replace it")]
    Collision(PathBuf),
    #[error("sample {sample_id}: {source}")]
    Synthesis { sample_id: String, source: SynthError },
    #[error("sample {sample_id}: cannot decode {path}: {reason}")]
    Decode { sample_id: String, path: PathBuf, reason: String },
    #[error("manifest {path} line {line}: {reason}")]
    Manifest { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Renders `n_objects × views_per_object` frames into `out_dir/images` and
/// writes `out_dir/manifest.jsonl`. Every record starts in the train split.
pub fn build_corpus(config: &CorpusConfig, out_dir: &Path, overwrite: bool) -> Result<CorpusManifest, CorpusError> {
    config.validate()?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    if manifest_path.exists() && !overwrite {
        return Err(CorpusError::Collision(out_dir.to_path_buf()));
    }
    let images = out_dir.join("images");
    fs::create_dir_all(&images).map_err(|source| CorpusError::Io { path: images.clone(), source })?;
    let synth = Arc::new(config.synth_config()?);

    let jobs: Vec<(u32, u32)> =
        (0..config.n_objects).flat_map(|o| (0..config.views_per_object).map(move |v| (o, v))).collect();
    let records = jobs
        .par_iter()
        .map(|&(object_id, view_id)| {
            let sample_id = sample_id(object_id, view_id);
            let class = class_for_view(view_id);
            let wrap = |source| CorpusError::Synthesis { sample_id: sample_id.clone(), source };
            let frame = synth_sample(class, object_id, view_id, config.master_seed, &synth).map_err(wrap)?;
            let rel = format!("images/{sample_id}.png");
            frame.save(&out_dir.join(&rel)).map_err(wrap)?;
            Ok(SampleRecord {
                sample_id: sample_id.clone(),
                object_id,
                view_id,
                class,
                placeholder_style: config.placeholder_style,
                split: Split::Train,
                image_path: rel,
                seed: frame.provenance.scene_seed,
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;

    let manifest = CorpusManifest {
        version: MANIFEST_VERSION,
        config: config.clone(),
        stats: CorpusStats::from_records(&records),
        records,
        root: out_dir.to_path_buf(),
    };
    write_manifest(&manifest, &manifest_path)?;
    Ok(manifest)
}

/// Assigns exactly `round(n_objects · val_fraction)` objects to val: those
/// whose `(split_seed, object_id)` hash ranks lowest.
pub fn split_by_object(manifest: &CorpusManifest, val_fraction: f64, split_seed: u64) -> Result<CorpusManifest, CorpusError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(CorpusError::Parameter(format!("val fraction must lie in (0, 1), got {val_fraction}")));
    }
    let objects: Vec<u32> = manifest.object_ids().into_iter().collect();
    let n_val = (objects.len() as f64 * val_fraction).round() as usize;
    if n_val == 0 || n_val == objects.len() {
        return Err(CorpusError::Parameter(format!(
            "val fraction {val_fraction} puts {n_val} of {} objects in val",
            objects.len()
        )));
    }
    let mut ranked: Vec<(u64, u32)> = objects.iter().map(|&o| (derive_seed("split", &[split_seed, o as u64]), o)).collect();
    ranked.sort_unstable();
    let val: BTreeSet<u32> = ranked[..n_val].iter().map(|&(_, o)| o).collect();

    let mut out = manifest.clone();
    for r in &mut out.records {
        r.split = if val.contains(&r.object_id) { Split::Val } else { Split::Train };
    }
    out.config.split = Some(SplitConfig { val_fraction, split_seed });
    out.stats = CorpusStats::from_records(&out.records);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateSampleId(String),
    /// An object's views are spread over both splits.
    ObjectInBothSplits { object_id: u32 },
    Imbalance { split: Split, class: GlitchClass, count: usize, split_total: usize },
    ViewCount { object_id: u32, views: usize, expected: usize },
    MissingFile { sample_id: String, path: PathBuf },
    StatsMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateSampleId(id) => write!(f, "duplicate sample_id {id}"),
            Violation::ObjectInBothSplits { object_id } => {
                write!(f, "object-disjointness violated: object {object_id} appears in train and val")
            }
            Violation::Imbalance { split, class, count, split_total } => {
                write!(f, "imbalance in {split}: {count} {class} samples of {split_total}")
            }
            Violation::ViewCount { object_id, views, expected } => {
                write!(f, "object {object_id} has {views} views, expected {expected}")
            }
            Violation::MissingFile { sample_id, path } => write!(f, "sample {sample_id}: missing image {}", path.display()),
            Violation::StatsMismatch => write!(f, "header stats disagree with the records"),
        }
    }
}

/// Checks every manifest invariant; an empty result means valid.
pub fn verify_manifest(manifest: &CorpusManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for r in &manifest.records {
        if !seen.insert(r.sample_id.as_str()) {
            out.push(Violation::DuplicateSampleId(r.sample_id.clone()));
        }
    }
    let mut per_object: BTreeMap<u32, (usize, BTreeSet<Split>)> = BTreeMap::new();
    for r in &manifest.records {
        let e = per_object.entry(r.object_id).or_default();
        e.0 += 1;
        e.1.insert(r.split);
    }
    for (&object_id, (views, splits)) in &per_object {
        if splits.len() > 1 {
            out.push(Violation::ObjectInBothSplits { object_id });
        }
        let expected = manifest.config.views_per_object as usize;
        if *views != expected {
            out.push(Violation::ViewCount { object_id, views: *views, expected });
        }
    }
    let stats = CorpusStats::from_records(&manifest.records);
    for split in Split::ALL {
        let total = stats.split_total(split);
        if total == 0 {
            continue;
        }
        for class in GlitchClass::ALL {
            let count = stats.count(split, class);
            // |count − total/5| ≤ 1, kept in integers.
            if (count * GlitchClass::COUNT).abs_diff(total) > GlitchClass::COUNT {
                out.push(Violation::Imbalance { split, class, count, split_total: total });
            }
        }
    }
    if stats != manifest.stats {
        out.push(Violation::StatsMismatch);
    }
    for r in &manifest.records {
        let path = manifest.image_path(r);
        if !path.is_file() {
            out.push(Violation::MissingFile { sample_id: r.sample_id.clone(), path });
        }
    }
    out
}
