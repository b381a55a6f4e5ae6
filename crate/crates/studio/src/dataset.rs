//! Synthetic corpora on disk and datasets loaded back from a manifest.
//!
//! Layout written by [`write_corpus`]:
//!
//! ```text
//! manifest.json
//! synth.json                 generator settings
//! images/<id>.png
//! tracks/<id>.gaze.jsonl
//! tracks/<id>.meta.json
//! tracks/<id>.labels.jsonl   ground-truth fixation flags
//! ```

use std::path::{Path, PathBuf};

use gazestudio_core::net::GrayImage;
use gazestudio_core::pipeline::ImageRecord;
use gazestudio_core::synth::{SplitName, SynthConfig, SynthCorpus};
use gazestudio_core::GazeTrack;
use thiserror::Error;

use crate::gamap::{read_image, write_image, FileError};
use crate::manifest::{load_manifest, save_manifest, LoadedManifest, Manifest, ManifestEntry, ManifestError};
use crate::track::{
    parse_labels, read_file, save_track, serialize_labels, track_stem, with_suffix, write_atomic, ParseError, GAZE_SUFFIX,
    LABELS_SUFFIX,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SYNTH_CONFIG_FILE: &str = "synth.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    File(#[from] FileError),
    #[error("{path}: {source}")]
    Track { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Writes every image, track, label file and the manifest under `dir`.
/// Output bytes depend only on `corpus`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<Manifest, DatasetError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Io { path, source }
    };
    let mut manifest = Manifest::default();
    for item in &corpus.items {
        let image_path = PathBuf::from("images").join(format!("{}.png", item.id));
        write_image(&dir.join(&image_path), &item.image)?;
        let stem = PathBuf::from("tracks").join(&item.id);
        let abs = dir.join(&stem);
        save_track(&abs, &item.track).map_err(io(&abs))?;
        let labels = with_suffix(&abs, LABELS_SUFFIX);
        write_atomic(&labels, &serialize_labels(&item.labels)).map_err(io(&labels))?;
        manifest.entries.push(ManifestEntry {
            image_id: item.id.clone(),
            image_path,
            grade: item.grade,
            boxes: item.boxes.clone(),
            gaze_track_paths: vec![with_suffix(&stem, GAZE_SUFFIX)],
            split: Some(item.split),
        });
    }
    let synth = dir.join(SYNTH_CONFIG_FILE);
    let mut cfg = serde_json::to_vec_pretty(&corpus.config).expect("config serializes");
    cfg.push(b'\n');
    write_atomic(&synth, &cfg).map_err(io(&synth))?;
    save_manifest(&manifest, &dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

pub fn read_synth_config(dir: &Path) -> Option<SynthConfig> {
    let raw = std::fs::read(dir.join(SYNTH_CONFIG_FILE)).ok()?;
    serde_json::from_slice(&raw).ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedItem {
    pub entry: ManifestEntry,
    pub image: GrayImage,
    pub tracks: Vec<GazeTrack>,
    /// Fixation labels of the first track, when a labels file exists.
    pub labels: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub base: PathBuf,
    pub items: Vec<LoadedItem>,
}

impl Dataset {
    /// Benchmark view; only the first track of an entry supervises training.
    pub fn records(&self) -> Vec<ImageRecord<'_>> {
        self.items
            .iter()
            .map(|i| ImageRecord {
                split: i.entry.split(),
                grade: i.entry.grade,
                image: &i.image,
                boxes: &i.entry.boxes,
                track: i.tracks.first(),
            })
            .collect()
    }

    pub fn split(&self, split: SplitName) -> impl Iterator<Item = &LoadedItem> {
        self.items.iter().filter(move |i| i.entry.split() == split)
    }
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, DatasetError> {
    let LoadedManifest { base, manifest } = load_manifest(manifest_path)?;
    let mut items = Vec::with_capacity(manifest.entries.len());
    for entry in manifest.entries {
        let image = read_image(&base.join(&entry.image_path))?;
        let mut tracks = Vec::with_capacity(entry.gaze_track_paths.len());
        let mut labels = None;
        for (k, g) in entry.gaze_track_paths.iter().enumerate() {
            let stem = track_stem(&base.join(g));
            let track = crate::track::load_track_stem(&stem).map_err(|source| DatasetError::Track { path: stem.clone(), source })?;
            let lpath = with_suffix(&stem, LABELS_SUFFIX);
            if k == 0 && lpath.is_file() {
                let raw = read_file(&lpath).map_err(|source| DatasetError::Track { path: lpath.clone(), source })?;
                labels = Some(parse_labels(&raw).map_err(|source| DatasetError::Track { path: lpath.clone(), source })?);
            }
            tracks.push(track);
        }
        items.push(LoadedItem { entry, image, tracks, labels });
    }
    Ok(Dataset { base, items })
}
