//! Dataset index. Paths inside a manifest are relative to its directory.

use std::path::{Path, PathBuf};

use gazestudio_core::synth::SplitName;
use gazestudio_core::{BBox, KlGrade};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::track::{track_stem, with_suffix, write_atomic, META_SUFFIX};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("entry {entry}: missing file {path}")]
    MissingFile { entry: String, path: PathBuf },
    #[error("entry {entry}: grade {grade} is outside 0..=4")]
    BadGrade { entry: String, grade: i64 },
    #[error("entry {entry}: duplicate image id")]
    DuplicateId { entry: String },
    #[error("manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub image_path: PathBuf,
    pub grade: KlGrade,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<BBox>,
    /// `.gaze.jsonl` files; each has a `.meta.json` sibling.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaze_track_paths: Vec<PathBuf>,
    /// Entries without a split are treated as training data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitName>,
}

impl ManifestEntry {
    pub fn split(&self) -> SplitName {
        self.split.unwrap_or(SplitName::Train)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct RawManifest {
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    image_id: String,
    image_path: PathBuf,
    grade: i64,
    #[serde(default)]
    boxes: Vec<BBox>,
    #[serde(default)]
    gaze_track_paths: Vec<PathBuf>,
    #[serde(default)]
    split: Option<SplitName>,
}

impl Manifest {
    pub fn get(&self, image_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.image_id == image_id)
    }

    /// Parses and checks grades, without touching the file system.
    pub fn from_json(raw: &[u8]) -> Result<Self, ManifestError> {
        let raw: RawManifest = serde_json::from_slice(raw)?;
        let mut entries: Vec<ManifestEntry> = Vec::with_capacity(raw.entries.len());
        for e in raw.entries {
            let grade = KlGrade::try_from(e.grade).map_err(|_| ManifestError::BadGrade { entry: e.image_id.clone(), grade: e.grade })?;
            if entries.iter().any(|x| x.image_id == e.image_id) {
                return Err(ManifestError::DuplicateId { entry: e.image_id });
            }
            entries.push(ManifestEntry {
                image_id: e.image_id,
                image_path: e.image_path,
                grade,
                boxes: e.boxes,
                gaze_track_paths: e.gaze_track_paths,
                split: e.split,
            });
        }
        Ok(Self { entries })
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    /// Every referenced image, gaze file and metadata file must exist under `base`.
    pub fn check_files(&self, base: &Path) -> Result<(), ManifestError> {
        for e in &self.entries {
            let missing = |path: PathBuf| ManifestError::MissingFile { entry: e.image_id.clone(), path };
            let image = base.join(&e.image_path);
            if !image.is_file() {
                return Err(missing(image));
            }
            for g in &e.gaze_track_paths {
                let gaze = base.join(g);
                if !gaze.is_file() {
                    return Err(missing(gaze));
                }
                let meta = with_suffix(&track_stem(&gaze), META_SUFFIX);
                if !meta.is_file() {
                    return Err(missing(meta));
                }
            }
        }
        Ok(())
    }
}

/// A manifest plus the directory its paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedManifest {
    pub base: PathBuf,
    pub manifest: Manifest,
}

impl LoadedManifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }
}

pub fn load_manifest(path: &Path) -> Result<LoadedManifest, ManifestError> {
    let raw = std::fs::read(path).map_err(|source| ManifestError::Io { path: path.into(), source })?;
    let manifest = Manifest::from_json(&raw)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    manifest.check_files(&base)?;
    Ok(LoadedManifest { base, manifest })
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<(), ManifestError> {
    write_atomic(path, &manifest.to_json()).map_err(|source| ManifestError::Io { path: path.into(), source })
}
