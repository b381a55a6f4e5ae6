//! Trained classifier files and learning-curve CSV.

use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use gazestudio_core::net::{ClassifierParams, EpochRecord, FilterBank, History, Split};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::track::write_atomic;

pub const CHECKPOINT_FORMAT: &str = "gazestudio-checkpoint/1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format {0:?}")]
    Format(String),
    #[error("weights: {0}")]
    Base64(#[from] base64::DecodeError),
    #[error("weights: {0}")]
    Shape(String),
    #[error("history CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("history CSV: unknown split {0:?}")]
    Split(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Classifier weights (`W` rounded to f32), the uncertainty parameter, the
/// filter-bank seed and whatever configuration produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ClassifierParams,
    pub filter_seed: u64,
    pub config: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    classes: usize,
    channels: usize,
    /// Base64 of little-endian f32, class-major.
    weights: String,
    u: f64,
    filter_seed: u64,
    #[serde(default)]
    config: serde_json::Value,
}

impl Checkpoint {
    pub fn filter_bank(&self) -> FilterBank {
        FilterBank::new(self.filter_seed, self.params.channels())
    }

    pub fn to_json(&self) -> Vec<u8> {
        let raw: Vec<u8> = self.params.weights().iter().flat_map(|&w| (w as f32).to_le_bytes()).collect();
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            classes: self.params.classes(),
            channels: self.params.channels(),
            weights: STANDARD.encode(raw),
            u: self.params.u(),
            filter_seed: self.filter_seed,
            config: self.config.clone(),
        };
        let mut out = serde_json::to_vec_pretty(&file).expect("checkpoint serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(raw: &[u8]) -> Result<Self, CheckpointError> {
        let file: CheckpointFile = serde_json::from_slice(raw)?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format(file.format));
        }
        let bytes = STANDARD.decode(file.weights.as_bytes())?;
        if bytes.len() % 4 != 0 {
            return Err(CheckpointError::Shape(format!("{} bytes is not a whole number of f32", bytes.len())));
        }
        let weights: Vec<f64> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        let params = ClassifierParams::from_parts(file.classes, file.channels, weights, file.u)
            .map_err(|e| CheckpointError::Shape(e.to_string()))?;
        Ok(Self { params, filter_seed: file.filter_seed, config: file.config })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        write_atomic(path, &self.to_json()).map_err(|source| CheckpointError::Io { path: path.into(), source })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let raw = std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.into(), source })?;
        Self::from_json(&raw)
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    epoch: usize,
    split: String,
    acc: f64,
    mae: f64,
    ce: f64,
    ac: f64,
}

pub fn history_csv(history: &History) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &history.records {
        w.serialize(Row { epoch: r.epoch, split: r.split.as_str().into(), acc: r.acc, mae: r.mae, ce: r.ce, ac: r.ac })
            .expect("in-memory CSV write");
    }
    w.into_inner().expect("in-memory CSV flush")
}

pub fn parse_history(raw: &[u8]) -> Result<History, CheckpointError> {
    let mut records = Vec::new();
    for row in csv::Reader::from_reader(raw).deserialize::<Row>() {
        let row = row?;
        let split = match row.split.as_str() {
            "train" => Split::Train,
            "val" => Split::Validation,
            _ => return Err(CheckpointError::Split(row.split)),
        };
        records.push(EpochRecord { epoch: row.epoch, split, acc: row.acc, mae: row.mae, ce: row.ce, ac: row.ac });
    }
    Ok(History { records })
}

pub fn write_history(path: &Path, history: &History) -> Result<(), CheckpointError> {
    write_atomic(path, &history_csv(history)).map_err(|source| CheckpointError::Io { path: path.into(), source })
}
