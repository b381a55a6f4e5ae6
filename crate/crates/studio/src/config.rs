//! JSON configuration for the service and for training runs. Relative paths
//! are resolved against the directory of the config file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use gazestudio_core::attnmap::REFERENCE_DISPLAY_PX;
use gazestudio_core::net::TrainConfig;
use gazestudio_core::pipeline::{BenchmarkConfig, SegmentParams};
use gazestudio_core::synth::SynthConfig;
use gazestudio_core::KernelConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_ENV: &str = "GAZE_STUDIO_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "gaze-studio.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

/// Explicit path, else `$GAZE_STUDIO_CONFIG`, else `gaze-studio.json`.
pub fn config_path(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG_FILE))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let raw = std::fs::read(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    serde_json::from_slice(&raw).map_err(|source| ConfigError::Json { path: path.into(), source })
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn base_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub manifest: PathBuf,
    /// Closed sessions are written here as track pairs.
    pub sessions_dir: PathBuf,
    /// Grade-0 track pairs for threshold calibration.
    pub healthy_dir: PathBuf,
    pub segment: SegmentParams,
    /// Kernel in display pixels; scaled per image by `image / display_px`.
    pub kernel: KernelConfig,
    pub display_px: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8750)),
            manifest: PathBuf::from("data/manifest.json"),
            sessions_dir: PathBuf::from("sessions"),
            healthy_dir: PathBuf::from("healthy"),
            segment: SegmentParams::default(),
            kernel: KernelConfig::default(),
            display_px: REFERENCE_DISPLAY_PX,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = read_json(path)?;
        let base = base_of(path);
        rebase(&base, &mut cfg.manifest);
        rebase(&base, &mut cfg.sessions_dir);
        rebase(&base, &mut cfg.healthy_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.segment.fit.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.segment.window == 0 || self.segment.stride == 0 {
            return Err(ConfigError::Invalid("window and stride must be positive".into()));
        }
        if !(self.kernel.sigma > 0.0 && self.kernel.radius > 0.0 && self.display_px > 0.0) {
            return Err(ConfigError::Invalid("kernel sigma, radius and display_px must be positive".into()));
        }
        Ok(())
    }
}

/// Everything `train` needs. Without `data` a corpus is generated from `synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainJob {
    pub data: Option<PathBuf>,
    pub synth: SynthConfig,
    pub benchmark: BenchmarkConfig,
    pub train: TrainConfig,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
}

impl Default for TrainJob {
    fn default() -> Self {
        Self {
            data: None,
            synth: SynthConfig::default(),
            benchmark: BenchmarkConfig::default(),
            train: TrainConfig::default(),
            checkpoint: PathBuf::from("checkpoint.json"),
            history: PathBuf::from("history.csv"),
        }
    }
}

impl TrainJob {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut job: Self = read_json(path)?;
        let base = base_of(path);
        if let Some(d) = job.data.as_mut() {
            rebase(&base, d);
        }
        rebase(&base, &mut job.checkpoint);
        rebase(&base, &mut job.history);
        job.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(job)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("svc.json");
        std::fs::write(&path, br#"{"manifest": "m/manifest.json", "healthy_dir": "/abs/healthy"}"#).unwrap();
        let cfg = ServiceConfig::load(&path).unwrap();
        assert_eq!(cfg.manifest, dir.path().join("m/manifest.json"));
        assert_eq!(cfg.healthy_dir, PathBuf::from("/abs/healthy"));
        assert_eq!(cfg.segment.window, 60);
    }

    #[test]
    fn invalid_kernel_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("svc.json");
        std::fs::write(&path, br#"{"kernel": {"radius": 99, "sigma": 0}}"#).unwrap();
        assert!(matches!(ServiceConfig::load(&path), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn explicit_path_wins() {
        assert_eq!(config_path(Some(Path::new("x.json"))), PathBuf::from("x.json"));
    }
}
