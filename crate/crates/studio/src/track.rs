//! Gaze logs on disk: `<name>.gaze.jsonl` samples, `<name>.meta.json`
//! metadata and the optional `<name>.labels.jsonl` fixation flags.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gazestudio_core::gaze::GazeError;
use gazestudio_core::{GazeSample, GazeTrack, TrackMeta};
use serde::Deserialize;
use thiserror::Error;

pub const GAZE_SUFFIX: &str = ".gaze.jsonl";
pub const META_SUFFIX: &str = ".meta.json";
pub const LABELS_SUFFIX: &str = ".labels.jsonl";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {0} is not a gaze sample")]
    MalformedLine(usize),
    #[error("track has no samples")]
    EmptyTrack,
    #[error("timestamp at line {0} does not increase")]
    NonMonotonicTime(usize),
    #[error("invalid track: {0}")]
    Invalid(GazeError),
    #[error("metadata: {0}")]
    BadMeta(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ParseError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Stable-sort samples by time before validation. When off, a
    /// timestamp that does not increase is an error.
    pub sort: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { sort: true }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    t_ms: f64,
    x: f64,
    y: f64,
}

/// Parses JSONL samples; blank lines are skipped. Line numbers are 1-based.
pub fn parse_track(raw: &[u8], meta: TrackMeta, opts: ParseOptions) -> Result<GazeTrack, ParseError> {
    let text = std::str::from_utf8(raw).map_err(|e| {
        let line = raw[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        ParseError::MalformedLine(line)
    })?;
    let mut rows: Vec<(usize, GazeSample)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(line).map_err(|_| ParseError::MalformedLine(i + 1))?;
        rows.push((i + 1, GazeSample::new(l.t_ms, l.x, l.y)));
    }
    if rows.is_empty() {
        return Err(ParseError::EmptyTrack);
    }
    if opts.sort {
        rows.sort_by(|a, b| a.1.t.total_cmp(&b.1.t));
    }
    let lines: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let samples = rows.into_iter().map(|r| r.1).collect();
    GazeTrack::new(meta, samples).map_err(|e| match e {
        GazeError::EmptyTrack => ParseError::EmptyTrack,
        GazeError::NonMonotonicTime { index } => ParseError::NonMonotonicTime(lines[index]),
        GazeError::NonFinite { index } => ParseError::MalformedLine(lines[index]),
        other => ParseError::Invalid(other),
    })
}

pub fn serialize_samples(samples: &[GazeSample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 48);
    for s in samples {
        serde_json::to_writer(&mut out, s).expect("samples serialize");
        out.push(b'\n');
    }
    out
}

pub fn serialize_track(track: &GazeTrack) -> Vec<u8> {
    serialize_samples(track.samples())
}

pub fn parse_meta(raw: &[u8]) -> Result<TrackMeta, ParseError> {
    let meta: TrackMeta = serde_json::from_slice(raw)?;
    if meta.image_width == 0 || meta.image_height == 0 {
        return Err(ParseError::Invalid(GazeError::BadDimensions { width: meta.image_width, height: meta.image_height }));
    }
    Ok(meta)
}

pub fn serialize_meta(meta: &TrackMeta) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(meta).expect("meta serializes");
    out.push(b'\n');
    out
}

pub fn parse_labels(raw: &[u8]) -> Result<Vec<bool>, ParseError> {
    let text = std::str::from_utf8(raw).map_err(|_| ParseError::MalformedLine(1))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str::<bool>(l).map_err(|_| ParseError::MalformedLine(i + 1)))
        .collect()
}

pub fn serialize_labels(labels: &[bool]) -> Vec<u8> {
    labels.iter().flat_map(|&b| if b { &b"true\n"[..] } else { &b"false\n"[..] }).copied().collect()
}

/// `dir/name.gaze.jsonl` -> `dir/name`; any other path is returned as is.
pub fn track_stem(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    match s.strip_suffix(GAZE_SUFFIX).or_else(|| s.strip_suffix(META_SUFFIX)) {
        Some(stem) => PathBuf::from(stem),
        None => path.to_path_buf(),
    }
}

pub fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, ParseError> {
    fs::read(path).map_err(|e| ParseError::io(path, e))
}

/// Reads a `.gaze.jsonl` / `.meta.json` pair.
pub fn load_track(gaze: &Path, meta: &Path) -> Result<GazeTrack, ParseError> {
    let meta = parse_meta(&read_file(meta)?)?;
    parse_track(&read_file(gaze)?, meta, ParseOptions::default())
}

/// Reads the pair that shares `stem`.
pub fn load_track_stem(stem: &Path) -> Result<GazeTrack, ParseError> {
    load_track(&with_suffix(stem, GAZE_SUFFIX), &with_suffix(stem, META_SUFFIX))
}

/// Writes the pair for `stem`, each file via a temporary sibling and rename.
pub fn save_track(stem: &Path, track: &GazeTrack) -> std::io::Result<()> {
    write_atomic(&with_suffix(stem, GAZE_SUFFIX), &serialize_track(track))?;
    write_atomic(&with_suffix(stem, META_SUFFIX), &serialize_meta(track.meta()))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)
}

/// Every track pair directly inside `dir`, sorted by file name.
pub fn load_track_dir(dir: &Path) -> Result<Vec<GazeTrack>, ParseError> {
    let mut stems: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ParseError::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.to_string_lossy().ends_with(GAZE_SUFFIX))
        .map(|p| track_stem(&p))
        .collect();
    stems.sort();
    stems.iter().map(|s| load_track_stem(s)).collect()
}
