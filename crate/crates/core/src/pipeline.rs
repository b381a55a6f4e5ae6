//! Track -> fixations -> gaze map -> supervision grid.

use alloc::vec::Vec;

use crate::attnmap::{downsample, render_gaze_map, AttentionMap, BBox, KernelConfig, REFERENCE_DISPLAY_PX};
use crate::gaze::{GazeTrack, KlGrade};
use crate::net::{extract_features, Example, FilterBank, GrayImage, NetError, DEFAULT_CHANNELS, FEATURE_GRID};
use crate::segmentation::{
    attention_levels, calibrate_threshold, filter_fixations, AttentionLevelSeries, FixationMask, PowerLawFitConfig, SegmentError,
};
use crate::synth::{SplitName, SynthCorpus};

/// Window and fit settings for fixation filtering.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct SegmentParams {
    pub fit: PowerLawFitConfig,
    pub window: usize,
    pub stride: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            fit: PowerLawFitConfig::default(),
            window: crate::segmentation::DEFAULT_WINDOW,
            stride: crate::segmentation::DEFAULT_STRIDE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub levels: AttentionLevelSeries,
    pub mask: FixationMask,
    pub filtered: GazeTrack,
}

pub fn segment(track: &GazeTrack, params: &SegmentParams, gamma_th: f64) -> Result<Segmented, SegmentError> {
    let levels = attention_levels(track, &params.fit, params.window, params.stride)?.with_threshold(gamma_th);
    let (mask, filtered) = filter_fixations(track, &levels, gamma_th)?;
    Ok(Segmented { levels, mask, filtered })
}

/// Gaze map of a track in its own image frame.
pub fn track_map(track: &GazeTrack, kernel: &KernelConfig) -> AttentionMap {
    let m = track.meta();
    render_gaze_map(&track.points(), m.image_width as usize, m.image_height as usize, kernel)
}

/// Gaze map pooled onto the feature grid. `None` when there are no points.
pub fn supervision_grid(points: &[(f64, f64)], width: usize, height: usize, kernel: &KernelConfig) -> Option<AttentionMap> {
    if points.is_empty() {
        return None;
    }
    let full = render_gaze_map(points, width, height, kernel);
    Some(downsample(&full, FEATURE_GRID, FEATURE_GRID))
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// How a synthetic corpus becomes training examples.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct BenchmarkConfig {
    pub segment: SegmentParams,
    /// Number of grade-0 tracks used to calibrate the threshold.
    pub calibration_tracks: usize,
    /// Training images that come with a gaze map, taken in corpus order.
    pub gaze_images: usize,
    /// Render gaze from fixation-filtered tracks rather than raw tracks.
    pub filter_gaze: bool,
    pub filter_seed: u64,
    pub channels: usize,
    /// Screen size the images were read at; scales the gaze kernel.
    pub display_px: f64,
    pub kernel: KernelConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            segment: SegmentParams::default(),
            calibration_tracks: 50,
            gaze_images: 100,
            filter_gaze: true,
            filter_seed: 0,
            channels: DEFAULT_CHANNELS,
            display_px: REFERENCE_DISPLAY_PX,
            kernel: KernelConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub gamma_th: f64,
    pub bank: FilterBank,
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

/// One labelled image with its (optional) gaze track, borrowed from a
/// synthetic corpus or a loaded dataset.
#[derive(Debug, Clone, Copy)]
pub struct ImageRecord<'a> {
    pub split: SplitName,
    pub grade: KlGrade,
    pub image: &'a GrayImage,
    pub boxes: &'a [BBox],
    pub track: Option<&'a GazeTrack>,
}

impl SynthCorpus {
    pub fn records(&self) -> Vec<ImageRecord<'_>> {
        self.items
            .iter()
            .map(|i| ImageRecord { split: i.split, grade: i.grade, image: &i.image, boxes: &i.boxes, track: Some(&i.track) })
            .collect()
    }
}

/// Mean window level over the tracks of the first `n` grade-0 records.
pub fn calibrate_on_records(records: &[ImageRecord<'_>], params: &SegmentParams, n: usize) -> Result<f64, SegmentError> {
    let healthy: Vec<GazeTrack> =
        records.iter().filter(|r| r.grade.value() == 0).filter_map(|r| r.track.cloned()).take(n).collect();
    calibrate_threshold(&healthy, &params.fit, params.window, params.stride)
}

/// Features for every image, plus gaze grids for the first
/// `cfg.gaze_images` training images that have a track. A track with no
/// kept samples yields no gaze map.
pub fn build_benchmark(records: &[ImageRecord<'_>], cfg: &BenchmarkConfig) -> Result<Benchmark, PipelineError> {
    let gamma_th = calibrate_on_records(records, &cfg.segment, cfg.calibration_tracks)?;
    let bank = FilterBank::new(cfg.filter_seed, cfg.channels);
    let mut out = Benchmark { gamma_th, bank, train: Vec::new(), val: Vec::new(), test: Vec::new() };
    let mut with_gaze = 0;
    for r in records {
        let gaze = match r.track {
            Some(track) if r.split == SplitName::Train && with_gaze < cfg.gaze_images => {
                with_gaze += 1;
                gaze_grid(track, r.image, cfg, gamma_th)?
            }
            _ => None,
        };
        let ex = Example {
            features: extract_features(r.image, &out.bank)?,
            grade: r.grade,
            gaze,
            boxes: r.boxes.to_vec(),
            image_width: r.image.width,
            image_height: r.image.height,
        };
        match r.split {
            SplitName::Train => out.train.push(ex),
            SplitName::Val => out.val.push(ex),
            SplitName::Test => out.test.push(ex),
        }
    }
    Ok(out)
}

fn gaze_grid(track: &GazeTrack, image: &GrayImage, cfg: &BenchmarkConfig, gamma_th: f64) -> Result<Option<AttentionMap>, SegmentError> {
    let kernel = cfg.kernel.for_display(image.width.max(image.height) as f64, cfg.display_px);
    let points = if cfg.filter_gaze { segment(track, &cfg.segment, gamma_th)?.filtered.points() } else { track.points() };
    Ok(supervision_grid(&points, image.width, image.height, &kernel))
}

/// Per-sample precision and recall of `predicted` against `truth`.
pub fn precision_recall(predicted: &[bool], truth: &[bool]) -> (f64, f64) {
    let pairs: Vec<(bool, bool)> = predicted.iter().copied().zip(truth.iter().copied()).collect();
    let tp = pairs.iter().filter(|&&(p, t)| p && t).count() as f64;
    let fp = pairs.iter().filter(|&&(p, t)| p && !t).count() as f64;
    let fn_ = pairs.iter().filter(|&&(p, t)| !p && t).count() as f64;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    (precision, recall)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_recall_counts() {
        let p = [true, true, false, false, true];
        let t = [true, false, true, false, true];
        assert_eq!(precision_recall(&p, &t), (2.0 / 3.0, 2.0 / 3.0));
    }

    #[test]
    fn empty_points_no_grid() {
        assert!(supervision_grid(&[], 128, 128, &KernelConfig::default()).is_none());
        let g = supervision_grid(&[(64.0, 64.0)], 128, 128, &KernelConfig::default().scaled(0.16)).unwrap();
        assert_eq!((g.width(), g.height()), (16, 16));
        assert_eq!(g.max(), 1.0);
    }
}
