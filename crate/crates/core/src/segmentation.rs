//! Attention levels: power-law fits of gaze step lengths over sliding
//! windows, threshold calibration on healthy reads, and fixation filtering.
//!
//! Within a window the step-length density is modelled as `p(s) = γ·s^-2`.
//! A compact window (many short steps) puts its mass in the low bins where
//! `s^-2` is large, so its fitted `γ` is high; high `γ` means fixation.

use alloc::vec::Vec;

use thiserror::Error;

use crate::gaze::{step_lengths_of, GazeTrack};

pub const DEFAULT_WINDOW: usize = 60;
pub const DEFAULT_STRIDE: usize = 1;
/// Fewest in-range steps a fit will accept.
pub const MIN_FIT_STEPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("only {in_range} steps inside the fit range, need {MIN_FIT_STEPS}")]
    InsufficientData { in_range: usize },
    #[error("all steps fall in a single histogram bin")]
    DegenerateSteps,
    #[error("track has {len} samples, need at least {needed}")]
    TrackTooShort { len: usize, needed: usize },
    #[error("no window produced a valid fit")]
    NoValidWindows,
    #[error("attention levels were computed for {expected} samples, track has {got}")]
    MismatchedSeries { expected: usize, got: usize },
    #[error("invalid fit configuration: {0}")]
    BadConfig(&'static str),
}

/// Histogram range and resolution for the power-law fit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct PowerLawFitConfig {
    pub s_min: f64,
    pub s_max: f64,
    pub n_bins: usize,
}

impl Default for PowerLawFitConfig {
    fn default() -> Self {
        Self { s_min: 1.0, s_max: 400.0, n_bins: 24 }
    }
}

impl PowerLawFitConfig {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if !(self.s_min > 0.0 && self.s_min.is_finite()) {
            return Err(SegmentError::BadConfig("s_min must be positive"));
        }
        if !(self.s_max > self.s_min && self.s_max.is_finite()) {
            return Err(SegmentError::BadConfig("s_max must exceed s_min"));
        }
        if self.n_bins < 4 {
            return Err(SegmentError::BadConfig("n_bins must be at least 4"));
        }
        Ok(())
    }

    /// Log-spaced bin edges, `n_bins + 1` of them.
    pub fn edges(&self) -> Vec<f64> {
        let ratio = self.s_max / self.s_min;
        (0..=self.n_bins)
            .map(|j| self.s_min * libm::pow(ratio, j as f64 / self.n_bins as f64))
            .collect()
    }

    fn bin_of(&self, s: f64) -> Option<usize> {
        if s > self.s_max {
            return None;
        }
        let pos = libm::log(s / self.s_min) / libm::log(self.s_max / self.s_min);
        let j = (pos * self.n_bins as f64) as usize;
        Some(j.min(self.n_bins - 1))
    }
}

/// Precomputed bin geometry for repeated fits with one configuration.
struct Histogram {
    cfg: PowerLawFitConfig,
    /// `s_j^-2 / width_j` per bin: the weight of one count in the numerator.
    count_weight: Vec<f64>,
    /// `Σ_j s_j^-4`.
    denominator: f64,
}

impl Histogram {
    fn new(cfg: &PowerLawFitConfig) -> Result<Self, SegmentError> {
        cfg.validate()?;
        let edges = cfg.edges();
        let mut count_weight = Vec::with_capacity(cfg.n_bins);
        let mut denominator = 0.0;
        for pair in edges.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let center = libm::sqrt(lo * hi);
            let inv_sq = 1.0 / (center * center);
            count_weight.push(inv_sq / (hi - lo));
            denominator += inv_sq * inv_sq;
        }
        Ok(Self { cfg: *cfg, count_weight, denominator })
    }

    /// Bin of a step after lifting it to `s_min`; `None` above `s_max`.
    fn bin(&self, s: f64) -> Option<usize> {
        self.cfg.bin_of(s.max(self.cfg.s_min))
    }

    fn fit(&self, counts: &[usize], total: usize) -> Result<f64, SegmentError> {
        let in_range: usize = counts.iter().sum();
        if in_range < MIN_FIT_STEPS {
            return Err(SegmentError::InsufficientData { in_range });
        }
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(SegmentError::DegenerateSteps);
        }
        let num: f64 = counts.iter().zip(&self.count_weight).map(|(&c, w)| c as f64 * w).sum();
        Ok(num / total as f64 / self.denominator)
    }
}

/// Least-squares coefficient of `d_j ≈ γ·s_j^-2` over the log-spaced
/// histogram, where `d_j` is the empirical density in bin `j` and `s_j` its
/// geometric center.
///
/// Steps below `s_min` (including zeros) are lifted to `s_min`. Steps above
/// `s_max` are not binned but still count toward the normalizing total.
pub fn fit_gamma(steps: &[f64], cfg: &PowerLawFitConfig) -> Result<f64, SegmentError> {
    let hist = Histogram::new(cfg)?;
    let mut counts = alloc::vec![0usize; cfg.n_bins];
    for &s in steps {
        if let Some(j) = hist.bin(s) {
            counts[j] += 1;
        }
    }
    hist.fit(&counts, steps.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowLevel {
    /// First sample of the window.
    pub start: usize,
    pub center: usize,
    pub gamma: f64,
    /// False when the fit failed and `gamma` was carried over from a neighbour.
    pub fitted: bool,
}

/// Per-window attention levels along one track.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttentionLevelSeries {
    pub window: usize,
    pub stride: usize,
    /// Sample count of the source track.
    pub n_samples: usize,
    pub levels: Vec<WindowLevel>,
    pub threshold: Option<f64>,
}

impl AttentionLevelSeries {
    pub fn gammas(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().map(|l| l.gamma)
    }

    pub fn with_threshold(mut self, gamma_th: f64) -> Self {
        self.threshold = Some(gamma_th);
        self
    }

    /// Window whose center is nearest to `sample`.
    pub fn window_for_sample(&self, sample: usize) -> &WindowLevel {
        let half = (self.window / 2) as f64;
        let idx = libm::round((sample as f64 - half) / self.stride as f64);
        let idx = idx.clamp(0.0, (self.levels.len() - 1) as f64) as usize;
        &self.levels[idx]
    }
}

/// Fits one `γ` per window position. A window covers `window` samples
/// (`window - 1` steps); positions advance by `stride`.
pub fn attention_levels(
    track: &GazeTrack,
    cfg: &PowerLawFitConfig,
    window: usize,
    stride: usize,
) -> Result<AttentionLevelSeries, SegmentError> {
    cfg.validate()?;
    if window < 2 {
        return Err(SegmentError::BadConfig("window must cover at least 2 samples"));
    }
    if stride == 0 {
        return Err(SegmentError::BadConfig("stride must be positive"));
    }
    let n = track.len();
    if n < window + 1 {
        return Err(SegmentError::TrackTooShort { len: n, needed: window + 1 });
    }
    let steps = step_lengths_of(track.samples()).expect("track has at least two samples");
    let hist = Histogram::new(cfg)?;
    let bins: Vec<Option<usize>> = steps.as_slice().iter().map(|&s| hist.bin(s)).collect();
    let span = window - 1;

    let mut levels = Vec::with_capacity((n - window) / stride + 1);
    let mut last: Option<f64> = None;
    let mut counts = alloc::vec![0usize; cfg.n_bins];
    // Steps currently counted: [lo, hi).
    let (mut lo, mut hi) = (0usize, 0usize);
    for start in (0..=n - window).step_by(stride) {
        let end = start + span;
        if start >= hi {
            counts.iter_mut().for_each(|c| *c = 0);
            lo = start;
            hi = start;
        }
        for b in bins[lo..start].iter().flatten() {
            counts[*b] -= 1;
        }
        for b in bins[hi..end].iter().flatten() {
            counts[*b] += 1;
        }
        (lo, hi) = (start, end);
        let fit = hist.fit(&counts, span).ok();
        let (gamma, fitted) = match (fit, last) {
            (Some(g), _) => (g, true),
            (None, Some(prev)) => (prev, false),
            (None, None) => (f64::NAN, false),
        };
        if fitted {
            last = Some(gamma);
        }
        levels.push(WindowLevel { start, center: start + window / 2, gamma, fitted });
    }
    // Leading windows that failed take the first successful fit.
    let first = levels.iter().find(|l| l.fitted).map(|l| l.gamma).ok_or(SegmentError::NoValidWindows)?;
    for l in levels.iter_mut().take_while(|l| !l.fitted) {
        l.gamma = first;
    }

    Ok(AttentionLevelSeries { window, stride, n_samples: n, levels, threshold: None })
}

/// Mean of every window `γ` pooled across the given series.
pub fn threshold_from_levels<'a, I>(series: I) -> Result<f64, SegmentError>
where
    I: IntoIterator<Item = &'a AttentionLevelSeries>,
{
    let (sum, count) = series
        .into_iter()
        .flat_map(|s| s.gammas())
        .fold((0.0, 0usize), |(s, c), g| (s + g, c + 1));
    if count == 0 {
        return Err(SegmentError::NoValidWindows);
    }
    Ok(sum / count as f64)
}

/// `γ_th` from healthy reads. Tracks too short for one window, or with no
/// fittable window, are skipped.
pub fn calibrate_threshold(
    healthy: &[GazeTrack],
    cfg: &PowerLawFitConfig,
    window: usize,
    stride: usize,
) -> Result<f64, SegmentError> {
    cfg.validate()?;
    let mut series = Vec::new();
    for track in healthy {
        match attention_levels(track, cfg, window, stride) {
            Ok(s) => series.push(s),
            Err(SegmentError::TrackTooShort { .. } | SegmentError::NoValidWindows) => {}
            Err(e) => return Err(e),
        }
    }
    threshold_from_levels(&series)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixationMask {
    pub keep: Vec<bool>,
}

impl FixationMask {
    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn kept_fraction(&self) -> f64 {
        if self.keep.is_empty() {
            0.0
        } else {
            self.kept() as f64 / self.keep.len() as f64
        }
    }
}

/// Keeps a sample iff the window centered on it has `γ > γ_th`.
pub fn filter_fixations(
    track: &GazeTrack,
    levels: &AttentionLevelSeries,
    gamma_th: f64,
) -> Result<(FixationMask, GazeTrack), SegmentError> {
    if levels.n_samples != track.len() || levels.levels.is_empty() {
        return Err(SegmentError::MismatchedSeries { expected: levels.n_samples, got: track.len() });
    }
    let keep: Vec<bool> = (0..track.len()).map(|i| levels.window_for_sample(i).gamma > gamma_th).collect();
    let kept = track
        .samples()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(s, _)| *s)
        .collect();
    Ok((FixationMask { keep }, track.with_samples_unchecked(kept)))
}
