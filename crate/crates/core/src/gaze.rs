//! Gaze samples, tracks and step-length extraction.
//!
//! Coordinates are image-space pixels. A track is validated once at
//! construction: finite values, strictly increasing timestamps, and every
//! point clamped into `[0, width] x [0, height]`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Nominal sampling rate of the reference eye tracker.
pub const DEFAULT_RATE_HZ: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GazeError {
    #[error("track has no samples")]
    EmptyTrack,
    #[error("sample {index} has a non-finite value")]
    NonFinite { index: usize },
    #[error("timestamp at sample {index} does not increase")]
    NonMonotonicTime { index: usize },
    #[error("image dimensions must be positive, got {width}x{height}")]
    BadDimensions { width: u32, height: u32 },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("grade {0} is outside 0..=4")]
    BadGrade(i64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GazeSample {
    #[cfg_attr(feature = "serde", serde(rename = "t_ms"))]
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl GazeSample {
    pub const fn new(t: f64, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }

    fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.is_finite() && self.y.is_finite()
    }
}

/// Kellgren-Lawrence grade, 0 (normal) to 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "i64", into = "u8")
)]
pub struct KlGrade(u8);

impl KlGrade {
    pub const MAX: u8 = 4;
    pub const COUNT: usize = 5;

    pub fn new(value: u8) -> Result<Self, GazeError> {
        if value <= Self::MAX {
            Ok(Self(value))
        } else {
            Err(GazeError::BadGrade(value as i64))
        }
    }

    pub const fn value(self) -> u8 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = KlGrade> {
        (0..=Self::MAX).map(KlGrade)
    }
}

impl TryFrom<i64> for KlGrade {
    type Error = GazeError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        if (0..=Self::MAX as i64).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(GazeError::BadGrade(value))
        }
    }
}

impl From<KlGrade> for u8 {
    fn from(g: KlGrade) -> u8 {
        g.0
    }
}

impl fmt::Display for KlGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Everything about a track except its samples.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackMeta {
    pub image_id: String,
    pub reader_id: String,
    pub decision: KlGrade,
    pub image_width: u32,
    pub image_height: u32,
    #[cfg_attr(feature = "serde", serde(default = "default_rate"))]
    pub nominal_rate_hz: f64,
}

#[cfg(feature = "serde")]
fn default_rate() -> f64 {
    DEFAULT_RATE_HZ
}

impl TrackMeta {
    pub fn new(image_id: impl Into<String>, reader_id: impl Into<String>, decision: KlGrade, width: u32, height: u32) -> Self {
        Self {
            image_id: image_id.into(),
            reader_id: reader_id.into(),
            decision,
            image_width: width,
            image_height: height,
            nominal_rate_hz: DEFAULT_RATE_HZ,
        }
    }
}

/// One reading of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeTrack {
    meta: TrackMeta,
    samples: Vec<GazeSample>,
}

impl GazeTrack {
    /// Validates and clamps `samples`, which must already be in time order.
    pub fn new(meta: TrackMeta, mut samples: Vec<GazeSample>) -> Result<Self, GazeError> {
        if meta.image_width == 0 || meta.image_height == 0 {
            return Err(GazeError::BadDimensions { width: meta.image_width, height: meta.image_height });
        }
        if samples.is_empty() {
            return Err(GazeError::EmptyTrack);
        }
        let (w, h) = (meta.image_width as f64, meta.image_height as f64);
        for (index, s) in samples.iter_mut().enumerate() {
            if !s.is_finite() {
                return Err(GazeError::NonFinite { index });
            }
            s.x = s.x.clamp(0.0, w);
            s.y = s.y.clamp(0.0, h);
        }
        if let Some(index) = samples.windows(2).position(|p| p[1].t <= p[0].t) {
            return Err(GazeError::NonMonotonicTime { index: index + 1 });
        }
        Ok(Self { meta, samples })
    }

    /// Same metadata, subset of samples. Order is preserved so the time
    /// invariant carries over; an empty subset is allowed here.
    pub fn with_samples_unchecked(&self, samples: Vec<GazeSample>) -> Self {
        Self { meta: self.meta.clone(), samples }
    }

    pub fn meta(&self) -> &TrackMeta {
        &self.meta
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.x, s.y)).collect()
    }

    pub fn into_parts(self) -> (TrackMeta, Vec<GazeSample>) {
        (self.meta, self.samples)
    }
}

/// Distances between consecutive gaze samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepSeries {
    steps: Vec<f64>,
}

impl StepSeries {
    pub fn from_steps(steps: Vec<f64>) -> Self {
        debug_assert!(steps.iter().all(|s| s.is_finite() && *s >= 0.0));
        Self { steps }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

pub fn step_lengths_of(samples: &[GazeSample]) -> Result<StepSeries, GazeError> {
    if samples.len() < 2 {
        return Err(GazeError::InsufficientData { needed: 2, got: samples.len() });
    }
    let steps = samples
        .windows(2)
        .map(|p| libm::hypot(p[1].x - p[0].x, p[1].y - p[0].y))
        .collect();
    Ok(StepSeries { steps })
}

pub fn step_lengths(track: &GazeTrack) -> Result<StepSeries, GazeError> {
    step_lengths_of(track.samples())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn meta(w: u32, h: u32) -> TrackMeta {
        TrackMeta::new("img", "r1", KlGrade::new(2).unwrap(), w, h)
    }

    fn track(points: &[(f64, f64)]) -> GazeTrack {
        let samples = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| GazeSample::new(i as f64 * 11.1, x, y))
            .collect();
        GazeTrack::new(meta(800, 800), samples).unwrap()
    }

    #[test]
    fn three_four_five() {
        let s = step_lengths(&track(&[(0.0, 0.0), (3.0, 4.0), (3.0, 4.0)])).unwrap();
        assert_eq!(s.as_slice(), &[5.0, 0.0]);
    }

    #[test]
    fn single_sample_is_insufficient() {
        assert_eq!(
            step_lengths(&track(&[(1.0, 1.0)])),
            Err(GazeError::InsufficientData { needed: 2, got: 1 })
        );
    }

    #[test]
    fn identical_points_give_zero_steps() {
        let s = step_lengths(&track(&[(7.0, 9.0); 6])).unwrap();
        assert_eq!(s.as_slice(), &[0.0; 5]);
    }

    #[test]
    fn clamps_out_of_bounds() {
        let t = GazeTrack::new(meta(800, 600), vec![GazeSample::new(0.0, -5.0, 700.0)]).unwrap();
        assert_eq!(t.samples()[0], GazeSample::new(0.0, 0.0, 600.0));
    }

    #[test]
    fn rejects_regressing_time() {
        let samples = vec![GazeSample::new(0.0, 1.0, 1.0), GazeSample::new(5.0, 1.0, 1.0), GazeSample::new(5.0, 2.0, 2.0)];
        assert_eq!(GazeTrack::new(meta(10, 10), samples), Err(GazeError::NonMonotonicTime { index: 2 }));
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert_eq!(GazeTrack::new(meta(10, 10), vec![]), Err(GazeError::EmptyTrack));
        assert_eq!(
            GazeTrack::new(meta(10, 10), vec![GazeSample::new(0.0, f64::NAN, 1.0)]),
            Err(GazeError::NonFinite { index: 0 })
        );
        assert!(matches!(
            GazeTrack::new(meta(0, 10), vec![GazeSample::new(0.0, 1.0, 1.0)]),
            Err(GazeError::BadDimensions { .. })
        ));
    }

    #[test]
    fn grade_bounds() {
        assert!(KlGrade::new(4).is_ok());
        assert_eq!(KlGrade::new(5), Err(GazeError::BadGrade(5)));
        assert_eq!(KlGrade::try_from(-1), Err(GazeError::BadGrade(-1)));
    }

    proptest! {
        #[test]
        fn steps_are_rigid_invariant(
            pts in prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 2..40),
            angle in 0.0f64..core::f64::consts::TAU,
            dx in -300.0f64..300.0,
            dy in -300.0f64..300.0,
        ) {
            let samples: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| GazeSample::new(i as f64, x, y)).collect();
            let (c, s) = (libm::cos(angle), libm::sin(angle));
            let moved: Vec<_> = samples
                .iter()
                .map(|p| GazeSample::new(p.t, c * p.x - s * p.y + dx, s * p.x + c * p.y + dy))
                .collect();
            let a = step_lengths_of(&samples).unwrap();
            let b = step_lengths_of(&moved).unwrap();
            prop_assert_eq!(a.len(), samples.len() - 1);
            for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
    }
}
