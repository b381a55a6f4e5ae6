//! Synthetic lesion benchmark with planted gaze behaviour.
//!
//! Each image is a smooth noisy background plus, for grades 1-4, one
//! Gaussian lesion whose size and contrast grow with the grade. Each track
//! alternates saccade runs (long steps roaming the image, or scanning a
//! landmark square away from the lesion) and fixation runs (dwells of tight
//! jitter spread over the lesion, or on random spots for grade 0), and every
//! sample carries its ground-truth fixation label.
//! Pixels are quantized to 8 bits so images survive a PNG round trip.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attnmap::BBox;
use crate::gaze::{GazeSample, GazeTrack, KlGrade, TrackMeta, DEFAULT_RATE_HZ};
use crate::net::GrayImage;
use crate::rng::{normal, truncated_inverse_square};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct SynthConfig {
    pub image_size: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Lesion Gaussian sigma (px) for grades 1..=4.
    pub lesion_sigma: [f64; 4],
    /// Peak lesion intensity above background for grades 1..=4.
    pub lesion_contrast: [f64; 4],
    /// Small bright spots scattered within `2σ` of the lesion center, per grade.
    pub lesion_spots: [usize; 4],
    pub spot_sigma: f64,
    /// Relative per-image spread of sigma and contrast.
    pub lesion_spread: f64,
    pub background_level: f64,
    pub background_amplitude: f64,
    pub pixel_noise: f64,
    pub samples_per_track: usize,
    pub fixation_run: (usize, usize),
    /// Samples per dwell; a fixation run is a sequence of dwells.
    pub dwell: (usize, usize),
    pub saccade_run: (usize, usize),
    /// Fixation jitter radius (px) around each dwell center.
    pub fixation_jitter: f64,
    /// Dwell centers fall within this multiple of the lesion sigma of the
    /// lesion center.
    pub fixation_spread: f64,
    /// Probability that a fixation on a lesion image lands somewhere else.
    pub distractor_prob: f64,
    /// Truncated `s^-2` step range (px) for model-class saccades.
    pub saccade_steps: (f64, f64),
    /// Per-axis sigma (px) of off-model Gaussian saccade steps.
    pub gaussian_step_sigma: f64,
    /// Fraction of saccade runs that use Gaussian steps.
    pub gaussian_saccade_prob: f64,
    /// Fraction of saccade runs that scan a landmark square away from the
    /// lesion instead of roaming the whole image.
    pub landmark_prob: f64,
    /// Half side (px) of the landmark square.
    pub landmark_radius: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            image_size: 128,
            n_train: 200,
            n_val: 100,
            n_test: 200,
            lesion_sigma: [5.0, 7.0, 9.0, 11.0],
            lesion_contrast: [0.22, 0.32, 0.42, 0.52],
            lesion_spots: [3, 6, 9, 12],
            spot_sigma: 1.2,
            lesion_spread: 0.15,
            background_level: 0.35,
            background_amplitude: 0.05,
            pixel_noise: 0.01,
            samples_per_track: 900,
            fixation_run: (80, 160),
            dwell: (15, 40),
            saccade_run: (70, 150),
            fixation_jitter: 4.0,
            fixation_spread: 2.0,
            distractor_prob: 0.1,
            saccade_steps: (4.0, 80.0),
            gaussian_step_sigma: 10.0,
            gaussian_saccade_prob: 0.5,
            landmark_prob: 0.7,
            landmark_radius: 12.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lesion {
    pub cx: f64,
    pub cy: f64,
    pub sigma: f64,
    pub contrast: f64,
}

impl Lesion {
    /// `center ± 2σ`, clipped to the image.
    pub fn bbox(&self, size: usize) -> BBox {
        let s = size as f64;
        let x0 = (self.cx - 2.0 * self.sigma).max(0.0);
        let y0 = (self.cy - 2.0 * self.sigma).max(0.0);
        let x1 = (self.cx + 2.0 * self.sigma).min(s);
        let y1 = (self.cy + 2.0 * self.sigma).min(s);
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub id: String,
    pub split: SplitName,
    pub grade: KlGrade,
    pub image: GrayImage,
    pub lesion: Option<Lesion>,
    pub boxes: Vec<BBox>,
    pub track: GazeTrack,
    /// Ground-truth fixation flag per track sample.
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub items: Vec<SynthItem>,
}

impl SynthCorpus {
    pub fn split(&self, split: SplitName) -> impl Iterator<Item = &SynthItem> {
        self.items.iter().filter(move |i| i.split == split)
    }
}

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut items = Vec::with_capacity(cfg.n_train + cfg.n_val + cfg.n_test);
    for (split, n) in [(SplitName::Train, cfg.n_train), (SplitName::Val, cfg.n_val), (SplitName::Test, cfg.n_test)] {
        for i in 0..n {
            let grade = KlGrade::new((i % KlGrade::COUNT) as u8).unwrap();
            let id = format!("{}-{:04}", split.as_str(), i);
            items.push(generate_item(cfg, &mut rng, id, split, grade));
        }
    }
    SynthCorpus { config: cfg.clone(), items }
}

fn generate_item(cfg: &SynthConfig, rng: &mut ChaCha8Rng, id: String, split: SplitName, grade: KlGrade) -> SynthItem {
    let size = cfg.image_size;
    let mut image = background(cfg, rng);
    let lesion = (grade.value() > 0).then(|| {
        let g = grade.index() - 1;
        let jitter = |rng: &mut ChaCha8Rng| 1.0 + cfg.lesion_spread * (2.0 * rng.gen::<f64>() - 1.0);
        let sigma = cfg.lesion_sigma[g] * jitter(rng);
        let contrast = cfg.lesion_contrast[g] * jitter(rng);
        let margin = 2.0 * sigma + 2.0;
        let cx = rng.gen_range(margin..size as f64 - margin);
        let cy = rng.gen_range(margin..size as f64 - margin);
        Lesion { cx, cy, sigma, contrast }
    });
    if let Some(l) = &lesion {
        let mut blobs = vec![(l.cx, l.cy, l.sigma)];
        for _ in 0..cfg.lesion_spots[grade.index() - 1] {
            let (ox, oy) = disc(rng, 2.0 * l.sigma);
            blobs.push((l.cx + ox, l.cy + oy, cfg.spot_sigma));
        }
        for (bx, by, bs) in blobs {
            let inv = 1.0 / (2.0 * bs * bs);
            for y in 0..size {
                for x in 0..size {
                    let (dx, dy) = (x as f64 - bx, y as f64 - by);
                    let p = &mut image.pixels[y * size + x];
                    *p = (*p + l.contrast * libm::exp(-(dx * dx + dy * dy) * inv)).clamp(0.0, 1.0);
                }
            }
        }
    }
    image = GrayImage::from_gray8(size, size, &image.to_gray8());
    let boxes = lesion.iter().map(|l| l.bbox(size)).collect();
    let (samples, labels) = planted_track(cfg, rng, lesion.as_ref());
    let meta = TrackMeta::new(id.clone(), "synthetic", grade, size as u32, size as u32);
    let track = GazeTrack::new(meta, samples).expect("generated samples are valid");
    SynthItem { id, split, grade, image, lesion, boxes, track, labels }
}

/// Bilinear upsampling of a coarse random grid plus white noise.
fn background(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> GrayImage {
    const COARSE: usize = 6;
    let size = cfg.image_size;
    let coarse: Vec<f64> = (0..COARSE * COARSE).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
    let mut pixels = vec![0.0; size * size];
    let scale = (COARSE - 1) as f64 / (size - 1).max(1) as f64;
    for y in 0..size {
        let fy = y as f64 * scale;
        let (y0, ty) = ((fy as usize).min(COARSE - 2), fy - (fy as usize).min(COARSE - 2) as f64);
        for x in 0..size {
            let fx = x as f64 * scale;
            let (x0, tx) = ((fx as usize).min(COARSE - 2), fx - (fx as usize).min(COARSE - 2) as f64);
            let c = |i: usize, j: usize| coarse[j * COARSE + i];
            let smooth = (1.0 - ty) * ((1.0 - tx) * c(x0, y0) + tx * c(x0 + 1, y0))
                + ty * ((1.0 - tx) * c(x0, y0 + 1) + tx * c(x0 + 1, y0 + 1));
            let v = cfg.background_level + cfg.background_amplitude * smooth + cfg.pixel_noise * normal(rng);
            pixels[y * size + x] = v.clamp(0.0, 1.0);
        }
    }
    GrayImage::new(size, size, pixels)
}

fn reflect(v: f64, hi: f64) -> f64 {
    let period = 2.0 * hi;
    let m = v - period * libm::floor(v / period);
    if m > hi {
        period - m
    } else {
        m
    }
}

fn planted_track(cfg: &SynthConfig, rng: &mut ChaCha8Rng, lesion: Option<&Lesion>) -> (Vec<GazeSample>, Vec<bool>) {
    let n = cfg.samples_per_track;
    let size = cfg.image_size as f64;
    let dt = 1000.0 / DEFAULT_RATE_HZ;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut pos = (rng.gen_range(0.0..size), rng.gen_range(0.0..size));
    let mut fixating = false;
    let r = cfg.fixation_jitter;
    let lm = landmark(cfg, rng, lesion);
    while points.len() < n {
        if fixating {
            let len = rng.gen_range(cfg.fixation_run.0..=cfg.fixation_run.1);
            let (anchor, spread) = match lesion {
                Some(l) if rng.gen::<f64>() >= cfg.distractor_prob => ((l.cx, l.cy), cfg.fixation_spread * l.sigma),
                _ => ((rng.gen_range(r..size - r), rng.gen_range(r..size - r)), 2.0 * r),
            };
            let mut left = len;
            while left > 0 {
                let dwell = rng.gen_range(cfg.dwell.0..=cfg.dwell.1).min(left);
                left -= dwell;
                let (ox, oy) = disc(rng, spread);
                let center = (anchor.0 + ox, anchor.1 + oy);
                for _ in 0..dwell {
                    let (mut jx, mut jy) = (normal(rng) * r / 3.0, normal(rng) * r / 3.0);
                    let d = libm::hypot(jx, jy);
                    if d > r {
                        jx *= r / d;
                        jy *= r / d;
                    }
                    pos = ((center.0 + jx).clamp(0.0, size), (center.1 + jy).clamp(0.0, size));
                    points.push(pos);
                    labels.push(true);
                }
            }
        } else {
            let len = rng.gen_range(cfg.saccade_run.0..=cfg.saccade_run.1);
            let gaussian = rng.gen::<f64>() < cfg.gaussian_saccade_prob;
            let scan = rng.gen::<f64>() < cfg.landmark_prob;
            let side = 2.0 * cfg.landmark_radius;
            let (lo_x, lo_y) = (lm.0 - cfg.landmark_radius, lm.1 - cfg.landmark_radius);
            for _ in 0..len {
                let (dx, dy) = if gaussian {
                    (normal(rng) * cfg.gaussian_step_sigma, normal(rng) * cfg.gaussian_step_sigma)
                } else {
                    let s = truncated_inverse_square(rng, cfg.saccade_steps.0, cfg.saccade_steps.1);
                    let a = rng.gen_range(0.0..core::f64::consts::TAU);
                    (s * libm::cos(a), s * libm::sin(a))
                };
                pos = if scan {
                    let (x, y) = ((pos.0 - lo_x).clamp(0.0, side), (pos.1 - lo_y).clamp(0.0, side));
                    (lo_x + reflect(x + dx, side), lo_y + reflect(y + dy, side))
                } else {
                    (reflect(pos.0 + dx, size), reflect(pos.1 + dy, size))
                };
                points.push(pos);
                labels.push(false);
            }
        }
        fixating = !fixating;
    }
    points.truncate(n);
    labels.truncate(n);
    let samples = points.into_iter().enumerate().map(|(i, (x, y))| GazeSample::new(i as f64 * dt, x, y)).collect();
    (samples, labels)
}

/// Landmark center whose square stays inside the image and, when it can,
/// off the lesion box.
fn landmark(cfg: &SynthConfig, rng: &mut ChaCha8Rng, lesion: Option<&Lesion>) -> (f64, f64) {
    let size = cfg.image_size as f64;
    let r = cfg.landmark_radius.min(size / 2.0);
    let mut c = (size / 2.0, size / 2.0);
    for _ in 0..32 {
        c = (rng.gen_range(r..=size - r), rng.gen_range(r..=size - r));
        let clear = lesion.is_none_or(|l| {
            let b = l.bbox(cfg.image_size);
            c.0 + r < b.x || c.0 - r > b.x + b.w || c.1 + r < b.y || c.1 - r > b.y + b.h
        });
        if clear {
            break;
        }
    }
    c
}

fn disc(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    let rho = radius * libm::sqrt(rng.gen::<f64>());
    let a = rng.gen_range(0.0..core::f64::consts::TAU);
    (rho * libm::cos(a), rho * libm::sin(a))
}
