use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::NetError;
use crate::rng::normal;

/// Spatial size of every feature map.
pub const FEATURE_GRID: usize = 16;
pub const FILTER_SIZE: usize = 5;
pub const DEFAULT_CHANNELS: usize = 64;
/// Response scale of the rectified features.
pub const FEATURE_GAIN: f64 = 100.0;
/// Filter thresholds are `|N(0, THRESHOLD_SD)|`.
pub const THRESHOLD_SD: f64 = 0.1;

/// Row-major grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer does not match dimensions");
        Self { width, height, pixels }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| libm::floor(v * 255.0 + 0.5).clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_gray8(width: usize, height: usize, bytes: &[u8]) -> Self {
        Self::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }
}

/// Seeded, non-trainable 5x5 filters.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    seed: u64,
    filters: Vec<[f64; FILTER_SIZE * FILTER_SIZE]>,
    thresholds: Vec<f64>,
}

impl FilterBank {
    pub fn new(seed: u64, channels: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut filters = Vec::with_capacity(channels);
        let mut thresholds = Vec::with_capacity(channels);
        for _ in 0..channels {
            let mut f = [0.0; FILTER_SIZE * FILTER_SIZE];
            for w in &mut f {
                *w = normal(&mut rng);
            }
            let norm = libm::sqrt(f.iter().map(|w| w * w).sum::<f64>());
            f.iter_mut().for_each(|w| *w /= norm);
            filters.push(f);
            thresholds.push(libm::fabs(normal(&mut rng)) * THRESHOLD_SD);
        }
        Self { seed, filters, thresholds }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn channels(&self) -> usize {
        self.filters.len()
    }
}

impl Default for FilterBank {
    fn default() -> Self {
        Self::new(0, DEFAULT_CHANNELS)
    }
}

/// `K` rectified response maps on a `16 x 16` grid, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    channels: usize,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl FeatureStack {
    pub fn from_values(channels: usize, width: usize, height: usize, values: Vec<f64>) -> Result<Self, NetError> {
        if values.len() != channels * width * height || channels == 0 || width == 0 || height == 0 {
            return Err(NetError::ShapeMismatch("feature values do not match K x X x Y"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(NetError::BadConfig("features must be finite and non-negative"));
        }
        Ok(Self { channels, width, height, values })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let p = self.pixels();
        &self.values[k * p..(k + 1) * p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Spatial mean of each channel.
    pub fn pooled(&self) -> Vec<f64> {
        let n = self.pixels() as f64;
        (0..self.channels).map(|k| self.channel(k).iter().sum::<f64>() / n).collect()
    }
}

/// One filter application per grid cell, centered in the cell:
/// `f = GAIN * max(0, w . (patch - m) - t)` with unit-norm `w`, threshold `t`
/// and `m` the median pixel of the image, so flat background stays near zero.
pub fn extract_features(image: &GrayImage, bank: &FilterBank) -> Result<FeatureStack, NetError> {
    let bad = NetError::BadGeometry { width: image.width, height: image.height };
    if !image.width.is_multiple_of(FEATURE_GRID) || !image.height.is_multiple_of(FEATURE_GRID) {
        return Err(bad);
    }
    let (pw, ph) = (image.width / FEATURE_GRID, image.height / FEATURE_GRID);
    if pw < FILTER_SIZE || ph < FILTER_SIZE {
        return Err(bad);
    }
    let (ox, oy) = ((pw - FILTER_SIZE) / 2, (ph - FILTER_SIZE) / 2);
    let cells = FEATURE_GRID * FEATURE_GRID;
    let level = median(&image.pixels);
    let mut values = vec![0.0; bank.channels() * cells];
    let mut patch = [0.0; FILTER_SIZE * FILTER_SIZE];
    for cy in 0..FEATURE_GRID {
        for cx in 0..FEATURE_GRID {
            let (x0, y0) = (cx * pw + ox, cy * ph + oy);
            for b in 0..FILTER_SIZE {
                for a in 0..FILTER_SIZE {
                    patch[b * FILTER_SIZE + a] = image.get(x0 + a, y0 + b) - level;
                }
            }
            for (k, (filter, t)) in bank.filters.iter().zip(&bank.thresholds).enumerate() {
                let r: f64 = filter.iter().zip(&patch).map(|(w, v)| w * v).sum();
                values[k * cells + cy * FEATURE_GRID + cx] = FEATURE_GAIN * (r - t).max(0.0);
            }
        }
    }
    Ok(FeatureStack { channels: bank.channels(), width: FEATURE_GRID, height: FEATURE_GRID, values })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s[s.len() / 2]
}
