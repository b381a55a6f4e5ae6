use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FeatureStack, NetError};
use crate::rng::normal;

/// Clamp range of the log-variance `u = log σ²`.
pub const U_MIN: f64 = -6.0;
pub const U_MAX: f64 = 6.0;
pub const NORMALIZE_EPS: f64 = 1e-8;

/// Class weights `W` (`C x K`, row per class) and the uncertainty `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    classes: usize,
    channels: usize,
    weights: Vec<f64>,
    u: f64,
}

impl ClassifierParams {
    pub fn zeros(classes: usize, channels: usize) -> Self {
        Self { classes, channels, weights: vec![0.0; classes * channels], u: 0.0 }
    }

    /// Gaussian weights with standard deviation `std`, `u = 0`.
    pub fn random(classes: usize, channels: usize, std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..classes * channels).map(|_| normal(&mut rng) * std).collect();
        Self { classes, channels, weights, u: 0.0 }
    }

    pub fn from_parts(classes: usize, channels: usize, weights: Vec<f64>, u: f64) -> Result<Self, NetError> {
        if weights.len() != classes * channels || classes == 0 || channels == 0 {
            return Err(NetError::ShapeMismatch("weights do not match C x K"));
        }
        if weights.iter().any(|w| !w.is_finite()) || !u.is_finite() {
            return Err(NetError::BadConfig("parameters must be finite"));
        }
        Ok(Self { classes, channels, weights, u: u.clamp(U_MIN, U_MAX) })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn class_weights(&self, c: usize) -> &[f64] {
        &self.weights[c * self.channels..(c + 1) * self.channels]
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn set_u(&mut self, u: f64) {
        self.u = u.clamp(U_MIN, U_MAX);
    }

    /// `σ = exp(u/2)`.
    pub fn sigma(&self) -> f64 {
        libm::exp(self.u / 2.0)
    }

    fn check(&self, f: &FeatureStack) -> Result<(), NetError> {
        if f.channels() != self.channels {
            return Err(NetError::ShapeMismatch("feature channels differ from weight columns"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ClassScores {
    /// Highest-scoring class; ties go to the lower index.
    pub fn predicted(&self) -> usize {
        argmax(&self.scores)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Max-shifted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| libm::exp(s - m)).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub(crate) fn scores_from_pooled(pooled: &[f64], params: &ClassifierParams) -> Vec<f64> {
    (0..params.classes)
        .map(|c| params.class_weights(c).iter().zip(pooled).map(|(w, g)| w * g).sum())
        .collect()
}

/// `S^c = Σ_k w_k^c · GAP(f_k)` and their softmax.
pub fn class_scores(f: &FeatureStack, params: &ClassifierParams) -> Result<ClassScores, NetError> {
    params.check(f)?;
    let scores = scores_from_pooled(&f.pooled(), params);
    let probs = softmax(&scores);
    Ok(ClassScores { scores, probs })
}

/// `A^c(x, y) = Σ_k w_k^c · f_k(x, y)`, row-major over the feature grid.
pub fn cam(f: &FeatureStack, params: &ClassifierParams, c: usize) -> Result<Vec<f64>, NetError> {
    params.check(f)?;
    if c >= params.classes {
        return Err(NetError::BadClass { class: c, classes: params.classes });
    }
    let mut out = vec![0.0; f.pixels()];
    for (k, &w) in params.class_weights(c).iter().enumerate() {
        for (o, v) in out.iter_mut().zip(f.channel(k)) {
            *o += w * v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CamOutput {
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
    pub cams: Vec<Vec<f64>>,
}

pub fn forward(f: &FeatureStack, params: &ClassifierParams) -> Result<CamOutput, NetError> {
    let ClassScores { scores, probs } = class_scores(f, params)?;
    let cams = (0..params.classes).map(|c| cam(f, params, c)).collect::<Result<_, _>>()?;
    Ok(CamOutput { scores, probs, cams })
}

/// Negatives to zero, then divide by `max + ε`.
pub fn normalize_attention(map: &[f64]) -> Vec<f64> {
    let m = map.iter().fold(0.0f64, |m, &v| m.max(v));
    map.iter().map(|&v| v.max(0.0) / (m + NORMALIZE_EPS)).collect()
}

/// Mean squared difference over the grid.
pub fn mse_consistency(a: &[f64], g: &[f64]) -> Result<f64, NetError> {
    if a.len() != g.len() || a.is_empty() {
        return Err(NetError::ShapeMismatch("attention maps differ in size"));
    }
    Ok(a.iter().zip(g).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `½·e^{-u}·mse(A, G) + u/2`, with `u = log σ²`.
pub fn ac_loss(a: &[f64], g: &[f64], u: f64) -> Result<f64, NetError> {
    Ok(0.5 * libm::exp(-u) * mse_consistency(a, g)? + 0.5 * u)
}
