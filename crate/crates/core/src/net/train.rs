use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::grade_errors;
use super::objective::run;
use super::{total_loss, CamTarget, ClassifierParams, Example, LossConfig, NetError};
use crate::gaze::KlGrade;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct TrainConfig {
    pub lambda_ac: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub cam_target: CamTarget,
    /// Standard deviation of the initial class weights.
    pub init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_ac: 1.0,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            adam: AdamConfig::default(),
            cam_target: CamTarget::Predicted,
            init_std: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn loss(&self) -> LossConfig {
        LossConfig { lambda_ac: self.lambda_ac, cam_target: self.cam_target }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.lambda_ac >= 0.0 && self.lambda_ac.is_finite()) {
            return Err(NetError::BadConfig("lambda_ac must be non-negative"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::BadConfig("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(NetError::BadConfig("batch_size and epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "val",
        }
    }
}

/// One row of the learning curves. Epoch 0 is the untrained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: Split,
    pub acc: f64,
    pub mae: f64,
    pub ce: f64,
    pub ac: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn last(&self, split: Split) -> Option<&EpochRecord> {
        self.split(split).last()
    }

    pub fn first(&self, split: Split) -> Option<&EpochRecord> {
        self.split(split).next()
    }
}

struct Adam {
    cfg: AdamConfig,
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(cfg: AdamConfig, lr: f64, n: usize) -> Self {
        Self { cfg, lr, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - libm::pow(beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(beta2, self.step as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= self.lr * (*m / c1) / (libm::sqrt(*v / c2) + eps);
        }
    }
}

fn record(set: &[Example], params: &ClassifierParams, loss: &LossConfig, epoch: usize, split: Split) -> Result<EpochRecord, NetError> {
    let l = total_loss(set, params, loss)?;
    let (acc, mae) = grade_errors(set, params)?;
    Ok(EpochRecord { epoch, split, acc, mae, ce: l.ce, ac: l.ac })
}

/// Mini-batch Adam over `W` and `u`; `u` is projected back into its clamp
/// range after every step. Deterministic for a given `cfg.seed`.
pub fn train(
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
) -> Result<(ClassifierParams, History), NetError> {
    cfg.validate()?;
    let first = train_set.first().ok_or(NetError::EmptyDataset)?;
    let channels = first.features.channels();
    let mut params = ClassifierParams::random(KlGrade::COUNT, channels, cfg.init_std, cfg.seed);
    let loss = cfg.loss();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut adam = Adam::new(cfg.adam, cfg.learning_rate, params.weights().len() + 1);
    let mut flat = vec![0.0; params.weights().len() + 1];
    let mut grads = vec![0.0; flat.len()];

    let mut history = History::default();
    let snapshot = |params: &ClassifierParams, epoch: usize, history: &mut History| -> Result<(), NetError> {
        history.records.push(record(train_set, params, &loss, epoch, Split::Train)?);
        if !val_set.is_empty() {
            history.records.push(record(val_set, params, &loss, epoch, Split::Validation)?);
        }
        Ok(())
    };
    snapshot(&params, 0, &mut history)?;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &train_set[i]));
            let g = run(&batch, &params, &loss, true)?;
            let n = params.weights().len();
            flat[..n].copy_from_slice(params.weights());
            flat[n] = params.u();
            grads[..n].copy_from_slice(&g.w);
            grads[n] = g.u;
            adam.update(&mut flat, &grads);
            params.weights_mut().copy_from_slice(&flat[..n]);
            params.set_u(flat[n]);
        }
        snapshot(&params, epoch, &mut history)?;
    }
    Ok((params, history))
}
