//! Cross-entropy plus uncertainty-weighted attention consistency, and its
//! closed-form gradient with respect to `W` and `u`.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{argmax, scores_from_pooled, softmax};
use super::{cam, normalize_attention, ClassifierParams, FeatureStack, NetError, NORMALIZE_EPS};
use crate::attnmap::{AttentionMap, BBox};
use crate::gaze::KlGrade;

/// Which class's CAM is compared against the gaze map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum CamTarget {
    #[default]
    Predicted,
    TrueClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda_ac: f64,
    pub cam_target: CamTarget,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda_ac: 1.0, cam_target: CamTarget::Predicted }
    }
}

/// One labelled image as the trainer sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureStack,
    pub grade: KlGrade,
    /// Gaze map on the feature grid, when this image was read.
    pub gaze: Option<AttentionMap>,
    /// Lesion boxes in image pixels, for localization scoring.
    pub boxes: Vec<BBox>,
    pub image_width: usize,
    pub image_height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean cross-entropy over the batch.
    pub ce: f64,
    /// Mean consistency loss over the samples that carry gaze maps.
    pub ac: f64,
    pub gaze_samples: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Same layout as [`ClassifierParams::weights`].
    pub w: Vec<f64>,
    pub u: f64,
    pub loss: LossBreakdown,
}

fn check(batch: &[&Example], params: &ClassifierParams) -> Result<(), NetError> {
    for ex in batch {
        if ex.features.channels() != params.channels() {
            return Err(NetError::ShapeMismatch("feature channels differ from weight columns"));
        }
        if ex.grade.index() >= params.classes() {
            return Err(NetError::BadClass { class: ex.grade.index(), classes: params.classes() });
        }
        if let Some(g) = &ex.gaze {
            if g.width() != ex.features.width() || g.height() != ex.features.height() {
                return Err(NetError::ShapeMismatch("gaze map is not on the feature grid"));
            }
        }
    }
    Ok(())
}

pub fn total_loss(batch: &[Example], params: &ClassifierParams, cfg: &LossConfig) -> Result<LossBreakdown, NetError> {
    let refs: Vec<&Example> = batch.iter().collect();
    run(&refs, params, cfg, false).map(|g| g.loss)
}

pub fn gradients(batch: &[Example], params: &ClassifierParams, cfg: &LossConfig) -> Result<Gradients, NetError> {
    let refs: Vec<&Example> = batch.iter().collect();
    run(&refs, params, cfg, true)
}

pub(crate) fn run(batch: &[&Example], params: &ClassifierParams, cfg: &LossConfig, backward: bool) -> Result<Gradients, NetError> {
    check(batch, params)?;
    let (classes, channels) = (params.classes(), params.channels());
    let mut grad_w = vec![0.0; classes * channels];
    let mut grad_u = 0.0;
    let mut ce_sum = 0.0;
    let mut ac_sum = 0.0;
    let mut gaze_n = 0usize;
    let mut correct = 0usize;
    let n = batch.len().max(1) as f64;
    let gaze_total = batch.iter().filter(|e| e.gaze.is_some()).count();
    let u = params.u();
    let inv_var = libm::exp(-u);

    for &ex in batch {
        let pooled = ex.features.pooled();
        let scores = scores_from_pooled(&pooled, params);
        let probs = softmax(&scores);
        let y = ex.grade.index();
        let pred = argmax(&scores);
        correct += (pred == y) as usize;
        ce_sum -= libm::log(probs[y]);
        if backward {
            for c in 0..classes {
                let d = (probs[c] - (c == y) as u8 as f64) / n;
                for (gw, g) in grad_w[c * channels..(c + 1) * channels].iter_mut().zip(&pooled) {
                    *gw += d * g;
                }
            }
        }

        let Some(gaze) = &ex.gaze else { continue };
        gaze_n += 1;
        let target = match cfg.cam_target {
            CamTarget::Predicted => pred,
            CamTarget::TrueClass => y,
        };
        let raw = cam(&ex.features, params, target)?;
        let a = normalize_attention(&raw);
        let g = gaze.values();
        let pixels = a.len() as f64;
        let mse = a.iter().zip(g).map(|(x, t)| (x - t) * (x - t)).sum::<f64>() / pixels;
        ac_sum += 0.5 * inv_var * mse + 0.5 * u;
        if !backward || cfg.lambda_ac == 0.0 {
            continue;
        }
        let scale = cfg.lambda_ac / gaze_total as f64;
        grad_u += scale * (0.5 - 0.5 * inv_var * mse);

        // a_p = r_p / (m + ε) with r = relu(A) and m = r at the argmax pixel.
        let mut peak = 0;
        for (i, &v) in raw.iter().enumerate() {
            if v > raw[peak] {
                peak = i;
            }
        }
        let m = raw[peak].max(0.0);
        let denom = m + NORMALIZE_EPS;
        let dl_da: Vec<f64> = a.iter().zip(g).map(|(x, t)| inv_var * (x - t) / pixels).collect();
        let through_max: f64 = dl_da.iter().zip(&raw).map(|(d, r)| d * r.max(0.0)).sum::<f64>() / (denom * denom);
        let mut dl_draw: Vec<f64> = raw
            .iter()
            .zip(&dl_da)
            .map(|(&r, &d)| if r > 0.0 { d / denom } else { 0.0 })
            .collect();
        if raw[peak] > 0.0 {
            dl_draw[peak] -= through_max;
        }
        let row = &mut grad_w[target * channels..(target + 1) * channels];
        for (k, gw) in row.iter_mut().enumerate() {
            let dot: f64 = ex.features.channel(k).iter().zip(&dl_draw).map(|(f, d)| f * d).sum();
            *gw += scale * dot;
        }
    }

    let ce = ce_sum / n;
    let ac = if gaze_n > 0 { ac_sum / gaze_n as f64 } else { 0.0 };
    let loss = LossBreakdown { total: ce + cfg.lambda_ac * ac, ce, ac, gaze_samples: gaze_n, correct };
    Ok(Gradients { w: grad_w, u: grad_u, loss })
}
