use alloc::vec::Vec;

use super::model::argmax;
use super::{cam, class_scores, normalize_attention, ClassifierParams, Example, NetError};
use crate::attnmap::{iou, upsample_nearest, AttentionMap};
use crate::gaze::KlGrade;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub n: usize,
    pub acc: f64,
    pub mae: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; KlGrade::COUNT]; KlGrade::COUNT],
    /// `|predicted - true|` per example, in input order.
    pub abs_errors: Vec<f64>,
    pub predictions: Vec<usize>,
    /// IoU of the predicted-class CAM against the boxes, for examples that have boxes.
    pub ious: Vec<f64>,
    pub mean_iou: Option<f64>,
}

impl Evaluation {
    pub fn class_counts(&self) -> [usize; KlGrade::COUNT] {
        let mut out = [0; KlGrade::COUNT];
        for (c, row) in self.confusion.iter().enumerate() {
            out[c] = row.iter().sum();
        }
        out
    }

    pub fn class_correct(&self) -> [usize; KlGrade::COUNT] {
        let mut out = [0; KlGrade::COUNT];
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.confusion[c][c];
        }
        out
    }
}

/// Fraction of exact matches and mean absolute grade difference.
pub fn accuracy_and_mae(predicted: &[usize], truth: &[usize]) -> (f64, f64) {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return (0.0, 0.0);
    }
    let n = truth.len() as f64;
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64;
    let abs: f64 = predicted.iter().zip(truth).map(|(&p, &t)| (p as f64 - t as f64).abs()).sum();
    (correct / n, abs / n)
}

pub(crate) fn grade_errors(set: &[Example], params: &ClassifierParams) -> Result<(f64, f64), NetError> {
    let mut pred = Vec::with_capacity(set.len());
    for ex in set {
        pred.push(argmax(&class_scores(&ex.features, params)?.scores));
    }
    let truth: Vec<usize> = set.iter().map(|e| e.grade.index()).collect();
    Ok(accuracy_and_mae(&pred, &truth))
}

/// Accuracy, MAE, confusion table and CAM localization. The CAM of the
/// predicted class is normalized, resized to image space by nearest
/// neighbour and binarized at `iou_level · max`.
pub fn evaluate(params: &ClassifierParams, set: &[Example], iou_level: f64) -> Result<Evaluation, NetError> {
    let mut confusion = [[0usize; KlGrade::COUNT]; KlGrade::COUNT];
    let mut predictions = Vec::with_capacity(set.len());
    let mut ious = Vec::new();
    for ex in set {
        let s = class_scores(&ex.features, params)?;
        let p = s.predicted();
        predictions.push(p);
        if p < KlGrade::COUNT {
            confusion[ex.grade.index()][p] += 1;
        }
        if !ex.boxes.is_empty() {
            let a = normalize_attention(&cam(&ex.features, params, p)?);
            let grid = AttentionMap::from_values(ex.features.width(), ex.features.height(), a)
                .map_err(|_| NetError::ShapeMismatch("CAM grid"))?;
            let full = upsample_nearest(&grid, ex.image_width, ex.image_height);
            // Boxes are non-empty so the union cannot be empty.
            ious.push(iou(&full, &ex.boxes, iou_level).unwrap_or(0.0));
        }
    }
    let truth: Vec<usize> = set.iter().map(|e| e.grade.index()).collect();
    let (acc, mae) = accuracy_and_mae(&predictions, &truth);
    let abs_errors = predictions.iter().zip(&truth).map(|(&p, &t)| (p as f64 - t as f64).abs()).collect();
    let mean_iou = (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64);
    Ok(Evaluation { n: set.len(), acc, mae, confusion, abs_errors, predictions, ious, mean_iou })
}
