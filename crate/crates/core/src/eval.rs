//! Hit-based metrics: mean hit recall, precision and F1.
//!
//! A prediction hits a ground-truth instance when its rotation is within
//! `max_rotation_error` (geodesic angle) and the model centroid it produces is
//! within `max_translation_error` of the true one. Predictions are matched one
//! to one, in rank order, each taking the unmatched hit with the smallest
//! rotation error.

use crate::error::{Error, Result};
use crate::types::{Correspondence, Label, Point3, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HitCriteria {
    /// Radians.
    pub max_rotation_error: f64,
    /// Scene units.
    pub max_translation_error: f64,
}

impl Default for HitCriteria {
    /// 15° and a tenth of the (unit) model diameter.
    fn default() -> Self {
        Self {
            max_rotation_error: 15f64.to_radians(),
            max_translation_error: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampleScore {
    pub hits: usize,
    pub num_gt: usize,
    pub num_pred: usize,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl SampleScore {
    pub fn from_counts(hits: usize, num_gt: usize, num_pred: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let recall = ratio(hits, num_gt);
        let precision = ratio(hits, num_pred);
        let f1 = if recall + precision > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            hits,
            num_gt,
            num_pred,
            recall,
            precision,
            f1,
        }
    }
}

/// Dataset means of the per-sample scores, as fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetScore {
    pub mhr: f64,
    pub mhp: f64,
    pub mhf1: f64,
}

/// Geodesic angle between two rotations, in `[0, π]`.
pub fn rotation_error(a: &RigidTransform, b: &RigidTransform) -> f64 {
    // atan2 keeps full precision near 0 and π, where acos of the trace does not.
    let r = a.rotation.transpose() * b.rotation;
    let sin = 0.5 * nalgebra::Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    let cos = 0.5 * (r.trace() - 1.0);
    sin.atan2(cos)
}

/// Distance between the images of `anchor` under the two transforms.
pub fn translation_error(a: &RigidTransform, b: &RigidTransform, anchor: &Point3) -> f64 {
    (a.apply(anchor) - b.apply(anchor)).norm()
}

/// Scores ranked predictions against ground truth transforms; `anchor` is the
/// model centroid.
pub fn score_sample(
    predictions: &[RigidTransform],
    truth: &[RigidTransform],
    anchor: &Point3,
    crit: &HitCriteria,
) -> SampleScore {
    let mut matched = vec![false; truth.len()];
    let mut hits = 0;
    for pred in predictions {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in truth.iter().enumerate() {
            if matched[g] {
                continue;
            }
            let rot = rotation_error(pred, gt);
            if rot <= crit.max_rotation_error
                && translation_error(pred, gt, anchor) <= crit.max_translation_error
                && best.is_none_or(|(_, b)| rot < b)
            {
                best = Some((g, rot));
            }
        }
        if let Some((g, _)) = best {
            matched[g] = true;
            hits += 1;
        }
    }
    SampleScore::from_counts(hits, truth.len(), predictions.len())
}

pub fn score_dataset(samples: &[SampleScore]) -> Result<DatasetScore> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = samples.len() as f64;
    Ok(DatasetScore {
        mhr: samples.iter().map(|s| s.recall).sum::<f64>() / n,
        mhp: samples.iter().map(|s| s.precision).sum::<f64>() / n,
        mhf1: samples.iter().map(|s| s.f1).sum::<f64>() / n,
    })
}

/// Fraction of correspondences labeled as outliers; 0 for an empty set.
pub fn estimate_outlier_ratio(correspondences: &[Correspondence], labels: &[Label]) -> f64 {
    debug_assert_eq!(correspondences.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().filter(|l| l.is_none()).count() as f64 / labels.len() as f64
}

/// Model centroid of generated scenes.
pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);
