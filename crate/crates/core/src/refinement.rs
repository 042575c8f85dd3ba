//! Recursive refinement of the initial clusters.
//!
//! Each pass estimates a transform from every sufficiently large cluster, drops
//! transforms whose inlier sets overlap by a large IOU, then relabels every
//! correspondence with its best transform. Passes repeat until the labels stop
//! changing.

use log::debug;

use crate::clustering::ClusterState;
use crate::error::{Error, Result};
use crate::rigid::{alignment_error, solve_rigid};
use crate::types::{Correspondence, InstanceHypothesis, Label};

/// Smallest cluster size threshold; three points fix a rigid transform.
pub const MIN_ALPHA: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    /// Threshold on the squared alignment error.
    pub inlier_thresh: f64,
    pub alpha0: usize,
    pub theta: f64,
    pub iou_merge_thresh: f64,
    pub max_iterations: usize,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            inlier_thresh: 0.3,
            alpha0: 3,
            theta: 3.0,
            iou_merge_thresh: 0.8,
            max_iterations: 10,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.inlier_thresh > 0.0
            && self.alpha0 > 0
            && self.theta > 0.0
            && self.iou_merge_thresh > 0.0
            && self.iou_merge_thresh <= 1.0
            && self.max_iterations > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("refinement settings out of range: {self:?}")))
        }
    }
}

/// Labels plus the hypotheses they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorrespondences {
    pub labels: Vec<Label>,
    pub hypotheses: Vec<InstanceHypothesis>,
    /// Passes executed by [`refine`]; zero for a single [`reassign`].
    pub iterations: usize,
}

impl LabeledCorrespondences {
    /// Member lists per hypothesis, in hypothesis order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        self.hypotheses.iter().map(|h| h.inlier_indices.clone()).collect()
    }
}

/// `min(α₀·θ^(n−1), round(N/100))`, never below [`MIN_ALPHA`].
pub fn alpha_schedule(iteration: usize, total: usize, cfg: &RefinementConfig) -> usize {
    let growth = cfg.alpha0 as f64 * cfg.theta.powi(iteration.saturating_sub(1) as i32);
    let cap = (total as f64 / 100.0).round();
    // Sizes are compared with `>`, so flooring a fractional threshold changes nothing.
    let alpha = growth.min(cap).floor();
    (alpha as usize).max(MIN_ALPHA)
}

/// Indices whose squared error under `hyp` is within the threshold.
fn inliers_of(
    transform: &crate::types::RigidTransform,
    correspondences: &[Correspondence],
    inlier_thresh: f64,
) -> Vec<usize> {
    correspondences
        .iter()
        .enumerate()
        .filter(|(_, c)| alignment_error(transform, c) <= inlier_thresh)
        .map(|(i, _)| i)
        .collect()
}

/// Solves a transform for every cluster with more than `alpha` members.
/// Degenerate clusters are skipped.
pub fn estimate_hypotheses(
    clusters: &[Vec<usize>],
    correspondences: &[Correspondence],
    alpha: usize,
    cfg: &RefinementConfig,
) -> Vec<InstanceHypothesis> {
    clusters
        .iter()
        .filter(|members| members.len() > alpha)
        .filter_map(|members| match solve_rigid(correspondences, members) {
            Ok(t) => Some(InstanceHypothesis::new(
                t,
                inliers_of(&t, correspondences, cfg.inlier_thresh),
            )),
            Err(e) => {
                debug!("skipping cluster of {} members: {e}", members.len());
                None
            }
        })
        .collect()
}

/// Convenience wrapper over [`estimate_hypotheses`] for a clustering result.
pub fn estimate_from_state(
    state: &ClusterState,
    correspondences: &[Correspondence],
    alpha: usize,
    cfg: &RefinementConfig,
) -> Vec<InstanceHypothesis> {
    estimate_hypotheses(&state.member_lists(), correspondences, alpha, cfg)
}

/// `|a ∩ b| / |a ∪ b|` of two sorted index lists; 0 when both are empty.
pub fn iou(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Removes duplicated transforms. Pairs are scanned in `(i, j)` order; the first
/// pair with IOU at or above the threshold loses the member with fewer inliers
/// (the later one on a tie), and the scan restarts.
pub fn merge_duplicates(
    mut hypotheses: Vec<InstanceHypothesis>,
    cfg: &RefinementConfig,
) -> Vec<InstanceHypothesis> {
    'scan: loop {
        for i in 0..hypotheses.len() {
            for j in i + 1..hypotheses.len() {
                let (a, b) = (&hypotheses[i], &hypotheses[j]);
                if iou(&a.inlier_indices, &b.inlier_indices) >= cfg.iou_merge_thresh {
                    let drop = if b.inlier_count() > a.inlier_count() { i } else { j };
                    hypotheses.remove(drop);
                    continue 'scan;
                }
            }
        }
        return hypotheses;
    }
}

/// Labels each correspondence with the hypothesis of smallest error (lower
/// index on ties), or as an outlier when that error exceeds the threshold.
/// Inlier sets are rebuilt from the labels.
pub fn reassign(
    hypotheses: Vec<InstanceHypothesis>,
    correspondences: &[Correspondence],
    cfg: &RefinementConfig,
) -> LabeledCorrespondences {
    let labels = label_correspondences(
        hypotheses.iter().map(|h| &h.transform),
        correspondences,
        cfg.inlier_thresh,
    );
    let mut members = vec![Vec::new(); hypotheses.len()];
    for (i, l) in labels.iter().enumerate() {
        if let Some(k) = l {
            members[*k].push(i);
        }
    }
    let hypotheses = hypotheses
        .into_iter()
        .zip(members)
        .map(|(h, m)| InstanceHypothesis {
            transform: h.transform,
            inlier_indices: m,
        })
        .collect();
    LabeledCorrespondences {
        labels,
        hypotheses,
        iterations: 0,
    }
}

/// Argmin labeling against a list of transforms.
pub fn label_correspondences<'a>(
    transforms: impl Iterator<Item = &'a crate::types::RigidTransform> + Clone,
    correspondences: &[Correspondence],
    inlier_thresh: f64,
) -> Vec<Label> {
    correspondences
        .iter()
        .map(|c| {
            let mut best: Option<(usize, f64)> = None;
            for (k, t) in transforms.clone().enumerate() {
                let e = alignment_error(t, c);
                if best.is_none_or(|(_, be)| e < be) {
                    best = Some((k, e));
                }
            }
            match best {
                Some((k, e)) if e <= inlier_thresh => Some(k),
                _ => None,
            }
        })
        .collect()
}

/// One estimate → merge → reassign pass.
pub fn refine_step(
    clusters: &[Vec<usize>],
    correspondences: &[Correspondence],
    alpha: usize,
    cfg: &RefinementConfig,
) -> LabeledCorrespondences {
    let hyps = estimate_hypotheses(clusters, correspondences, alpha, cfg);
    let hyps = merge_duplicates(hyps, cfg);
    reassign(hyps, correspondences, cfg)
}

/// Iterates [`refine_step`] with the growing `α` until the label array repeats
/// or `max_iterations` passes have run.
pub fn refine(
    initial: &ClusterState,
    correspondences: &[Correspondence],
    cfg: &RefinementConfig,
) -> LabeledCorrespondences {
    let total = correspondences.len().max(1);
    let mut clusters = initial.member_lists();
    let mut previous: Option<Vec<Label>> = None;
    let mut current = LabeledCorrespondences {
        labels: vec![None; correspondences.len()],
        hypotheses: Vec::new(),
        iterations: 0,
    };
    for n in 1..=cfg.max_iterations {
        let alpha = alpha_schedule(n, total, cfg);
        current = refine_step(&clusters, correspondences, alpha, cfg);
        current.iterations = n;
        debug!(
            "refinement pass {n}: alpha {alpha}, {} hypotheses",
            current.hypotheses.len()
        );
        if previous.as_ref() == Some(&current.labels) {
            break;
        }
        clusters = current.clusters();
        previous = Some(current.labels.clone());
    }
    current
}
