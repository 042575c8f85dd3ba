//! Final instance selection by inlier count and dropping ratio.

use crate::error::{Error, Result};
use crate::types::InstanceHypothesis;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    /// Hypotheses need strictly more inliers than this.
    pub min_cluster_size: usize,
    /// Ranked list is cut at the first ratio `count / top_count ≤ gamma_thresh`.
    pub gamma_thresh: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            min_cluster_size: 10,
            gamma_thresh: 0.5,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 3 || !(self.gamma_thresh > 0.0 && self.gamma_thresh <= 1.0) {
            return Err(Error::InvalidConfig(format!("extraction settings out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Keeps hypotheses above the size floor, ranks them by inlier count (stable on
/// ties) and returns the prefix before the first dropping ratio at or below
/// `gamma_thresh`.
pub fn extract(hypotheses: &[InstanceHypothesis], cfg: &ExtractionConfig) -> Vec<InstanceHypothesis> {
    let mut ranked: Vec<&InstanceHypothesis> = hypotheses
        .iter()
        .filter(|h| h.inlier_count() > cfg.min_cluster_size)
        .collect();
    ranked.sort_by(|a, b| b.inlier_count().cmp(&a.inlier_count()));
    let Some(top) = ranked.first().map(|h| h.inlier_count() as f64) else {
        return Vec::new();
    };
    let cut = ranked
        .iter()
        .skip(1)
        .position(|h| h.inlier_count() as f64 / top <= cfg.gamma_thresh)
        .map_or(ranked.len(), |p| p + 1);
    ranked[..cut].iter().map(|h| (*h).clone()).collect()
}
