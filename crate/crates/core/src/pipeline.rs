//! End-to-end registration: sample, cluster, refine, extract, relabel.

use std::borrow::Cow;
use std::time::{Duration, Instant};

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clustering::agglomerate;
use crate::compatibility::{build_matrix, CompatibilityMatrix};
use crate::error::{Error, Result};
use crate::extraction::{extract, ExtractionConfig};
use crate::refinement::{label_correspondences, refine, RefinementConfig};
use crate::rigid::solve_rigid;
use crate::types::{Correspondence, InstanceHypothesis, Label};

/// Smallest input [`register`] accepts.
pub const MIN_CORRESPONDENCES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub min_dist_thresh: f64,
    pub refinement: RefinementConfig,
    pub extraction: ExtractionConfig,
    /// Inputs larger than this are randomly subsampled before clustering.
    pub downsample_size: usize,
    /// When false the sampling path is bypassed and every correspondence is clustered.
    pub downsample: bool,
    /// Re-solve each final transform once from its inliers over the full input.
    pub resolve_after_upsample: bool,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            min_dist_thresh: 0.2,
            refinement: RefinementConfig::default(),
            extraction: ExtractionConfig::default(),
            downsample_size: 1024,
            downsample: true,
            resolve_after_upsample: true,
            rng_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_dist_thresh >= 0.0 && self.min_dist_thresh < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "min_dist_thresh must be in [0, 1), got {}",
                self.min_dist_thresh
            )));
        }
        if self.downsample_size < 10 {
            return Err(Error::InvalidConfig(format!(
                "downsample_size must be at least 10, got {}",
                self.downsample_size
            )));
        }
        self.refinement.validate()?;
        self.extraction.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub downsample: Duration,
    pub matrix: Duration,
    pub clustering: Duration,
    pub refinement: Duration,
    pub extraction: Duration,
    pub upsample: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.downsample + self.matrix + self.clustering + self.refinement + self.extraction + self.upsample
    }

    /// `(stage name, duration)` in execution order.
    pub fn stages(&self) -> [(&'static str, Duration); 6] {
        [
            ("downsample", self.downsample),
            ("matrix", self.matrix),
            ("clustering", self.clustering),
            ("refinement", self.refinement),
            ("extraction", self.extraction),
            ("upsample", self.upsample),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RegistrationStats {
    pub input_size: usize,
    pub clustered_size: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Ranked instances; inlier sets index the full input.
    pub instances: Vec<InstanceHypothesis>,
    /// One label per input correspondence.
    pub labels: Vec<Label>,
    pub timings: StageTimings,
    pub stats: RegistrationStats,
}

/// Uniform sample of `size` distinct indices without replacement, sorted, or the
/// identity when the input already fits.
pub fn downsample(
    correspondences: &[Correspondence],
    size: usize,
    seed: u64,
) -> (Vec<Correspondence>, Vec<usize>) {
    let n = correspondences.len();
    if n <= size {
        return (correspondences.to_vec(), (0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, size).into_vec();
    picked.sort_unstable();
    let subset = picked.iter().map(|&i| correspondences[i]).collect();
    (subset, picked)
}

/// Labels the full input against the extracted transforms.
pub fn upsample(
    instances: &[InstanceHypothesis],
    full: &[Correspondence],
    cfg: &PipelineConfig,
) -> Vec<Label> {
    label_correspondences(
        instances.iter().map(|h| &h.transform),
        full,
        cfg.refinement.inlier_thresh,
    )
}

fn members_by_label(labels: &[Label], count: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); count];
    for (i, l) in labels.iter().enumerate() {
        if let Some(k) = l {
            members[*k].push(i);
        }
    }
    members
}

pub fn register(correspondences: &[Correspondence], cfg: &PipelineConfig) -> Result<RegistrationResult> {
    run(correspondences, cfg, false).map(|(r, _)| r)
}

/// Like [`register`], also returning the compatibility matrix that was clustered.
pub fn register_with_matrix(
    correspondences: &[Correspondence],
    cfg: &PipelineConfig,
) -> Result<(RegistrationResult, CompatibilityMatrix)> {
    run(correspondences, cfg, true).map(|(r, m)| (r, m.expect("matrix requested")))
}

fn run(
    correspondences: &[Correspondence],
    cfg: &PipelineConfig,
    keep_matrix: bool,
) -> Result<(RegistrationResult, Option<CompatibilityMatrix>)> {
    cfg.validate()?;
    let n = correspondences.len();
    if n < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientInput {
            required: MIN_CORRESPONDENCES,
            actual: n,
        });
    }
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let subset: Cow<[Correspondence]> = if cfg.downsample && n > cfg.downsample_size {
        Cow::Owned(downsample(correspondences, cfg.downsample_size, cfg.rng_seed).0)
    } else {
        Cow::Borrowed(correspondences)
    };
    timings.downsample = clock.elapsed();

    let clock = Instant::now();
    let matrix = build_matrix(&subset);
    timings.matrix = clock.elapsed();

    let clock = Instant::now();
    let state = agglomerate(&matrix, cfg.min_dist_thresh);
    timings.clustering = clock.elapsed();
    debug!("{} groups after clustering {} correspondences", state.active_count(), subset.len());

    let clock = Instant::now();
    let refined = refine(&state, &subset, &cfg.refinement);
    timings.refinement = clock.elapsed();

    let clock = Instant::now();
    let extracted = extract(&refined.hypotheses, &cfg.extraction);
    timings.extraction = clock.elapsed();

    let clock = Instant::now();
    let mut labels = upsample(&extracted, correspondences, cfg);
    let mut transforms: Vec<_> = extracted.iter().map(|h| h.transform).collect();
    if cfg.resolve_after_upsample && !transforms.is_empty() {
        for (t, members) in transforms.iter_mut().zip(members_by_label(&labels, extracted.len())) {
            if let Ok(resolved) = solve_rigid(correspondences, &members) {
                *t = resolved;
            }
        }
        labels = label_correspondences(transforms.iter(), correspondences, cfg.refinement.inlier_thresh);
    }
    let instances = transforms
        .into_iter()
        .zip(members_by_label(&labels, extracted.len()))
        .map(|(transform, inlier_indices)| InstanceHypothesis {
            transform,
            inlier_indices,
        })
        .collect();
    timings.upsample = clock.elapsed();

    let result = RegistrationResult {
        instances,
        labels,
        timings,
        stats: RegistrationStats {
            input_size: n,
            clustered_size: subset.len(),
            iterations: refined.iterations,
        },
    };
    Ok((result, keep_matrix.then_some(matrix)))
}
