//! Seeded sweeps of generate → register → score over outlier bands and
//! instance counts.

use std::fmt::Write as _;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{score_dataset, score_sample, DatasetScore, HitCriteria, SampleScore, ORIGIN};
use crate::pipeline::{register, PipelineConfig};
use crate::synthgen::{generate_scene, SceneSpec};

/// Outlier ratio drawn uniformly from `[lo, hi]` per scene; `lo == hi` fixes it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierBand {
    pub lo: f64,
    pub hi: f64,
}

impl OutlierBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lo) || !(0.0..1.0).contains(&hi) || lo > hi {
            return Err(Error::InvalidConfig(format!("invalid outlier band {lo}–{hi}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn fixed(ratio: f64) -> Result<Self> {
        Self::new(ratio, ratio)
    }

    /// The ratio used for the scene with `seed`.
    pub fn draw(&self, seed: u64) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        ChaCha8Rng::seed_from_u64(seed).random_range(self.lo..=self.hi)
    }

    pub fn label(&self) -> String {
        if self.lo == self.hi {
            format!("{:.2}", self.lo)
        } else {
            format!("{:.2}-{:.2}", self.lo, self.hi)
        }
    }
}

/// The four outlier bands of the default sweep.
pub fn default_bands() -> Vec<OutlierBand> {
    [(0.1, 0.5), (0.5, 0.7), (0.7, 0.9), (0.9, 0.99)]
        .into_iter()
        .map(|(lo, hi)| OutlierBand { lo, hi })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub band: OutlierBand,
    pub instances: usize,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub cells: Vec<Cell>,
    pub scenes: usize,
    pub seed: u64,
    /// Template for generated scenes; ratio, instance count and seed are overridden.
    pub scene: SceneSpec,
    pub pipeline: PipelineConfig,
    pub criteria: HitCriteria,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            cells: default_bands()
                .into_iter()
                .map(|band| Cell { band, instances: 20 })
                .collect(),
            scenes: 100,
            seed: 0,
            scene: SceneSpec::default(),
            pipeline: PipelineConfig::default(),
            criteria: HitCriteria::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneOutcome {
    pub outlier_ratio: f64,
    pub correspondences: usize,
    pub score: SampleScore,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub score: DatasetScore,
    pub mean_time: Duration,
    pub scenes: Vec<SceneOutcome>,
}

/// Generates, registers and scores one scene. The pipeline seed follows the
/// scene seed.
pub fn run_scene(cell: &Cell, seed: u64, cfg: &BenchConfig) -> Result<SceneOutcome> {
    let outlier_ratio = cell.band.draw(seed);
    let spec = SceneSpec {
        num_instances: cell.instances,
        outlier_ratio,
        seed,
        ..cfg.scene
    };
    let (corrs, truth) = generate_scene(&spec)?;
    let pipeline = PipelineConfig {
        rng_seed: seed,
        ..cfg.pipeline
    };
    let result = register(&corrs, &pipeline)?;
    let preds: Vec<_> = result.instances.iter().map(|h| h.transform).collect();
    Ok(SceneOutcome {
        outlier_ratio,
        correspondences: corrs.len(),
        score: score_sample(&preds, &truth.transforms, &ORIGIN, &cfg.criteria),
        elapsed: result.timings.total(),
    })
}

/// Runs every cell; scenes within a cell run in parallel with seeds
/// `seed + scene_index`.
pub fn run(cfg: &BenchConfig) -> Result<Vec<CellResult>> {
    if cfg.scenes == 0 {
        return Err(Error::EmptyDataset);
    }
    cfg.pipeline.validate()?;
    cfg.cells
        .iter()
        .map(|cell| {
            let scenes = (0..cfg.scenes)
                .into_par_iter()
                .map(|i| run_scene(cell, cfg.seed.wrapping_add(i as u64), cfg))
                .collect::<Result<Vec<_>>>()?;
            let scores: Vec<SampleScore> = scenes.iter().map(|s| s.score).collect();
            let mean_time = scenes.iter().map(|s| s.elapsed).sum::<Duration>() / scenes.len() as u32;
            Ok(CellResult {
                cell: *cell,
                score: score_dataset(&scores)?,
                mean_time,
                scenes,
            })
        })
        .collect()
}

/// Tab-separated table, one row per cell; metrics in percent.
pub fn format_table(results: &[CellResult], with_timings: bool) -> String {
    let mut out = String::from("outlier_band\tinstances\tMHR\tMHP\tMHF1");
    if with_timings {
        out.push_str("\tmean_time_ms");
    }
    out.push('\n');
    for r in results {
        let _ = write!(
            out,
            "{}\t{}\t{:.2}\t{:.2}\t{:.2}",
            r.cell.band.label(),
            r.cell.instances,
            100.0 * r.score.mhr,
            100.0 * r.score.mhp,
            100.0 * r.score.mhf1
        );
        if with_timings {
            let _ = write!(out, "\t{:.1}", r.mean_time.as_secs_f64() * 1e3);
        }
        out.push('\n');
    }
    out
}
