//! Text file formats.
//!
//! * Correspondence files: header `# multireg-corr v1`, then one record per line,
//!   `sx sy sz tx ty tz [label]`, whitespace separated, label `-1` for outliers.
//! * Truth files: header `# multireg-truth v1`, then one line of 12 reals per
//!   instance (row-major rotation, then translation).
//! * Result files: JSON, see [`ResultFile`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{PipelineConfig, RegistrationResult};
use crate::types::{Correspondence, Label, RigidTransform};

pub const CORR_HEADER: &str = "# multireg-corr v1";
pub const TRUTH_HEADER: &str = "# multireg-truth v1";
pub const RESULT_FORMAT: &str = "multireg-result v1";

/// Orthonormality tolerance applied to rotations read back from disk.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceData {
    pub correspondences: Vec<Correspondence>,
    /// Present when the file has a seventh column.
    pub labels: Option<Vec<Label>>,
}

fn parse_err(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Data lines with their 1-based line numbers, after checking the header.
fn data_lines<'a>(text: &'a str, header: &str, path: &str) -> Result<Vec<(usize, &'a str)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.find(|(_, l)| !l.is_empty()) {
        Some((_, l)) if l == header => {}
        Some((n, l)) => return Err(parse_err(path, n, format!("expected header `{header}`, found `{l}`"))),
        None => return Err(parse_err(path, 1, format!("missing header `{header}`"))),
    }
    Ok(lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('#')).collect())
}

fn parse_real(tok: &str, path: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("`{tok}` is not finite")));
    }
    Ok(v)
}

pub fn parse_correspondences(text: &str, path: &str) -> Result<CorrespondenceData> {
    let mut correspondences = Vec::new();
    let mut labels = Vec::new();
    let mut columns: Option<usize> = None;
    for (line, content) in data_lines(text, CORR_HEADER, path)? {
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() != 6 && toks.len() != 7 {
            return Err(parse_err(path, line, format!("expected 6 or 7 columns, found {}", toks.len())));
        }
        match columns {
            None => columns = Some(toks.len()),
            Some(c) if c != toks.len() => {
                return Err(parse_err(path, line, format!("expected {c} columns like the first record, found {}", toks.len())));
            }
            _ => {}
        }
        let mut v = [0.0; 6];
        for (slot, tok) in v.iter_mut().zip(&toks) {
            *slot = parse_real(tok, path, line)?;
        }
        correspondences.push(Correspondence::from_arrays([v[0], v[1], v[2]], [v[3], v[4], v[5]]));
        if let Some(tok) = toks.get(6) {
            let id: i64 = tok
                .parse()
                .map_err(|_| parse_err(path, line, format!("`{tok}` is not an integer label")))?;
            labels.push(match id {
                -1 => None,
                k if k >= 0 => Some(k as usize),
                k => return Err(parse_err(path, line, format!("invalid label {k}"))),
            });
        }
    }
    Ok(CorrespondenceData {
        correspondences,
        labels: (columns == Some(7)).then_some(labels),
    })
}

pub fn read_correspondences(path: &Path) -> Result<CorrespondenceData> {
    parse_correspondences(&read_text(path)?, &path.display().to_string())
}

/// Nine significant digits.
fn real9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Seventeen significant digits.
fn real17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn label_to_int(l: Label) -> i64 {
    l.map_or(-1, |k| k as i64)
}

pub fn format_correspondences(correspondences: &[Correspondence], labels: Option<&[Label]>) -> String {
    let mut out = String::with_capacity(correspondences.len() * 100);
    out.push_str(CORR_HEADER);
    out.push('\n');
    for (i, c) in correspondences.iter().enumerate() {
        let vals = c.source.iter().chain(c.target.iter()).map(|v| real9(*v)).collect::<Vec<_>>();
        out.push_str(&vals.join(" "));
        if let Some(labels) = labels {
            let _ = write!(out, " {}", label_to_int(labels[i]));
        }
        out.push('\n');
    }
    out
}

pub fn write_correspondences(path: &Path, correspondences: &[Correspondence], labels: Option<&[Label]>) -> Result<()> {
    write_text(path, &format_correspondences(correspondences, labels))
}

fn check_rotation(t: &RigidTransform, path: &str, line: usize) -> Result<()> {
    if t.is_valid(ROTATION_TOLERANCE) {
        Ok(())
    } else {
        Err(parse_err(path, line, "rotation is not orthonormal with determinant +1"))
    }
}

pub fn format_truth(transforms: &[RigidTransform]) -> String {
    let mut out = String::from(TRUTH_HEADER);
    out.push('\n');
    for t in transforms {
        let vals: Vec<String> = t.to_row_major().iter().map(|v| real17(*v)).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_truth(text: &str, path: &str) -> Result<Vec<RigidTransform>> {
    data_lines(text, TRUTH_HEADER, path)?
        .into_iter()
        .map(|(line, content)| {
            let toks: Vec<&str> = content.split_whitespace().collect();
            if toks.len() != 12 {
                return Err(parse_err(path, line, format!("expected 12 values, found {}", toks.len())));
            }
            let mut v = [0.0; 12];
            for (slot, tok) in v.iter_mut().zip(&toks) {
                *slot = parse_real(tok, path, line)?;
            }
            let t = RigidTransform::from_row_major(&v);
            check_rotation(&t, path, line)?;
            Ok(t)
        })
        .collect()
}

pub fn write_truth(path: &Path, transforms: &[RigidTransform]) -> Result<()> {
    write_text(path, &format_truth(transforms))
}

pub fn read_truth(path: &Path) -> Result<Vec<RigidTransform>> {
    parse_truth(&read_text(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    /// Row-major.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub inlier_count: usize,
}

impl InstanceRecord {
    pub fn transform(&self) -> RigidTransform {
        let mut v = [0.0; 12];
        v[..9].copy_from_slice(&self.rotation);
        v[9..].copy_from_slice(&self.translation);
        RigidTransform::from_row_major(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingsRecord {
    pub downsample_ms: f64,
    pub matrix_ms: f64,
    pub clustering_ms: f64,
    pub refinement_ms: f64,
    pub extraction_ms: f64,
    pub upsample_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub input_size: usize,
    pub clustered_size: usize,
    pub iterations: usize,
}

/// Serialized registration output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub format: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub instances: Vec<InstanceRecord>,
    /// Instance index per correspondence, `-1` for outliers.
    pub labels: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<TimingsRecord>,
    pub stats: StatsRecord,
}

impl ResultFile {
    pub fn from_result(result: &RegistrationResult, config: &PipelineConfig, with_timings: bool) -> Self {
        let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
        let t = &result.timings;
        Self {
            format: RESULT_FORMAT.to_string(),
            seed: config.rng_seed,
            config: *config,
            instances: result
                .instances
                .iter()
                .map(|h| {
                    let v = h.transform.to_row_major();
                    InstanceRecord {
                        rotation: v[..9].try_into().expect("nine rotation entries"),
                        translation: v[9..].try_into().expect("three translation entries"),
                        inlier_count: h.inlier_count(),
                    }
                })
                .collect(),
            labels: result.labels.iter().map(|l| label_to_int(*l)).collect(),
            timings_ms: with_timings.then(|| TimingsRecord {
                downsample_ms: ms(t.downsample),
                matrix_ms: ms(t.matrix),
                clustering_ms: ms(t.clustering),
                refinement_ms: ms(t.refinement),
                extraction_ms: ms(t.extraction),
                upsample_ms: ms(t.upsample),
                total_ms: ms(t.total()),
            }),
            stats: StatsRecord {
                input_size: result.stats.input_size,
                clustered_size: result.stats.clustered_size,
                iterations: result.stats.iterations,
            },
        }
    }

    /// Ranked instance transforms.
    pub fn transforms(&self) -> Vec<RigidTransform> {
        self.instances.iter().map(InstanceRecord::transform).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &str) -> Result<Self> {
        let file: ResultFile = serde_json::from_str(text).map_err(|source| Error::Json {
            path: path.to_string(),
            source,
        })?;
        if file.format != RESULT_FORMAT {
            return Err(parse_err(path, 1, format!("unsupported format `{}`", file.format)));
        }
        for (i, inst) in file.instances.iter().enumerate() {
            if !inst.transform().is_valid(ROTATION_TOLERANCE) {
                return Err(parse_err(path, 1, format!("instance {i}: rotation is not orthonormal with determinant +1")));
            }
        }
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?, &path.display().to_string())
    }
}
