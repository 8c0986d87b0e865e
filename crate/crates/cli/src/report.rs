//! Report types shared by the subcommands and the benchmark suites, plus
//! atomic JSON output.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tactile_core::geometry::{rotation_distance, translation_distance, Pose};
use tactile_core::ransac::{RansacResult, TerminatedBy};

/// Bumped whenever a report field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Keys whose values depend on the clock. Everything else in a report is a
/// pure function of the inputs and the seed.
pub const TIMING_KEYS: [&str; 2] = ["wall_time_s", "timing"];

/// Top-level envelope: every file the CLI writes carries the schema version
/// and the kind of report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub kind: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: &str, body: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            body,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub translation_mm: f64,
    pub rotation_rad: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            translation_mm: 5.0,
            rotation_rad: 0.05,
        }
    }
}

impl Thresholds {
    pub fn accepts(&self, errors: &PoseErrors) -> bool {
        errors.translation_mm <= self.translation_mm && errors.rotation_rad <= self.rotation_rad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseErrors {
    pub translation_mm: f64,
    pub rotation_rad: f64,
}

impl PoseErrors {
    pub fn between(estimate: &Pose, truth: &Pose) -> Self {
        Self {
            translation_mm: translation_distance(estimate.translation(), truth.translation()),
            rotation_rad: rotation_distance(estimate.rotation(), truth.rotation()),
        }
    }
}

/// How much of the mesh the likelihood had to look at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateStats {
    pub indexed: bool,
    pub faces: usize,
    /// Faces compared per measurement, averaged over every evaluation the
    /// run made (estimator counters), or at the final pose when the run
    /// went through RANSAC.
    pub mean_candidates: f64,
    pub faces_evaluated: usize,
    pub measurement_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RansacSummary {
    /// False when no hypothesis reached the minimum consensus; the pose is
    /// then the best attempt's hypothesis.
    pub consensus: bool,
    pub inliers: Vec<usize>,
    pub outliers: Vec<usize>,
    pub goodness: Option<f64>,
    pub iterations: usize,
    pub best_iteration: usize,
    pub terminated_by: Option<TerminatedBy>,
}

impl From<&RansacResult> for RansacSummary {
    fn from(r: &RansacResult) -> Self {
        Self {
            consensus: true,
            inliers: r.inliers.clone(),
            outliers: r.outliers.clone(),
            goodness: Some(r.goodness),
            iterations: r.iterations_run,
            best_iteration: r.best_iteration,
            terminated_by: Some(r.terminated_by),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub pose: Pose,
    pub truth: Option<Pose>,
    pub errors: Option<PoseErrors>,
    /// Within the thresholds when the truth is known; otherwise the run
    /// produced an estimate (and a consensus, with RANSAC).
    pub success: bool,
    pub wall_time_s: f64,
    pub candidates: CandidateStats,
    pub ransac: Option<RansacSummary>,
}

impl TrialReport {
    pub fn translation_mm(&self) -> Option<f64> {
        self.errors.map(|e| e.translation_mm)
    }

    pub fn rotation_rad(&self) -> Option<f64> {
        self.errors.map(|e| e.rotation_rad)
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = f.precision().unwrap_or(2);
        write!(f, "{:.p$} ± {:.p$}", self.mean, self.std)
    }
}

/// Serializes `value` to `path` through a temporary file in the same
/// directory, so a failed run never leaves a partial file behind.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Removes every clock-dependent field, recursively, so two runs of the
/// same configuration can be compared byte for byte.
pub fn strip_timing(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for key in TIMING_KEYS {
                map.remove(key);
            }
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}
