//! One localization run, shared by `localize` and the benchmark suites.

use std::time::Instant;

use anyhow::Result;
use rand::Rng;
use tactile_core::estimator::{estimate_pose, Belief, ScalingSeriesParams};
use tactile_core::geometry::{Pose, UncertaintyRegion};
use tactile_core::measurement::{Measurement, Scorer};
use tactile_core::ransac::{classify, RansacConfig};
use tactile_core::{substream, Error};

use crate::report::{CandidateStats, PoseErrors, RansacSummary, Thresholds, TrialReport};

/// Seed of trial `trial` under `master`. Trials only depend on their own
/// seed, so they can run in any order or in parallel.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    substream(master, trial).random()
}

/// Stream of a trial seed that simulated data is drawn from. The estimator
/// uses stream 0 and RANSAC iteration `i` stream `i`.
pub const DATA_STREAM: u64 = 1 << 40;

pub struct Localization {
    pub report: TrialReport,
    /// Final estimator belief; `None` for RANSAC runs.
    pub belief: Option<Belief>,
}

/// Estimates the pose of `scorer`'s mesh from `ys`. With `ransac`, the
/// estimate comes from the winning consensus set; a run where no consensus
/// forms is reported as a failure with the best attempt's pose rather than
/// as an error. The plain estimator draws from `substream(seed, 0)`.
#[allow(clippy::too_many_arguments)]
pub fn localize(
    scorer: &Scorer,
    ys: &[Measurement],
    region: &UncertaintyRegion,
    params: &ScalingSeriesParams,
    ransac: Option<&RansacConfig>,
    truth: Option<&Pose>,
    thresholds: &Thresholds,
    seed: u64,
) -> Result<Localization> {
    let start = Instant::now();
    let (pose, summary, counters, belief) = match ransac {
        None => {
            let est = estimate_pose(region, ys, scorer, params, &mut substream(seed, 0))?;
            (est.pose, None, Some(est.stats), Some(est.belief))
        }
        Some(config) => match classify(ys, region, scorer, params, config) {
            Ok(r) => (r.best_pose, Some(RansacSummary::from(&r)), None, None),
            Err(Error::NoConsensus(best)) => {
                let outliers = (0..ys.len()).filter(|i| !best.consensus.contains(i)).collect();
                let summary = RansacSummary {
                    consensus: false,
                    inliers: best.consensus.clone(),
                    outliers,
                    goodness: None,
                    iterations: config.max_iterations,
                    best_iteration: best.iteration,
                    terminated_by: None,
                };
                (best.pose, Some(summary), None, None)
            }
            Err(e) => return Err(e.into()),
        },
    };
    let wall_time_s = start.elapsed().as_secs_f64();

    let (faces_evaluated, measurement_evaluations) = match counters {
        Some(s) => (s.faces_evaluated, s.measurement_evaluations),
        None => (scorer.total_error_counted(ys, &pose).1, ys.len()),
    };
    let candidates = CandidateStats {
        indexed: scorer.index().is_some(),
        faces: scorer.mesh().face_count(),
        mean_candidates: faces_evaluated as f64 / measurement_evaluations.max(1) as f64,
        faces_evaluated,
        measurement_evaluations,
    };
    let errors = truth.map(|t| PoseErrors::between(&pose, t));
    let consensus = summary.as_ref().is_none_or(|s| s.consensus);
    let success = consensus && errors.is_none_or(|e| thresholds.accepts(&e));
    Ok(Localization {
        report: TrialReport {
            pose,
            truth: truth.copied(),
            errors,
            success,
            wall_time_s,
            candidates,
            ransac: summary,
        },
        belief,
    })
}
