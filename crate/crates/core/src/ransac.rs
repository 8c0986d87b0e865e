//! Hypothesize-and-verify outlier classification around the estimator.
//!
//! Each iteration estimates a pose from a random minimal subset, grows a
//! consensus set of measurements within `epsilon` of that pose, and if the
//! set is large enough re-estimates on it and scores it by the mean object
//! distance `G`. The lowest `G` wins.

use std::collections::HashMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_pose, ScalingSeriesParams};
use crate::geometry::{Pose, UncertaintyRegion};
use crate::measurement::{Measurement, Scorer};
use crate::substream;

/// `ceil(log(1 - p) / log(1 - w^m))`: iterations needed to draw at least one
/// all-inlier subset of size `m` with probability `p` when a fraction `w` of
/// the data are inliers.
pub fn max_iterations(p: f64, w: f64, m: usize) -> Result<usize> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must be in (0, 1), got {p}")));
    }
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::InvalidParameter(format!("w must be in (0, 1], got {w}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    let wm = w.powi(m as i32);
    if wm >= 1.0 {
        return Ok(1);
    }
    let k = ((1.0 - p).ln() / (-wm).ln_1p()).ceil();
    Ok(if k.is_finite() { (k as usize).max(1) } else { usize::MAX })
}

/// Mean (not squared) object distance over `ys` at `pose`.
pub fn model_goodness(ys: &[Measurement], scorer: &Scorer, pose: &Pose) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::Empty("consensus set"));
    }
    let sum: f64 = ys.iter().map(|y| scorer.object_distance(y, pose).distance()).sum();
    Ok(sum / ys.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    /// Upper bound on hypotheses (`K`).
    pub max_iterations: usize,
    /// Minimal subset size (`m`).
    pub subset_size: usize,
    /// A consensus set must be strictly larger than this (`d`).
    pub min_consensus: usize,
    /// Object-distance threshold for joining the consensus (`epsilon`).
    pub inlier_threshold: f64,
    /// Stop as soon as a consensus scores `G` below this (`delta`).
    pub goodness_stop: f64,
    /// Particle cap for the per-subset hypothesis estimate.
    pub hypothesis_particles: usize,
    pub seed: u64,
}

impl RansacConfig {
    pub const DEFAULT_SUBSET: usize = 6;

    /// Defaults for a set of `n` measurements: `m = 6`,
    /// `d = max(m, ceil(0.6 n))`, `epsilon = 3`, `delta = 1`,
    /// `K = max_iterations(0.99, 0.7, m)`.
    pub fn for_measurements(n: usize, seed: u64) -> Self {
        let m = Self::DEFAULT_SUBSET;
        Self {
            max_iterations: max_iterations(0.99, 0.7, m).expect("constant arguments are in range"),
            subset_size: m,
            min_consensus: m.max((0.6 * n as f64).ceil() as usize),
            inlier_threshold: 3.0,
            goodness_stop: 1.0,
            hypothesis_particles: ScalingSeriesParams::hypothesis().max_particles,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.subset_size == 0 {
            return bad("subset size m must be >= 1".into());
        }
        if self.min_consensus < self.subset_size {
            return bad(format!(
                "min consensus d ({}) must be >= subset size m ({})",
                self.min_consensus, self.subset_size
            ));
        }
        if !(self.inlier_threshold > 0.0) {
            return bad(format!("inlier threshold must be > 0, got {}", self.inlier_threshold));
        }
        if self.max_iterations == 0 {
            return bad("max iterations K must be >= 1".into());
        }
        if self.goodness_stop.is_nan() {
            return bad("goodness stop is NaN".into());
        }
        if self.hypothesis_particles == 0 {
            return bad("hypothesis particle count must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminatedBy {
    Goodness,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RansacResult {
    #[serde(rename = "pose")]
    pub best_pose: Pose,
    /// Sorted measurement ids in the winning consensus set.
    pub inliers: Vec<usize>,
    /// Sorted complement of `inliers`.
    pub outliers: Vec<usize>,
    pub goodness: f64,
    #[serde(rename = "iterations")]
    pub iterations_run: usize,
    /// 1-based iteration that produced the winner.
    pub best_iteration: usize,
    pub terminated_by: TerminatedBy,
    /// Object distance of every measurement at `best_pose`. Members of the
    /// winning seed subset are never re-tested, so their distance may
    /// exceed the threshold.
    pub distances: Vec<f64>,
    /// Best-so-far `G` after each iteration (`inf` until a consensus forms).
    pub goodness_trace: Vec<f64>,
}

/// What the best iteration achieved when no consensus was large enough.
#[derive(Debug, Clone, PartialEq)]
pub struct BestAttempt {
    pub required: usize,
    pub consensus: Vec<usize>,
    pub pose: Pose,
    pub iteration: usize,
}

struct Candidate {
    pose: Pose,
    consensus: Vec<usize>,
    goodness: f64,
    iteration: usize,
}

/// Runs the consensus loop. Iteration `i` draws from `substream(seed, i)`,
/// so results only depend on the configuration. Re-estimates of a consensus
/// set already seen in this run are reused.
pub fn classify(
    ys: &[Measurement],
    region: &UncertaintyRegion,
    scorer: &Scorer,
    params: &ScalingSeriesParams,
    config: &RansacConfig,
) -> Result<RansacResult> {
    config.validate()?;
    params.validate()?;
    region.validate()?;
    let n = ys.len();
    let m = config.subset_size;
    if n < m {
        return Err(Error::InvalidParameter(format!(
            "need at least m = {m} measurements, got {n}"
        )));
    }
    let hypo_params = ScalingSeriesParams {
        max_particles: config.hypothesis_particles,
        ..*params
    };

    // membership and goodness use the exact distance: a face the index
    // window happens to exclude must not turn an inlier into an outlier
    let exact = scorer.exhaustive();
    let mut best: Option<Candidate> = None;
    let mut closest: Option<BestAttempt> = None;
    let mut reestimates: HashMap<Vec<usize>, (Pose, f64)> = HashMap::new();
    let mut trace = Vec::new();
    let mut terminated_by = TerminatedBy::MaxIter;

    for iteration in 1..=config.max_iterations {
        let mut rng = substream(config.seed, iteration as u64);
        let mut subset: Vec<usize> = sample(&mut rng, n, m).into_vec();
        subset.sort_unstable();
        let seed_ys: Vec<Measurement> = subset.iter().map(|&i| ys[i]).collect();
        let hypo = estimate_pose(region, &seed_ys, scorer, &hypo_params, &mut rng)?.pose;

        let mut consensus = subset.clone();
        for (i, y) in ys.iter().enumerate() {
            if subset.binary_search(&i).is_err() && exact.object_distance(y, &hypo).distance() < config.inlier_threshold
            {
                consensus.push(i);
            }
        }
        consensus.sort_unstable();

        if consensus.len() > config.min_consensus {
            let (pose, goodness) = match reestimates.get(&consensus) {
                Some(&hit) => hit,
                None => {
                    let members: Vec<Measurement> = consensus.iter().map(|&i| ys[i]).collect();
                    let pose = estimate_pose(region, &members, scorer, params, &mut rng)?.pose;
                    let goodness = model_goodness(&members, &exact, &pose)?;
                    reestimates.insert(consensus.clone(), (pose, goodness));
                    (pose, goodness)
                }
            };
            if best.as_ref().is_none_or(|b| goodness < b.goodness) {
                best = Some(Candidate {
                    pose,
                    consensus,
                    goodness,
                    iteration,
                });
            }
        } else if closest.as_ref().is_none_or(|c| consensus.len() > c.consensus.len()) {
            closest = Some(BestAttempt {
                required: config.min_consensus + 1,
                consensus,
                pose: hypo,
                iteration,
            });
        }

        trace.push(best.as_ref().map_or(f64::INFINITY, |b| b.goodness));
        if best.as_ref().is_some_and(|b| b.goodness < config.goodness_stop) {
            terminated_by = TerminatedBy::Goodness;
            break;
        }
    }

    let Some(best) = best else {
        return Err(Error::NoConsensus(Box::new(
            closest.expect("at least one iteration ran"),
        )));
    };
    let outliers = (0..n).filter(|i| best.consensus.binary_search(i).is_err()).collect();
    let distances = ys
        .iter()
        .map(|y| exact.object_distance(y, &best.pose).distance())
        .collect();
    Ok(RansacResult {
        best_pose: best.pose,
        inliers: best.consensus,
        outliers,
        goodness: best.goodness,
        iterations_run: trace.len(),
        best_iteration: best.iteration,
        terminated_by,
        distances,
        goodness_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{unit, Vec3};
    use crate::measurement::NoiseParams;
    use crate::simkit::fixtures;

    #[test]
    fn iteration_bound_reference_value() {
        assert_eq!(max_iterations(0.99, 0.5, 6).unwrap(), 293);
        assert_eq!(max_iterations(0.99, 1.0, 6).unwrap(), 1);
        assert_eq!(max_iterations(0.99, 1.0, 1).unwrap(), 1);
        assert_eq!(max_iterations(0.99, 0.7, 6).unwrap(), 37);
    }

    #[test]
    fn iteration_bound_rejects_bad_domain() {
        assert!(max_iterations(1.0, 0.5, 6).is_err());
        assert!(max_iterations(0.0, 0.5, 6).is_err());
        assert!(max_iterations(0.9, 0.0, 6).is_err());
        assert!(max_iterations(0.9, 1.1, 6).is_err());
        assert!(max_iterations(0.9, 0.5, 0).is_err());
    }

    #[test]
    fn goodness_is_mean_distance() {
        let mesh = fixtures::box_fixture();
        let scorer = Scorer::new(&mesh, NoiseParams::default(), None).unwrap();
        let up = unit(0.0, 0.0, 1.0).unwrap();
        let on = Measurement::new(Vec3::new(0.0, 0.0, 35.0), up);
        let off = Measurement::new(Vec3::new(0.0, 0.0, 37.4), up);
        let pose = Pose::identity();
        assert_eq!(model_goodness(&[on], &scorer, &pose).unwrap(), 0.0);
        assert!((model_goodness(&[off], &scorer, &pose).unwrap() - 1.2).abs() < 1e-12);
        assert!((model_goodness(&[on, off], &scorer, &pose).unwrap() - 0.6).abs() < 1e-12);
        assert!(model_goodness(&[], &scorer, &pose).is_err());
    }

    #[test]
    fn default_config_shape() {
        let c = RansacConfig::for_measurements(15, 0);
        assert_eq!((c.subset_size, c.min_consensus, c.max_iterations), (6, 9, 37));
        assert_eq!(RansacConfig::for_measurements(5, 0).min_consensus, 6);
        c.validate().unwrap();
        let bad = RansacConfig { min_consensus: 3, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn too_few_measurements() {
        let mesh = fixtures::box_fixture();
        let scorer = Scorer::new(&mesh, NoiseParams::default(), None).unwrap();
        let region = UncertaintyRegion::uniform(Pose::identity(), 10.0, 0.3).unwrap();
        let y = Measurement::new(Vec3::new(0.0, 0.0, 35.0), unit(0.0, 0.0, 1.0).unwrap());
        let cfg = RansacConfig::for_measurements(3, 0);
        let r = classify(&[y; 3], &region, &scorer, &ScalingSeriesParams::default(), &cfg);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}
