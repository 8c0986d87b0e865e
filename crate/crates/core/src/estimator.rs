//! Scaling Series: annealed Monte-Carlo pose estimation.
//!
//! The estimator starts from uniform samples over the uncertainty region and
//! then repeatedly (a) draws new particles in a shrinking neighbourhood of
//! the survivors, `M` per survivor on average and allocated by weight,
//! (b) scores them under a tempered likelihood whose sigmas (and index
//! window) are inflated by the current precision ratio, and (c) normalises
//! and prunes. The last iteration scores with the true sigmas.

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pose_mean, Pose, UncertaintyRegion, Vec3};
use crate::measurement::{Measurement, NoiseParams, Scorer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeriesParams {
    /// Final neighbourhood radius, translation (mm).
    pub target_delta_pos: f64,
    /// Final neighbourhood radius, rotation (rad).
    pub target_delta_rot: f64,
    /// Per-iteration neighbourhood shrink factor, in (0, 1).
    pub zoom: f64,
    /// Particles drawn per surviving particle each iteration (`M`).
    pub particles_per_neighborhood: usize,
    /// Particles more than this far below the best log-weight are dropped.
    pub prune_log_threshold: f64,
    /// Cap on survivors per iteration; also the size of the initial cover.
    pub max_particles: usize,
}

impl Default for ScalingSeriesParams {
    fn default() -> Self {
        Self {
            target_delta_pos: 1.0,
            target_delta_rot: 0.01,
            zoom: 0.5,
            particles_per_neighborhood: 10,
            prune_log_threshold: 12.0,
            max_particles: 5000,
        }
    }
}

impl ScalingSeriesParams {
    /// Cheaper preset used for RANSAC hypotheses.
    pub fn hypothesis() -> Self {
        Self {
            max_particles: 1000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.target_delta_pos > 0.0 && self.target_delta_rot > 0.0) {
            return bad(format!(
                "target deltas must be > 0, got ({}, {})",
                self.target_delta_pos, self.target_delta_rot
            ));
        }
        if !(self.zoom > 0.0 && self.zoom < 1.0) {
            return bad(format!("zoom must be in (0, 1), got {}", self.zoom));
        }
        if self.particles_per_neighborhood == 0 || self.max_particles == 0 {
            return bad("particle counts must be >= 1".into());
        }
        if !(self.prune_log_threshold > 0.0) {
            return bad(format!("prune threshold must be > 0, got {}", self.prune_log_threshold));
        }
        Ok(())
    }

    /// Ratio of the region's radius to the target precision (at least 1).
    pub fn initial_scale(&self, region: &UncertaintyRegion) -> f64 {
        (region.max_translation_half() / self.target_delta_pos)
            .max(region.max_rotation_half() / self.target_delta_rot)
            .max(1.0)
    }

    /// `T = ceil(log(delta_0 / delta*) / log(1 / zoom))`, at least 1.
    pub fn iterations(&self, region: &UncertaintyRegion) -> usize {
        let t = (self.initial_scale(region).ln() / (1.0 / self.zoom).ln()).ceil();
        (t as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose,
    pub log_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    particles: Vec<Particle>,
    normalized: bool,
}

#[derive(Serialize, Deserialize)]
struct WeightedPose {
    pose: Pose,
    weight: f64,
}

impl Belief {
    /// Unnormalized belief from raw log-weights.
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Empty("belief"));
        }
        Ok(Self {
            particles,
            normalized: false,
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Linear weights. Only meaningful once normalized.
    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight.exp()).collect()
    }

    /// Weighted mean pose.
    pub fn mean(&self) -> Result<Pose> {
        let poses: Vec<Pose> = self.particles.iter().map(|p| p.pose).collect();
        let max = self
            .particles
            .iter()
            .map(|p| p.log_weight)
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.particles.iter().map(|p| (p.log_weight - max).exp()).collect();
        pose_mean(&poses, &w)
    }

    /// Diagnostic export: `[{"pose": {...}, "weight": w}, ...]`.
    pub fn to_json(&self) -> String {
        let rows: Vec<WeightedPose> = self
            .particles
            .iter()
            .map(|p| WeightedPose {
                pose: p.pose,
                weight: p.log_weight.exp(),
            })
            .collect();
        serde_json::to_string(&rows).expect("belief serializes")
    }
}

/// Inflates both sigmas by `delta_t / delta_star`.
pub fn anneal_sigma(noise: &NoiseParams, delta_t: f64, delta_star: f64) -> NoiseParams {
    noise.scaled(delta_t / delta_star)
}

/// Log-sum-exp normalization, relative cutoff, then systematic resampling
/// down to `max_particles` if needed. Non-finite log-weights count as zero
/// weight.
pub fn normalize_and_prune<R: Rng + ?Sized>(
    belief: Belief,
    prune_log_threshold: f64,
    max_particles: usize,
    rng: &mut R,
) -> Result<Belief> {
    if max_particles == 0 {
        return Err(Error::InvalidParameter("max_particles must be >= 1".into()));
    }
    let max = belief
        .particles
        .iter()
        .map(|p| p.log_weight)
        .filter(|w| w.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ParticleCollapse);
    }
    let mut kept: Vec<Particle> = belief
        .particles
        .into_iter()
        .filter(|p| p.log_weight.is_finite() && p.log_weight >= max - prune_log_threshold)
        .collect();
    let log_z = max + kept.iter().map(|p| (p.log_weight - max).exp()).sum::<f64>().ln();
    for p in &mut kept {
        p.log_weight -= log_z;
    }

    if kept.len() > max_particles {
        kept = systematic_resample(&kept, max_particles, rng);
    }
    Ok(Belief {
        particles: kept,
        normalized: true,
    })
}

/// `n` equally weighted draws with one uniform offset and stride `1/n`.
fn systematic_resample<R: Rng + ?Sized>(particles: &[Particle], n: usize, rng: &mut R) -> Vec<Particle> {
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut cumulative = 0.0;
    let mut out = Vec::with_capacity(n);
    let log_w = -(n as f64).ln();
    let last = particles.len() - 1;
    for p in particles {
        cumulative += p.log_weight.exp();
        while u < cumulative && out.len() < n {
            out.push(Particle {
                pose: p.pose,
                log_weight: log_w,
            });
            u += step;
        }
    }
    // rounding in the cumulative sum can leave the tail short
    while out.len() < n {
        out.push(Particle {
            pose: particles[last].pose,
            log_weight: log_w,
        });
    }
    out
}

/// Uniform draw in the `(delta_pos, delta_rot)` neighbourhood of `pose`:
/// translation uniform in a ball, rotation about a uniform axis by an angle
/// uniform in `[0, delta_rot]`, applied in the body frame.
pub fn sample_neighbor<R: Rng + ?Sized>(pose: &Pose, delta_pos: f64, delta_rot: f64, rng: &mut R) -> Pose {
    let dt = loop {
        let v = Vec3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        if v.norm_squared() <= 1.0 {
            break v * delta_pos;
        }
    };
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    let angle = rng.random_range(0.0..=delta_rot);
    let dr = Pose::from_axis_angle(Vec3::new(x, y, z) * angle, Vec3::zeros());
    Pose::new(pose.rotation() * dr.rotation(), pose.translation() + dt)
}

/// Work counters for benchmarking.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateStats {
    pub iterations: usize,
    pub particles_scored: usize,
    /// Face-distance evaluations across all scored particles.
    pub faces_evaluated: usize,
    /// Object-distance evaluations (particles x measurements).
    pub measurement_evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub belief: Belief,
    pub pose: Pose,
    pub stats: EstimateStats,
}

fn score(scorer: &Scorer, ys: &[Measurement], poses: Vec<Pose>, stats: &mut EstimateStats) -> Result<Belief> {
    // pure map: no rng, ordered collect, so worker count cannot change results
    let scored: Vec<(Particle, usize)> = poses
        .into_par_iter()
        .map(|pose| {
            let (u, faces) = scorer.total_error_counted(ys, &pose);
            let log_weight = if u.is_finite() { -0.5 * u } else { f64::NEG_INFINITY };
            (Particle { pose, log_weight }, faces)
        })
        .collect();
    stats.particles_scored += scored.len();
    stats.measurement_evaluations += scored.len() * ys.len();
    stats.faces_evaluated += scored.iter().map(|(_, f)| f).sum::<usize>();
    Belief::new(scored.into_iter().map(|(p, _)| p).collect())
}

/// Runs the Scaling Series on `ys` inside `region`. The returned pose is the
/// weighted mean of the final belief. Samples that leave the region are
/// discarded (the prior is uniform over the region).
pub fn estimate_pose<R: Rng + ?Sized>(
    region: &UncertaintyRegion,
    ys: &[Measurement],
    scorer: &Scorer,
    params: &ScalingSeriesParams,
    rng: &mut R,
) -> Result<Estimate> {
    region.validate()?;
    params.validate()?;
    if ys.is_empty() {
        return Err(Error::Empty("measurement set"));
    }
    let mut stats = EstimateStats::default();
    if region.is_degenerate() {
        let belief = Belief {
            particles: vec![Particle {
                pose: region.center,
                log_weight: 0.0,
            }],
            normalized: true,
        };
        return Ok(Estimate {
            belief,
            pose: region.center,
            stats,
        });
    }

    let s0 = params.initial_scale(region);
    let iterations = params.iterations(region);
    let scale_at = |t: usize| {
        if t >= iterations {
            1.0
        } else {
            (s0 * params.zoom.powi(t as i32)).max(1.0)
        }
    };

    let mut belief: Option<Belief> = None;
    for t in 1..=iterations {
        let poses: Vec<Pose> = match &belief {
            None => (0..params.max_particles).map(|_| region.sample_uniform(rng)).collect(),
            Some(b) => {
                let s = scale_at(t - 1);
                let (dp, dr) = (s * params.target_delta_pos, s * params.target_delta_rot);
                // M draws per survivor on average, handed out by weight, and
                // never fewer than max_particles in total
                let n = (b.len() * params.particles_per_neighborhood).max(params.max_particles);
                let mut out = Vec::with_capacity(n);
                for parent in systematic_resample(b.particles(), n, rng) {
                    let q = sample_neighbor(&parent.pose, dp, dr, rng);
                    if region.contains(&q) {
                        out.push(q);
                    }
                }
                if out.is_empty() {
                    return Err(Error::ParticleCollapse);
                }
                out
            }
        };
        let s = scale_at(t);
        let tempered = scorer.tempered(s)?;
        let scored = score(&tempered, ys, poses, &mut stats)?;
        belief = Some(normalize_and_prune(
            scored,
            params.prune_log_threshold,
            params.max_particles,
            rng,
        )?);
        stats.iterations = t;
    }
    let belief = belief.expect("at least one iteration");
    let pose = belief.mean()?;
    Ok(Estimate { belief, pose, stats })
}
