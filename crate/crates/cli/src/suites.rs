//! Benchmark suites: face-selection speedup, reliability over random poses,
//! and localization in a cluttered scene with and without RANSAC.

use std::fmt::Write as _;
use std::hint::black_box;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tactile_core::estimator::ScalingSeriesParams;
use tactile_core::face_index::{AngleIndex, EntropyConfig};
use tactile_core::geometry::{Mesh, Pose, UncertaintyRegion};
use tactile_core::measurement::{Measurement, NoiseParams, Scorer};
use tactile_core::ransac::RansacConfig;
use tactile_core::simkit::{
    fixtures, generate_cluttered_measurements, sample_constraining_measurements, sample_surface_measurements,
    ApproachDistribution, Scene,
};
use tactile_core::substream;

use crate::report::{MeanStd, Thresholds, TrialReport};
use crate::run::{localize, trial_seed, DATA_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    Box,
    Back,
    Register,
}

impl Fixture {
    /// The three evaluation objects, in increasing face count.
    pub const ALL: [Fixture; 3] = [Fixture::Box, Fixture::Back, Fixture::Register];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Box => "box",
            Fixture::Back => "back",
            Fixture::Register => "register",
        }
    }

    pub fn mesh(self) -> Mesh {
        match self {
            Fixture::Box => fixtures::box_fixture(),
            Fixture::Back => fixtures::chair_back(),
            Fixture::Register => fixtures::register(),
        }
    }
}

fn wide_region() -> UncertaintyRegion {
    UncertaintyRegion::uniform(Pose::identity(), 50.0, 0.5).expect("constant region is valid")
}

fn build_index(mesh: &Mesh) -> Result<AngleIndex> {
    Ok(AngleIndex::build_auto(mesh, &EntropyConfig::default())?)
}

// ---------------------------------------------------------------- speedup

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupConfig {
    pub trials: usize,
    pub seed: u64,
    pub fixtures: Vec<Fixture>,
    pub measurements: usize,
    /// Poses scored per trial by each scorer.
    pub poses_per_trial: usize,
    pub noise: NoiseParams,
    pub delta_alpha: f64,
    pub region: UncertaintyRegion,
}

impl Default for SpeedupConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            seed: 0,
            fixtures: Fixture::ALL.to_vec(),
            measurements: 15,
            poses_per_trial: 2000,
            noise: NoiseParams::default(),
            delta_alpha: 0.09,
            region: wide_region(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupTiming {
    /// Seconds per trial with the angle index.
    pub index_s: MeanStd,
    /// Seconds per trial comparing against every face.
    pub exhaustive_s: MeanStd,
    /// Total exhaustive time over total indexed time.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub fixture: Fixture,
    pub faces: usize,
    /// Faces compared per measurement with the index.
    pub mean_candidates: f64,
    pub timing: SpeedupTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupVerdict {
    /// Ratios never decrease from one fixture to the next.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub config: SpeedupConfig,
    pub rows: Vec<SpeedupRow>,
    pub timing: SpeedupVerdict,
}

/// Times the likelihood with and without the index over the same
/// measurements and poses. Each trial draws a ground truth, `measurements`
/// noisy surface contacts and `poses_per_trial` poses from the region; the
/// two scorers alternate which goes first. Runs single-threaded.
pub fn speedup(config: &SpeedupConfig) -> Result<SpeedupReport> {
    if config.trials == 0 || config.poses_per_trial == 0 || config.measurements == 0 {
        bail!("speedup suite needs at least one trial, pose and measurement");
    }
    let mut rows = Vec::new();
    for &fixture in &config.fixtures {
        let mesh = fixture.mesh();
        let index = build_index(&mesh)?;
        let exhaustive = Scorer::new(&mesh, config.noise, None)?;
        let indexed = Scorer::new(&mesh, config.noise, Some((&index, config.delta_alpha)))?;
        let (mut t_idx, mut t_ex) = (Vec::new(), Vec::new());
        let mut candidates = 0usize;
        for trial in 0..config.trials {
            let mut rng = substream(trial_seed(config.seed, trial as u64), DATA_STREAM);
            let truth = config.region.sample_uniform(&mut rng);
            let ys = sample_surface_measurements(&mesh, &truth, config.measurements, &config.noise, &mut rng)?;
            let poses: Vec<Pose> = (0..config.poses_per_trial)
                .map(|_| config.region.sample_uniform(&mut rng))
                .collect();
            let (idx, ex) = if trial % 2 == 0 {
                let idx = time_scorer(&indexed, &ys, &poses);
                (idx, time_scorer(&exhaustive, &ys, &poses))
            } else {
                let ex = time_scorer(&exhaustive, &ys, &poses);
                (time_scorer(&indexed, &ys, &poses), ex)
            };
            candidates += idx.1;
            t_idx.push(idx.0.as_secs_f64());
            t_ex.push(ex.0.as_secs_f64());
        }
        let evaluations = config.trials * config.poses_per_trial * config.measurements;
        rows.push(SpeedupRow {
            fixture,
            faces: mesh.face_count(),
            mean_candidates: candidates as f64 / evaluations as f64,
            timing: SpeedupTiming {
                ratio: t_ex.iter().sum::<f64>() / t_idx.iter().sum::<f64>(),
                index_s: MeanStd::of(t_idx),
                exhaustive_s: MeanStd::of(t_ex),
            },
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].timing.ratio >= w[0].timing.ratio);
    Ok(SpeedupReport {
        config: config.clone(),
        rows,
        timing: SpeedupVerdict { monotone },
    })
}

fn time_scorer(scorer: &Scorer, ys: &[Measurement], poses: &[Pose]) -> (Duration, usize) {
    let start = Instant::now();
    let mut total = 0.0;
    let mut faces = 0;
    for pose in poses {
        let (u, f) = scorer.total_error_counted(ys, pose);
        total += u;
        faces += f;
    }
    black_box(total);
    (start.elapsed(), faces)
}

impl SpeedupReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>5} {:>10} {:>18} {:>18} {:>8}",
            "object", "faces", "cand/meas", "with index (s)", "exhaustive (s)", "ratio"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>5} {:>10.2} {:>18} {:>18} {:>7.2}x",
                r.fixture.name(),
                r.faces,
                r.mean_candidates,
                format!("{:.4}", r.timing.index_s),
                format!("{:.4}", r.timing.exhaustive_s),
                r.timing.ratio
            );
        }
        let _ = writeln!(out, "ratios monotone in face count: {}", self.timing.monotone);
        out
    }
}

// ------------------------------------------------------------ reliability

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityConfig {
    pub trials: usize,
    pub seed: u64,
    pub fixtures: Vec<Fixture>,
    pub measurements: usize,
    pub noise: NoiseParams,
    pub delta_alpha: f64,
    pub region: UncertaintyRegion,
    pub estimator: ScalingSeriesParams,
    pub thresholds: Thresholds,
    /// Measurement sets are redrawn until they pin down all six degrees of
    /// freedom at least this well (see `constraint_strength`).
    pub min_strength: f64,
    pub max_draws: usize,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            seed: 0,
            fixtures: Fixture::ALL.to_vec(),
            measurements: 15,
            noise: NoiseParams::default(),
            delta_alpha: 0.09,
            region: wide_region(),
            estimator: ScalingSeriesParams::default(),
            thresholds: Thresholds::default(),
            min_strength: 0.05,
            max_draws: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTrial {
    pub fixture: Fixture,
    pub trial: usize,
    pub seed: u64,
    pub indexed: TrialReport,
    pub exhaustive: TrialReport,
}

/// Aggregate over the trials of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub translation_mm: MeanStd,
    pub rotation_rad: MeanStd,
    pub wall_time_s: MeanStd,
}

impl ModeSummary {
    pub fn of<'a>(reports: impl IntoIterator<Item = &'a TrialReport>) -> Self {
        let reports: Vec<&TrialReport> = reports.into_iter().collect();
        let successes = reports.iter().filter(|r| r.success).count();
        let trials = reports.len();
        Self {
            successes,
            trials,
            rate: successes as f64 / trials.max(1) as f64,
            translation_mm: MeanStd::of(reports.iter().filter_map(|r| r.translation_mm())),
            rotation_rad: MeanStd::of(reports.iter().filter_map(|r| r.rotation_rad())),
            wall_time_s: MeanStd::of(reports.iter().map(|r| r.wall_time_s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub fixture: Fixture,
    pub faces: usize,
    pub indexed: ModeSummary,
    pub exhaustive: ModeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub config: ReliabilityConfig,
    pub rows: Vec<ReliabilityRow>,
    pub trials: Vec<ReliabilityTrial>,
}

/// Both methods localize the same ground truth from the same measurements
/// with the same estimator seed; only the face selection differs.
pub fn reliability(config: &ReliabilityConfig) -> Result<ReliabilityReport> {
    if config.trials == 0 {
        bail!("reliability suite needs at least one trial");
    }
    let meshes: Vec<(Fixture, Mesh, AngleIndex)> = config
        .fixtures
        .iter()
        .map(|&f| {
            let mesh = f.mesh();
            let index = build_index(&mesh)?;
            Ok((f, mesh, index))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..meshes.len())
        .flat_map(|m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    let trials = jobs
        .into_par_iter()
        .map(|(m, trial)| {
            let (fixture, mesh, index) = &meshes[m];
            reliability_trial(config, *fixture, mesh, index, trial)
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = meshes
        .iter()
        .map(|(fixture, mesh, _)| {
            let mine: Vec<&ReliabilityTrial> = trials.iter().filter(|t| t.fixture == *fixture).collect();
            ReliabilityRow {
                fixture: *fixture,
                faces: mesh.face_count(),
                indexed: ModeSummary::of(mine.iter().map(|t| &t.indexed)),
                exhaustive: ModeSummary::of(mine.iter().map(|t| &t.exhaustive)),
            }
        })
        .collect();
    Ok(ReliabilityReport {
        config: config.clone(),
        rows,
        trials,
    })
}

fn reliability_trial(
    config: &ReliabilityConfig,
    fixture: Fixture,
    mesh: &Mesh,
    index: &AngleIndex,
    trial: usize,
) -> Result<ReliabilityTrial> {
    let seed = trial_seed(config.seed, trial as u64);
    let mut rng = substream(seed, DATA_STREAM);
    let truth = config.region.sample_uniform(&mut rng);
    let ys = sample_constraining_measurements(
        mesh,
        &truth,
        config.measurements,
        &config.noise,
        config.min_strength,
        config.max_draws,
        &mut rng,
    )?;
    let run = |scorer: &Scorer| -> Result<TrialReport> {
        let loc = localize(
            scorer,
            &ys,
            &config.region,
            &config.estimator,
            None,
            Some(&truth),
            &config.thresholds,
            seed,
        )?;
        Ok(loc.report)
    };
    let indexed = run(&Scorer::new(mesh, config.noise, Some((index, config.delta_alpha)))?)?;
    let exhaustive = run(&Scorer::new(mesh, config.noise, None)?)?;
    Ok(ReliabilityTrial {
        fixture,
        trial,
        seed,
        indexed,
        exhaustive,
    })
}

impl ReliabilityReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>5} {:>12} {:>18} {:>12} {:>18}",
            "object", "faces", "with index", "err (mm)", "exhaustive", "err (mm)"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>5} {:>12} {:>18} {:>12} {:>18}",
                r.fixture.name(),
                r.faces,
                format!("{}/{}", r.indexed.successes, r.indexed.trials),
                format!("{}", r.indexed.translation_mm),
                format!("{}/{}", r.exhaustive.successes, r.exhaustive.trials),
                format!("{}", r.exhaustive.translation_mm),
            );
        }
        out
    }
}

// ---------------------------------------------------------------- clutter

/// Optional overrides of the RANSAC defaults, which depend on the number
/// of measurements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RansacOverrides {
    pub subset_size: Option<usize>,
    pub min_consensus: Option<usize>,
    pub inlier_threshold: Option<f64>,
    pub goodness_stop: Option<f64>,
    pub max_iterations: Option<usize>,
    pub hypothesis_particles: Option<usize>,
}

impl RansacOverrides {
    pub fn config(&self, n: usize, seed: u64) -> RansacConfig {
        let mut c = RansacConfig::for_measurements(n, seed);
        if let Some(m) = self.subset_size {
            c.subset_size = m;
            if self.min_consensus.is_none() {
                c.min_consensus = c.min_consensus.max(m);
            }
        }
        if let Some(d) = self.min_consensus {
            c.min_consensus = d;
        }
        if let Some(e) = self.inlier_threshold {
            c.inlier_threshold = e;
        }
        if let Some(g) = self.goodness_stop {
            c.goodness_stop = g;
        }
        if let Some(k) = self.max_iterations {
            c.max_iterations = k;
        }
        if let Some(p) = self.hypothesis_particles {
            c.hypothesis_particles = p;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterConfig {
    pub trials: usize,
    pub seed: u64,
    /// Scene file; the shipped clutter scene when absent.
    pub scene: Option<PathBuf>,
    pub approach: ApproachDistribution,
    pub measurements: usize,
    /// Accepted range of outliers per measurement set; sets outside it are
    /// redrawn from the same stream.
    pub outliers: [usize; 2],
    pub max_draws: usize,
    pub noise: NoiseParams,
    /// `None` compares against every face.
    pub delta_alpha: Option<f64>,
    pub region: UncertaintyRegion,
    pub estimator: ScalingSeriesParams,
    pub ransac: RansacOverrides,
    pub thresholds: Thresholds,
}

impl Default for ClutterConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            seed: 0,
            scene: None,
            approach: fixtures::clutter_approach(),
            measurements: 15,
            outliers: [1, 5],
            max_draws: 200,
            noise: NoiseParams::default(),
            delta_alpha: Some(0.09),
            region: UncertaintyRegion::uniform(Pose::identity(), 10.0, 0.3).expect("constant region is valid"),
            estimator: ScalingSeriesParams::default(),
            ransac: RansacOverrides::default(),
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterTrial {
    pub trial: usize,
    pub seed: u64,
    /// Measurement sets drawn until one had an accepted outlier count.
    pub draws: usize,
    pub true_outliers: Vec<usize>,
    pub without_ransac: TrialReport,
    pub with_ransac: TrialReport,
}

impl ClutterTrial {
    /// True outliers the classifier rejected.
    pub fn outliers_found(&self) -> usize {
        self.flagged().filter(|i| self.true_outliers.contains(i)).count()
    }

    /// True inliers the classifier rejected.
    pub fn inliers_rejected(&self) -> usize {
        self.flagged().filter(|i| !self.true_outliers.contains(i)).count()
    }

    fn flagged(&self) -> impl Iterator<Item = &usize> {
        self.with_ransac.ransac.iter().flat_map(|r| r.outliers.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSummary {
    pub without_ransac: ModeSummary,
    pub with_ransac: ModeSummary,
    /// Mean translation error without RANSAC over the mean with it.
    pub improvement: f64,
    /// Pooled over trials.
    pub outlier_recall: f64,
    pub false_outlier_rate: f64,
    pub consensus_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterReport {
    pub config: ClutterConfig,
    pub summary: ClutterSummary,
    pub trials: Vec<ClutterTrial>,
}

/// Draws one labelled measurement set with an accepted outlier count,
/// returning the ground truth, the set and the number of draws it took.
pub fn draw_clutter_set(
    config: &ClutterConfig,
    scene: &Scene,
    seed: u64,
) -> Result<(Pose, Vec<tactile_core::simkit::LabeledMeasurement>, usize)> {
    let mut scene = scene.clone();
    let mut rng = substream(seed, DATA_STREAM);
    let [lo, hi] = config.outliers;
    for draw in 1..=config.max_draws.max(1) {
        let truth = config.region.sample_uniform(&mut rng);
        scene.target_mut().pose = truth;
        let ys =
            generate_cluttered_measurements(&scene, config.measurements, &config.approach, &config.noise, &mut rng)?;
        let k = ys.iter().filter(|y| y.is_outlier).count();
        if (lo..=hi).contains(&k) {
            return Ok((truth, ys, draw));
        }
    }
    bail!(
        "no measurement set with {lo}-{hi} outliers in {} draws",
        config.max_draws
    )
}

pub fn load_scene(path: Option<&PathBuf>) -> Result<Scene> {
    let path = path.cloned().unwrap_or_else(fixtures::clutter_scene_path);
    Scene::load(&path).with_context(|| format!("loading scene {}", path.display()))
}

/// Every trial localizes the same measurement set twice: the plain
/// estimator on all contacts, and RANSAC.
pub fn clutter(config: &ClutterConfig) -> Result<ClutterReport> {
    if config.trials == 0 {
        bail!("clutter suite needs at least one trial");
    }
    let scene = load_scene(config.scene.as_ref())?;
    let mesh: &Mesh = &scene.target().mesh;
    let index = match config.delta_alpha {
        Some(_) => Some(build_index(mesh)?),
        None => None,
    };
    let scorer = Scorer::new(mesh, config.noise, index.as_ref().zip(config.delta_alpha))?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(config.seed, trial as u64);
            let (truth, labeled, draws) = draw_clutter_set(config, &scene, seed)?;
            let ys: Vec<Measurement> = labeled.iter().map(|y| y.measurement).collect();
            let ransac = config.ransac.config(ys.len(), seed);
            let run = |r: Option<&RansacConfig>| {
                localize(
                    &scorer,
                    &ys,
                    &config.region,
                    &config.estimator,
                    r,
                    Some(&truth),
                    &config.thresholds,
                    seed,
                )
                .map(|l| l.report)
            };
            Ok(ClutterTrial {
                trial,
                seed,
                draws,
                true_outliers: labeled
                    .iter()
                    .enumerate()
                    .filter(|(_, y)| y.is_outlier)
                    .map(|(i, _)| i)
                    .collect(),
                without_ransac: run(None)?,
                with_ransac: run(Some(&ransac))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let without = ModeSummary::of(trials.iter().map(|t| &t.without_ransac));
    let with = ModeSummary::of(trials.iter().map(|t| &t.with_ransac));
    let planted: usize = trials.iter().map(|t| t.true_outliers.len()).sum();
    let clean: usize = trials.iter().map(|t| config.measurements - t.true_outliers.len()).sum();
    let summary = ClutterSummary {
        improvement: without.translation_mm.mean / with.translation_mm.mean,
        without_ransac: without,
        with_ransac: with,
        outlier_recall: trials.iter().map(ClutterTrial::outliers_found).sum::<usize>() as f64 / planted.max(1) as f64,
        false_outlier_rate: trials.iter().map(ClutterTrial::inliers_rejected).sum::<usize>() as f64
            / clean.max(1) as f64,
        consensus_failures: trials
            .iter()
            .filter(|t| t.with_ransac.ransac.as_ref().is_some_and(|r| !r.consensus))
            .count(),
    };
    Ok(ClutterReport {
        config: config.clone(),
        summary,
        trials,
    })
}

impl ClutterReport {
    pub fn table(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>18} {:>18} {:>10}",
            "", "translation (mm)", "rotation (rad)", "success"
        );
        for (name, m) in [("without RANSAC", &s.without_ransac), ("with RANSAC", &s.with_ransac)] {
            let _ = writeln!(
                out,
                "{:<16} {:>18} {:>18} {:>10}",
                name,
                format!("{}", m.translation_mm),
                format!("{:.3}", m.rotation_rad),
                format!("{}/{}", m.successes, m.trials)
            );
        }
        let _ = writeln!(
            out,
            "improvement {:.2}x, outlier recall {:.3}, false-outlier rate {:.3}, no consensus {}",
            s.improvement, s.outlier_recall, s.false_outlier_rate, s.consensus_failures
        );
        out
    }
}
