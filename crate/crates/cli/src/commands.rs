use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tactile_core::estimator::ScalingSeriesParams;
use tactile_core::face_index::{mean_candidate_fraction, AngleIndex, EntropyConfig};
use tactile_core::geometry::{load_mesh, Mesh, Pose};
use tactile_core::measurement::{read_measurements, write_measurements_jsonl, Scorer};
use tactile_core::simkit::sample_surface_measurements;
use tactile_core::substream;

use crate::report::{write_atomic, write_json_atomic, Envelope};
use crate::run::{localize, DATA_STREAM};
use crate::suites::{self, ClutterConfig, ReliabilityConfig, SpeedupConfig};
use crate::{
    BenchmarkCommand, ClutterSimArgs, Command, IndexBuildArgs, IndexCommand, IndexStatsArgs, LocalizeArgs,
    SimulateCommand, SurfaceArgs,
};

/// How a command that ran to completion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The run finished but the estimate missed the success thresholds or
    /// RANSAC found no consensus.
    LocalizationFailed,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::LocalizationFailed => 2,
        }
    }
}

/// Runs one subcommand, writing human-readable output to `out`.
pub fn execute(command: &Command, out: &mut dyn std::io::Write) -> Result<Outcome> {
    match command {
        Command::Index(IndexCommand::Build(a)) => index_build(a, out),
        Command::Index(IndexCommand::Stats(a)) => index_stats(a, out),
        Command::Localize(a) => cmd_localize(a, out),
        Command::Simulate(SimulateCommand::Surface(a)) => simulate_surface(a, out),
        Command::Simulate(SimulateCommand::Clutter(a)) => simulate_clutter(a, out),
        Command::Benchmark(b) => benchmark(b, out),
    }
}

fn read_mesh(path: &Path) -> Result<Mesh> {
    load_mesh(path, None).with_context(|| format!("loading mesh {}", path.display()))
}

fn index_summary(index: &AngleIndex, bins: usize, delta_alpha: f64, seed: u64) -> String {
    let r = index.reference();
    let mut s = String::new();
    let _ = writeln!(s, "entries: {}", index.len());
    let _ = writeln!(s, "reference: [{:.6}, {:.6}, {:.6}]", r.x, r.y, r.z);
    let _ = writeln!(s, "entropy ({bins} bins): {:.6}", index.entropy(bins));
    let _ = writeln!(s, "histogram: {:?}", index.histogram(bins));
    let fraction = mean_candidate_fraction(index, delta_alpha, 10_000, &mut substream(seed, 0));
    let _ = writeln!(s, "candidate fraction at delta_alpha {delta_alpha}: {fraction:.4}");
    s
}

fn index_build(a: &IndexBuildArgs, out: &mut dyn std::io::Write) -> Result<Outcome> {
    let mesh = read_mesh(&a.mesh)?;
    let config = EntropyConfig {
        n_bins: a.bins,
        n_candidate_refs: a.candidates,
        seed: a.seed,
    };
    let index = AngleIndex::build_auto(&mesh, &config)?;
    write_atomic(&a.out, index.to_json()?.as_bytes())?;
    write!(out, "{}", index_summary(&index, a.bins, 0.09, a.seed))?;
    Ok(Outcome::Success)
}

fn index_stats(a: &IndexStatsArgs, out: &mut dyn std::io::Write) -> Result<Outcome> {
    let index = AngleIndex::load(&a.index).with_context(|| format!("loading index {}", a.index.display()))?;
    if let Some(path) = &a.mesh {
        index.check_mesh(&read_mesh(path)?)?;
        writeln!(out, "mesh fingerprint: ok")?;
    }
    write!(out, "{}", index_summary(&index, a.bins, a.delta_alpha, a.seed))?;
    Ok(Outcome::Success)
}

fn read_pose(path: &Path) -> Result<Pose> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing pose {}", path.display()))
}

fn estimator_params(particles: Option<usize>) -> ScalingSeriesParams {
    let mut p = ScalingSeriesParams::default();
    if let Some(n) = particles {
        p.max_particles = n;
    }
    p
}

fn cmd_localize(a: &LocalizeArgs, out: &mut dyn std::io::Write) -> Result<Outcome> {
    let overrides = a.ransac.overrides();
    if !a.use_ransac && overrides != Default::default() {
        bail!("RANSAC options need --ransac");
    }
    if a.use_ransac && a.dump_belief.is_some() {
        bail!("--dump-belief is only available without --ransac");
    }
    if a.no_index && a.index.is_some() {
        bail!("--index and --no-index are mutually exclusive");
    }
    let mesh = read_mesh(&a.mesh)?;
    let ys = read_measurements(&a.measurements)
        .with_context(|| format!("reading measurements {}", a.measurements.display()))?;
    let index = match (&a.index, a.no_index) {
        (_, true) => None,
        (Some(path), false) => {
            let index = AngleIndex::load(path).with_context(|| format!("loading index {}", path.display()))?;
            index.check_mesh(&mesh)?;
            Some(index)
        }
        (None, false) => Some(AngleIndex::build_auto(&mesh, &EntropyConfig::default())?),
    };
    let scorer = Scorer::new(&mesh, a.noise.params()?, index.as_ref().map(|i| (i, a.delta_alpha)))?;
    let region = a.region.region(50.0, 0.5)?;
    let truth = a.truth.as_deref().map(read_pose).transpose()?;
    let ransac = a.use_ransac.then(|| overrides.config(ys.len(), a.seed));
    let loc = localize(
        &scorer,
        &ys,
        &region,
        &estimator_params(a.particles),
        ransac.as_ref(),
        truth.as_ref(),
        &a.thresholds.thresholds(),
        a.seed,
    )?;
    if let (Some(path), Some(belief)) = (&a.dump_belief, &loc.belief) {
        write_atomic(path, belief.to_json().as_bytes())?;
    }
    let envelope = Envelope::new("localize", &loc.report);
    match &a.out {
        Some(path) => write_json_atomic(path, &envelope)?,
        None => writeln!(out, "{}", serde_json::to_string_pretty(&envelope)?)?,
    }
    Ok(if loc.report.success {
        Outcome::Success
    } else {
        Outcome::LocalizationFailed
    })
}

fn write_truth(path: Option<&Path>, truth: &Pose) -> Result<()> {
    match path {
        Some(p) => write_json_atomic(p, truth),
        None => Ok(()),
    }
}

fn simulate_surface(a: &SurfaceArgs, out: &mut dyn std::io::Write) -> Result<Outcome> {
    let mesh = read_mesh(&a.mesh)?;
    let mut rng = substream(a.seed, DATA_STREAM);
    let truth = match a.pose {
        Some(p) => p,
        None => a.region.region(50.0, 0.5)?.sample_uniform(&mut rng),
    };
    let ys = sample_surface_measurements(&mesh, &truth, a.n, &a.noise.simulation()?, &mut rng)?;
    let mut buf = Vec::new();
    write_measurements_jsonl(&mut buf, &ys)?;
    write_atomic(&a.out, &buf)?;
    write_truth(a.truth_out.as_deref(), &truth)?;
    writeln!(out, "wrote {} measurements to {}", ys.len(), a.out.display())?;
    Ok(Outcome::Success)
}

fn simulate_clutter(a: &ClutterSimArgs, out: &mut dyn std::io::Write) -> Result<Outcome> {
    let config = ClutterConfig {
        scene: a.scene.clone(),
        measurements: a.n,
        outliers: [a.min_outliers, a.max_outliers],
        noise: a.noise.simulation()?,
        region: a.region.region(10.0, 0.3)?,
        ..ClutterConfig::default()
    };
    let scene = suites::load_scene(config.scene.as_ref())?;
    let (truth, ys, _) = suites::draw_clutter_set(&config, &scene, a.seed)?;
    let mut buf = Vec::new();
    for y in &ys {
        serde_json::to_writer(&mut buf, y)?;
        buf.push(b'\n');
    }
    write_atomic(&a.out, &buf)?;
    write_truth(a.truth_out.as_deref(), &truth)?;
    let outliers = ys.iter().filter(|y| y.is_outlier).count();
    writeln!(
        out,
        "wrote {} measurements ({outliers} outliers) to {}",
        ys.len(),
        a.out.display()
    )?;
    Ok(Outcome::Success)
}

fn benchmark(b: &BenchmarkCommand, out: &mut dyn std::io::Write) -> Result<Outcome> {
    match b {
        BenchmarkCommand::Speedup(a) => {
            let config = SpeedupConfig {
                trials: a.suite.trials,
                seed: a.suite.seed,
                fixtures: a.fixtures.clone(),
                measurements: a.measurements,
                poses_per_trial: a.poses,
                noise: a.noise.params()?,
                delta_alpha: a.delta_alpha,
                region: a.region.region(50.0, 0.5)?,
            };
            let report = suites::speedup(&config)?;
            write!(out, "{}", report.table())?;
            save(a.suite.out.as_deref(), "benchmark_speedup", &report)?;
        }
        BenchmarkCommand::Reliability(a) => {
            let config = ReliabilityConfig {
                trials: a.suite.trials,
                seed: a.suite.seed,
                fixtures: a.fixtures.clone(),
                measurements: a.measurements,
                noise: a.noise.params()?,
                delta_alpha: a.delta_alpha,
                region: a.region.region(50.0, 0.5)?,
                estimator: estimator_params(a.particles),
                thresholds: a.thresholds.thresholds(),
                ..ReliabilityConfig::default()
            };
            let report = suites::reliability(&config)?;
            write!(out, "{}", report.table())?;
            save(a.suite.out.as_deref(), "benchmark_reliability", &report)?;
        }
        BenchmarkCommand::Clutter(a) => {
            let config = ClutterConfig {
                trials: a.suite.trials,
                seed: a.suite.seed,
                scene: a.scene.clone(),
                measurements: a.measurements,
                noise: a.noise.params()?,
                delta_alpha: (!a.no_index).then_some(a.delta_alpha),
                region: a.region.region(10.0, 0.3)?,
                estimator: estimator_params(a.particles),
                ransac: a.ransac.overrides(),
                thresholds: a.thresholds.thresholds(),
                ..ClutterConfig::default()
            };
            let report = suites::clutter(&config)?;
            write!(out, "{}", report.table())?;
            save(a.suite.out.as_deref(), "benchmark_clutter", &report)?;
        }
    }
    Ok(Outcome::Success)
}

fn save<T: serde::Serialize>(path: Option<&Path>, kind: &str, report: &T) -> Result<()> {
    match path {
        Some(p) => write_json_atomic(p, &Envelope::new(kind, report)),
        None => Ok(()),
    }
}
