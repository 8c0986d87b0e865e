//! `tactile-loc`: index building, localization runs, synthetic data and the
//! benchmark suites, as a library so tests can drive it in-process.

pub mod commands;
pub mod report;
pub mod run;
pub mod suites;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tactile_core::geometry::{Pose, UncertaintyRegion};
use tactile_core::measurement::NoiseParams;

use crate::report::Thresholds;
use crate::suites::{Fixture, RansacOverrides};

pub use commands::{execute, Outcome};

#[derive(Debug, Parser)]
#[command(name = "tactile-loc", version, about = "Touch-based 6-DOF object localization")]
pub struct Cli {
    /// Worker threads for particle scoring and parallel trials.
    #[arg(long, global = true, env = "TACTILE_LOC_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or inspect a face angle index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Estimate an object pose from a measurement file.
    Localize(LocalizeArgs),
    /// Generate synthetic measurements.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Run a benchmark suite and print a summary table.
    #[command(subcommand)]
    Benchmark(BenchmarkCommand),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    Build(IndexBuildArgs),
    Stats(IndexStatsArgs),
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Histogram bins for the entropy score.
    #[arg(long, default_value_t = 18)]
    pub bins: usize,
    /// Random reference candidates tried besides the coordinate axes.
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct IndexStatsArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Check the index against this mesh.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 18)]
    pub bins: usize,
    /// Window used for the candidate fraction estimate.
    #[arg(long, default_value_t = 0.09)]
    pub delta_alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct NoiseArgs {
    /// Position noise (mm).
    #[arg(long, default_value_t = 2.0)]
    pub sigma_pos: f64,
    /// Normal noise (rad).
    #[arg(long, default_value_t = 0.09)]
    pub sigma_nor: f64,
}

impl NoiseArgs {
    pub fn params(&self) -> Result<NoiseParams> {
        Ok(NoiseParams::new(self.sigma_pos, self.sigma_nor)?)
    }

    /// Noise added to simulated contacts, where zero means none.
    pub fn simulation(&self) -> Result<NoiseParams> {
        let ok = |s: f64| s.is_finite() && s >= 0.0;
        if !(ok(self.sigma_pos) && ok(self.sigma_nor)) {
            bail!("noise sigmas must be finite and >= 0");
        }
        Ok(NoiseParams {
            sigma_pos: self.sigma_pos,
            sigma_nor: self.sigma_nor,
        })
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct RegionArgs {
    /// Uncertainty half-extents: `T,R` for every axis, or
    /// `tx,ty,tz,rx,ry,rz` (mm, rad).
    #[arg(long, value_parser = parse_extents)]
    pub region: Option<[f64; 6]>,
    /// Prior pose at the centre of the region: `qw,qx,qy,qz,tx,ty,tz`.
    #[arg(long, value_parser = parse_pose)]
    pub center: Option<Pose>,
}

impl RegionArgs {
    pub fn region(&self, default_t: f64, default_r: f64) -> Result<UncertaintyRegion> {
        let e = self
            .region
            .unwrap_or([default_t, default_t, default_t, default_r, default_r, default_r]);
        Ok(UncertaintyRegion::new(
            self.center.unwrap_or_else(Pose::identity),
            [e[0], e[1], e[2]],
            [e[3], e[4], e[5]],
        )?)
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct RansacArgs {
    /// Minimal subset size.
    #[arg(long = "ransac-m")]
    pub subset_size: Option<usize>,
    /// A consensus set must be larger than this.
    #[arg(long = "ransac-d")]
    pub min_consensus: Option<usize>,
    /// Object distance below which a measurement joins the consensus.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Stop once a consensus scores a goodness below this.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Particle cap for per-subset hypotheses.
    #[arg(long)]
    pub hypothesis_particles: Option<usize>,
}

impl RansacArgs {
    pub fn overrides(&self) -> RansacOverrides {
        RansacOverrides {
            subset_size: self.subset_size,
            min_consensus: self.min_consensus,
            inlier_threshold: self.epsilon,
            goodness_stop: self.delta,
            max_iterations: self.max_iters,
            hypothesis_particles: self.hypothesis_particles,
        }
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ThresholdArgs {
    /// Translation error counted as a success (mm).
    #[arg(long, default_value_t = 5.0)]
    pub success_trans_mm: f64,
    /// Rotation error counted as a success (rad).
    #[arg(long, default_value_t = 0.05)]
    pub success_rot_rad: f64,
}

impl ThresholdArgs {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            translation_mm: self.success_trans_mm,
            rotation_rad: self.success_rot_rad,
        }
    }
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// JSON lines (`{"p": [..], "n": [..]}`) or CSV `px,py,pz,nx,ny,nz`.
    #[arg(long)]
    pub measurements: PathBuf,
    /// Prebuilt index; built from the mesh when absent.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Compare every measurement against every face.
    #[arg(long)]
    pub no_index: bool,
    /// Face selection window (rad).
    #[arg(long, default_value_t = 0.09)]
    pub delta_alpha: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    /// Particle cap per estimator iteration.
    #[arg(long)]
    pub particles: Option<usize>,
    /// Classify outliers with RANSAC before the final estimate.
    #[arg(long = "ransac")]
    pub use_ransac: bool,
    #[command(flatten)]
    pub ransac: RansacArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth pose file (`{"q": [..], "t": [..]}`) for error reporting.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the final weighted particle set here.
    #[arg(long)]
    pub dump_belief: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Contacts sampled on the surface of one mesh.
    Surface(SurfaceArgs),
    /// Ray-cast approach contacts in a cluttered scene, labelled.
    Clutter(ClutterSimArgs),
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub n: usize,
    /// Object pose; drawn from the region when absent.
    #[arg(long, value_parser = parse_pose)]
    pub pose: Option<Pose>,
    #[command(flatten)]
    pub region: RegionArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the ground-truth pose.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClutterSimArgs {
    /// Scene file; the shipped clutter scene when absent.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub n: usize,
    /// Sets with fewer outliers are redrawn.
    #[arg(long, default_value_t = 1)]
    pub min_outliers: usize,
    /// Sets with more outliers are redrawn.
    #[arg(long, default_value_t = 5)]
    pub max_outliers: usize,
    #[command(flatten)]
    pub region: RegionArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BenchmarkCommand {
    /// Likelihood throughput with and without the angle index.
    Speedup(SpeedupArgs),
    /// Success rate over random poses, with and without the index.
    Reliability(ReliabilityArgs),
    /// Errors in the cluttered scene with and without RANSAC.
    Clutter(ClutterBenchArgs),
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Full JSON report, including every trial.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpeedupArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Fixture::ALL)]
    pub fixtures: Vec<Fixture>,
    #[arg(long, default_value_t = 15)]
    pub measurements: usize,
    /// Poses scored per trial.
    #[arg(long, default_value_t = 2000)]
    pub poses: usize,
    #[arg(long, default_value_t = 0.09)]
    pub delta_alpha: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub region: RegionArgs,
}

#[derive(Debug, Args)]
pub struct ReliabilityArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Fixture::ALL)]
    pub fixtures: Vec<Fixture>,
    #[arg(long, default_value_t = 15)]
    pub measurements: usize,
    #[arg(long, default_value_t = 0.09)]
    pub delta_alpha: f64,
    #[arg(long)]
    pub particles: Option<usize>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

#[derive(Debug, Args)]
pub struct ClutterBenchArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub measurements: usize,
    #[arg(long, default_value_t = 0.09)]
    pub delta_alpha: f64,
    #[arg(long)]
    pub no_index: bool,
    #[arg(long)]
    pub particles: Option<usize>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    #[command(flatten)]
    pub ransac: RansacArgs,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("{v:?} is not a number"))
        })
        .collect()
}

fn parse_extents(s: &str) -> Result<[f64; 6]> {
    match parse_floats(s)?[..] {
        [t, r] => Ok([t, t, t, r, r, r]),
        [tx, ty, tz, rx, ry, rz] => Ok([tx, ty, tz, rx, ry, rz]),
        _ => bail!("expected T,R or tx,ty,tz,rx,ry,rz"),
    }
}

fn parse_pose(s: &str) -> Result<Pose> {
    match parse_floats(s)?[..] {
        [qw, qx, qy, qz, tx, ty, tz] => Ok(Pose::from_wxyz([qw, qx, qy, qz], [tx, ty, tz])?),
        _ => bail!("expected qw,qx,qy,qz,tx,ty,tz"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn region_accepts_two_or_six_values() {
        assert_eq!(parse_extents("50,0.5").unwrap(), [50.0, 50.0, 50.0, 0.5, 0.5, 0.5]);
        assert_eq!(
            parse_extents("1,2,3,0.1,0.2,0.3").unwrap(),
            [1.0, 2.0, 3.0, 0.1, 0.2, 0.3]
        );
        assert!(parse_extents("1,2,3").is_err());
        assert!(parse_extents("a,b").is_err());
    }

    #[test]
    fn pose_parses_and_normalizes() {
        let p = parse_pose("2,0,0,0,1,2,3").unwrap();
        assert_eq!(p.wxyz(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.translation().z, 3.0);
        assert!(parse_pose("1,0,0").is_err());
    }

    #[test]
    fn fixtures_list_parses() {
        let cli = Cli::try_parse_from(["tactile-loc", "benchmark", "speedup", "--fixtures", "box,register"]).unwrap();
        let Command::Benchmark(BenchmarkCommand::Speedup(a)) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.fixtures, [Fixture::Box, Fixture::Register]);
        assert_eq!(a.suite.trials, 50);
    }
}
