//! Acceptance suite. Runs as a plain binary and prints one PASS/FAIL line
//! per criterion; pass criterion numbers (`-- 2 6`) to run a subset.
//! Set `ACCEPTANCE_STRICT` to exit non-zero on any FAIL.

use std::f64::consts::PI;
use std::time::Instant;

use anyhow::{ensure, Result};
use rand::Rng;
use rayon::prelude::*;
use tactile_cli::report::strip_timing;
use tactile_cli::suites::{self, ClutterConfig, Fixture, ReliabilityConfig, SpeedupConfig};
use tactile_core::estimator::{estimate_pose, ScalingSeriesParams};
use tactile_core::face_index::{shannon_entropy, AngleIndex, EntropyConfig};
use tactile_core::geometry::{point_triangle_distance, Pose, Triangle, UncertaintyRegion, UnitVec3, Vec3};
use tactile_core::measurement::{face_distance, Measurement, NoiseParams, Scorer};
use tactile_core::ransac::{classify, max_iterations, RansacConfig};
use tactile_core::simkit::{
    fixtures, generate_cluttered_measurements, planted_outliers, sample_constraining_measurements,
    sample_surface_measurements, Scene,
};
use tactile_core::{substream, Error};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

const NOISELESS: NoiseParams = NoiseParams {
    sigma_pos: 0.0,
    sigma_nor: 0.0,
};

/// Indexed likelihood throughput at least twice the exhaustive one on the
/// register, and ratios non-decreasing box -> back -> register.
fn speedup() -> Result<Verdict> {
    let report = suites::speedup(&SpeedupConfig::default())?;
    let ratios: Vec<f64> = report.rows.iter().map(|r| r.timing.ratio).collect();
    let register = report
        .rows
        .iter()
        .find(|r| r.fixture == Fixture::Register)
        .map(|r| r.timing.ratio)
        .unwrap_or(f64::NAN);
    verdict(
        register >= 2.0 && report.timing.monotone,
        format!(
            "ratios box/back/register {:.2}/{:.2}/{:.2} (register >= 2.00, non-decreasing: {})",
            ratios[0], ratios[1], ratios[2], report.timing.monotone
        ),
    )
}

/// 10,000 noiseless surface contacts per fixture: identical face and value
/// with and without the index.
fn pruning_exactness() -> Result<Verdict> {
    let mut parts = Vec::new();
    let mut pass = true;
    for f in Fixture::ALL {
        let mesh = f.mesh();
        let index = AngleIndex::build_auto(&mesh, &EntropyConfig::default())?;
        let noise = NoiseParams::default();
        let indexed = Scorer::new(&mesh, noise, Some((&index, 0.09)))?;
        let exhaustive = Scorer::new(&mesh, noise, None)?;
        let mut rng = substream(2, f as u64);
        let region = UncertaintyRegion::uniform(Pose::identity(), 50.0, PI)?;
        let mut same = 0;
        let n = 10_000;
        for _ in 0..100 {
            let pose = region.sample_uniform(&mut rng);
            let ys = sample_surface_measurements(&mesh, &pose, n / 100, &NOISELESS, &mut rng)?;
            for y in &ys {
                let a = indexed.object_distance(y, &pose);
                let b = exhaustive.object_distance(y, &pose);
                if a.face == b.face && a.distance_sq.to_bits() == b.distance_sq.to_bits() {
                    same += 1;
                }
            }
        }
        pass &= same == n;
        parts.push(format!("{} {same}/{n}", f.name()));
    }
    verdict(pass, format!("{} identical (100% required)", parts.join(", ")))
}

/// 50 trials per fixture at 50 mm / 0.5 rad: both methods succeed in at
/// least 90% of trials and differ by at most one trial.
fn reliability() -> Result<Verdict> {
    let report = suites::reliability(&ReliabilityConfig::default())?;
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &report.rows {
        let diff = r.indexed.successes.abs_diff(r.exhaustive.successes);
        pass &= r.indexed.rate >= 0.9 && r.exhaustive.rate >= 0.9 && diff <= 1;
        parts.push(format!(
            "{} index {}/{} exhaustive {}/{}",
            r.fixture.name(),
            r.indexed.successes,
            r.indexed.trials,
            r.exhaustive.successes,
            r.exhaustive.trials
        ));
    }
    verdict(
        pass,
        format!("{} (each >= 90%, difference <= 1 trial)", parts.join(", ")),
    )
}

/// 50 clutter scenes: RANSAC mean errors within 2 mm / 0.05 rad, and the
/// plain estimator at least twice as far off in translation.
fn clutter() -> Result<Verdict> {
    let report = suites::clutter(&ClutterConfig::default())?;
    let s = &report.summary;
    let (with_t, with_r) = (s.with_ransac.translation_mm.mean, s.with_ransac.rotation_rad.mean);
    let without_t = s.without_ransac.translation_mm.mean;
    verdict(
        with_t <= 2.0 && with_r <= 0.05 && without_t >= 2.0 * with_t,
        format!(
            "with RANSAC {} mm / {:.3} rad (<= 2 mm, <= 0.05 rad), without {} mm (>= 2x: {:.2}x)",
            s.with_ransac.translation_mm, with_r, s.without_ransac.translation_mm, s.improvement
        ),
    )
}

/// Planted outliers at least 10 combined sigmas from the target: pooled
/// recall >= 95% and false-outlier rate <= 10% over 50 seeds.
fn outlier_identification() -> Result<Verdict> {
    let mesh = fixtures::box_fixture();
    let index = AngleIndex::build_auto(&mesh, &EntropyConfig::default())?;
    let noise = NoiseParams::default();
    let scorer = Scorer::new(&mesh, noise, Some((&index, 0.09)))?;
    let region = UncertaintyRegion::uniform(Pose::identity(), 10.0, 0.3)?;
    let counts = (0..50u64)
        .into_par_iter()
        .map(|seed| -> Result<[usize; 4]> {
            let mut rng = substream(seed, 5000);
            let truth = region.sample_uniform(&mut rng);
            let planted = 1 + (seed % 3) as usize;
            let mut ys = sample_constraining_measurements(&mesh, &truth, 12, &noise, 0.05, 100, &mut rng)?;
            ys.extend(planted_outliers(&mesh, &truth, planted, &noise, 10.0, 60.0, &mut rng)?);
            let config = RansacConfig::for_measurements(ys.len(), seed);
            let flagged = match classify(&ys, &region, &scorer, &ScalingSeriesParams::default(), &config) {
                Ok(r) => r.outliers,
                Err(Error::NoConsensus(_)) => Vec::new(),
                Err(e) => return Err(e.into()),
            };
            let found = flagged.iter().filter(|&&i| i >= 12).count();
            Ok([found, planted, flagged.len() - found, 12])
        })
        .collect::<Result<Vec<_>>>()?;
    let sum = |k: usize| counts.iter().map(|c| c[k]).sum::<usize>() as f64;
    let recall = sum(0) / sum(1);
    let false_rate = sum(2) / sum(3);
    verdict(
        recall >= 0.95 && false_rate <= 0.10,
        format!(
            "recall {recall:.3} ({} of {} planted, >= 0.95), false-outlier rate {false_rate:.3} (<= 0.10)",
            sum(0),
            sum(1)
        ),
    )
}

/// Nearest-grid-point distance over a dense barycentric grid: an upper
/// bound on the true distance, within one grid cell of it.
fn grid_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3, steps: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let (u, v) = (i as f64 / steps as f64, j as f64 / steps as f64);
            best = best.min((a + (b - a) * u + (c - a) * v - p).norm_squared());
        }
    }
    best.sqrt()
}

fn formulas() -> Result<Verdict> {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // ceil(ln 0.01 / ln(1 - 1/64)) = ceil(292.42)
    let k = (0.01f64.ln() / (1.0 - 0.5f64.powi(6)).ln()).ceil() as usize;
    check(
        k == 293 && max_iterations(0.99, 0.5, 6)? == 293,
        "max_iterations(0.99, 0.5, 6) = 293",
    );

    // one angle in the middle of each of 4 bins over [0, pi]
    let alphas: Vec<f64> = (0..4).map(|i| (i as f64 + 0.5) * PI / 4.0).collect();
    check(
        (shannon_entropy(&alphas, 4) - 4f64.ln()).abs() < 1e-12,
        "uniform 4-bin entropy = ln 4",
    );

    // box top face (z = 25) with an upward normal: lift and tilt
    let mesh = fixtures::box_fixture();
    let noise = NoiseParams::default();
    let top = mesh
        .faces()
        .iter()
        .position(|f| f.normal.z > 0.99)
        .expect("box has an upward face");
    let centroid = {
        let t = &mesh.triangles()[top];
        (t.a + t.b + t.c) / 3.0
    };
    let tilt = 0.05f64;
    let lifted = Measurement::new(
        centroid + Vec3::z() * 5.0,
        UnitVec3::new_normalize(Vec3::new(tilt.sin(), 0.0, tilt.cos())),
    );
    let d2 = face_distance(&lifted, top, &mesh, &Pose::identity(), &noise)?.powi(2);
    let expected = (5.0f64 / 2.0).powi(2) + (tilt / 0.09).powi(2);
    check(
        (d2 - expected).abs() < 1e-9,
        "face distance = (pos/sigma_pos)^2 + (angle/sigma_nor)^2",
    );

    // homogeneity: scaling both sigmas by k scales d^2 by 1/k^2
    let wide = NoiseParams::new(4.0, 0.18)?;
    let d2_wide = face_distance(&lifted, top, &mesh, &Pose::identity(), &wide)?.powi(2);
    check((d2_wide - d2 / 4.0).abs() < 1e-9, "sigma homogeneity");

    // the object distance is the minimum over faces; log-likelihood is -u/2
    // and the total is additive over measurements
    let scorer = Scorer::new(&mesh, noise, None)?;
    let pose = Pose::from_axis_angle(Vec3::new(0.1, -0.2, 0.3), Vec3::new(3.0, -4.0, 5.0));
    let ys = sample_surface_measurements(&mesh, &pose, 20, &noise, &mut substream(9, 0))?;
    let mut min_ok = true;
    for y in &ys {
        let brute = (0..mesh.face_count())
            .map(|f| face_distance(y, f, &mesh, &pose, &noise))
            .collect::<tactile_core::Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            .powi(2);
        min_ok &= (scorer.object_distance(y, &pose).distance_sq - brute).abs() <= 1e-9 * brute.max(1.0);
    }
    check(min_ok, "object distance = min over faces");
    let u = scorer.total_error(&ys, &pose);
    let split = scorer.total_error(&ys[..7], &pose) + scorer.total_error(&ys[7..], &pose);
    check((u - split).abs() <= 1e-9 * u, "total error additive");
    check(
        (scorer.log_likelihood(&ys, &pose) + u / 2.0).abs() <= 1e-9 * u,
        "log-likelihood = -u/2",
    );

    // point-triangle distance against the grid oracle, 1000 instances
    let mut rng = substream(11, 0);
    let mut checked = 0;
    let mut grid_ok = true;
    while checked < 1000 {
        let mut p = || {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        };
        let (a, b, c, q) = (p(), p(), p(), p() * 2.0);
        if Triangle::new(a, b, c).area() < 1e-3 {
            continue;
        }
        checked += 1;
        let exact = point_triangle_distance(&q, &a, &b, &c)?;
        let grid = grid_distance(&q, &a, &b, &c, 300);
        let cell = (b - a).norm().max((c - a).norm()) / 300.0;
        grid_ok &= exact <= grid + 1e-12 && grid - exact <= cell.max(1e-3);
    }
    check(grid_ok, "point-triangle distance vs barycentric grid (1000 instances)");

    let n = 8;
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{n} of {n} formula checks hold")
        } else {
            format!("failed: {}", failures.join("; "))
        },
    )
}

fn json<T: serde::Serialize>(value: &T) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(value)?;
    strip_timing(&mut v);
    Ok(v)
}

/// Every pipeline run twice (and the suites on pools of different sizes)
/// gives identical output.
fn determinism() -> Result<Verdict> {
    let mut same = Vec::new();
    let mesh = fixtures::register();
    let index = AngleIndex::build_auto(&mesh, &EntropyConfig::default())?;
    let noise = NoiseParams::default();
    let scorer = Scorer::new(&mesh, noise, Some((&index, 0.09)))?;
    let region = UncertaintyRegion::uniform(Pose::identity(), 20.0, 0.3)?;

    let surface = || sample_surface_measurements(&mesh, &Pose::identity(), 15, &noise, &mut substream(3, 0));
    let ys = surface()?;
    same.push((
        "surface simulation",
        serde_json::to_string(&ys)? == serde_json::to_string(&surface()?)?,
    ));

    let scene = Scene::load(fixtures::clutter_scene_path())?;
    let approach = fixtures::clutter_approach();
    let cluttered = || generate_cluttered_measurements(&scene, 15, &approach, &noise, &mut substream(4, 0));
    same.push((
        "clutter simulation",
        serde_json::to_string(&cluttered()?)? == serde_json::to_string(&cluttered()?)?,
    ));

    let params = ScalingSeriesParams {
        max_particles: 1000,
        ..ScalingSeriesParams::default()
    };
    let estimate = || estimate_pose(&region, &ys, &scorer, &params, &mut substream(5, 0));
    let (a, b) = (estimate()?, estimate()?);
    same.push((
        "estimator",
        a.belief.to_json() == b.belief.to_json() && a.pose == b.pose,
    ));

    let config = RansacConfig {
        max_iterations: 5,
        ..RansacConfig::for_measurements(ys.len(), 6)
    };
    let ransac = || classify(&ys, &region, &scorer, &params, &config).map(|r| serde_json::to_string(&r));
    same.push(("ransac", ransac()?? == ransac()??));

    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build();
    let speed = SpeedupConfig {
        trials: 3,
        poses_per_trial: 200,
        ..SpeedupConfig::default()
    };
    same.push((
        "speedup suite",
        json(&suites::speedup(&speed)?)? == json(&suites::speedup(&speed)?)?,
    ));
    let rel = ReliabilityConfig {
        trials: 2,
        estimator: params,
        ..ReliabilityConfig::default()
    };
    let r1 = pool(1)?.install(|| suites::reliability(&rel))?;
    let r3 = pool(3)?.install(|| suites::reliability(&rel))?;
    same.push(("reliability suite (1 vs 3 threads)", json(&r1)? == json(&r3)?));
    let clut = ClutterConfig {
        trials: 2,
        estimator: params,
        ..ClutterConfig::default()
    };
    let c1 = pool(1)?.install(|| suites::clutter(&clut))?;
    let c3 = pool(3)?.install(|| suites::clutter(&clut))?;
    same.push(("clutter suite (1 vs 3 threads)", json(&c1)? == json(&c3)?));

    let differing: Vec<&str> = same.iter().filter(|(_, s)| !s).map(|(n, _)| *n).collect();
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} pipelines reproduce exactly", same.len())
        } else {
            format!("differ: {}", differing.join(", "))
        },
    )
}

type Criterion = (u32, &'static str, fn() -> Result<Verdict>);

fn main() {
    let criteria: [Criterion; 7] = [
        (1, "face-selection speedup", speedup),
        (2, "pruning exactness", pruning_exactness),
        (3, "reliability", reliability),
        (4, "clutter robustness", clutter),
        (5, "outlier identification", outlier_identification),
        (6, "formula suite", formulas),
        (7, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (mut ran, mut failed, mut errors) = (0, 0, 0);
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = run().and_then(|v| {
            ensure!(!v.detail.is_empty(), "empty verdict");
            Ok(v)
        });
        let secs = start.elapsed().as_secs_f64();
        ran += 1;
        match result {
            Ok(v) => {
                let tag = if v.pass { "PASS" } else { "FAIL" };
                println!("{tag} [{id}] {name}: {} ({secs:.0} s)", v.detail);
                failed += usize::from(!v.pass);
            }
            Err(e) => {
                println!("FAIL [{id}] {name}: error: {e:#} ({secs:.0} s)");
                failed += 1;
                errors += 1;
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    // a criterion that is not met is a result, not a broken build; set
    // ACCEPTANCE_STRICT to turn FAIL lines into a non-zero exit
    if errors > 0 || (failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some()) {
        std::process::exit(1);
    }
}
