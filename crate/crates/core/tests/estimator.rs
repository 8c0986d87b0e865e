use tactile_core::estimator::{estimate_pose, normalize_and_prune, Belief, Particle, ScalingSeriesParams};
use tactile_core::face_index::{AngleIndex, EntropyConfig};
use tactile_core::geometry::{rotation_distance, translation_distance, Pose, UncertaintyRegion, Vec3};
use tactile_core::measurement::{NoiseParams, Scorer};
use tactile_core::simkit::{fixtures, sample_constraining_measurements, sample_surface_measurements};
use tactile_core::substream;

const NOISELESS: NoiseParams = NoiseParams {
    sigma_pos: 0.0,
    sigma_nor: 0.0,
};

#[test]
fn systematic_resampling_keeps_weight_ratio() {
    let a = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0));
    let b = Pose::from_translation(Vec3::new(-1.0, 0.0, 0.0));
    // 1000 particles at a carry three times the weight of 1000 at b
    // (contiguous blocks: a strictly alternating layout aliases with the
    // fixed stride of systematic resampling)
    let mut ps = vec![
        Particle {
            pose: a,
            log_weight: 3f64.ln(),
        };
        1000
    ];
    ps.extend(vec![
        Particle {
            pose: b,
            log_weight: 0.0
        };
        1000
    ]);
    let out = normalize_and_prune(Belief::new(ps).unwrap(), 50.0, 400, &mut substream(1, 0)).unwrap();
    assert_eq!(out.len(), 400);
    let at_a = out.particles().iter().filter(|p| p.pose == a).count() as f64;
    let at_b = out.particles().iter().filter(|p| p.pose == b).count() as f64;
    let ratio = at_a / at_b;
    assert!((ratio - 3.0).abs() <= 0.05 * 3.0, "ratio {ratio}");
    assert!((out.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn sharp_noise_concentrates_posterior_on_truth() {
    let mesh = fixtures::box_fixture();
    let truth = Pose::from_axis_angle(Vec3::new(0.01, -0.02, 0.015), Vec3::new(0.5, -0.3, 0.2));
    let region = UncertaintyRegion::uniform(Pose::identity(), 2.0, 0.05).unwrap();
    let mut rng = substream(3, 0);
    let ys = sample_constraining_measurements(&mesh, &truth, 20, &NOISELESS, 0.05, 50, &mut rng).unwrap();
    let sharp = NoiseParams::new(0.2, 0.01).unwrap();
    let scorer = Scorer::new(&mesh, sharp, None).unwrap();
    let params = ScalingSeriesParams {
        target_delta_pos: 0.1,
        target_delta_rot: 0.001,
        ..ScalingSeriesParams::default()
    };
    let est = estimate_pose(&region, &ys, &scorer, &params, &mut rng).unwrap();
    assert!(translation_distance(est.pose.translation(), truth.translation()) < 0.2);
    assert!(rotation_distance(est.pose.rotation(), truth.rotation()) < 0.005);
    // most of the posterior mass sits within a few sigmas of the truth
    let near: f64 = est
        .belief
        .particles()
        .iter()
        .filter(|p| translation_distance(p.pose.translation(), truth.translation()) < 0.5)
        .map(|p| p.log_weight.exp())
        .sum();
    assert!(near > 0.9, "mass near truth {near}");
}

#[test]
fn index_and_exhaustive_agree_bit_for_bit_on_tiny_region() {
    // one iteration, rotations too small to push a face normal out of the
    // window, noiseless data: every likelihood value matches, so the rng is
    // consumed identically and the whole run matches
    for mesh in [fixtures::box_fixture(), fixtures::chair_back(), fixtures::register()] {
        let truth = Pose::from_axis_angle(Vec3::new(0.0003, 0.0, -0.0002), Vec3::new(0.1, 0.2, -0.1));
        let region = UncertaintyRegion::uniform(Pose::identity(), 0.5, 0.001).unwrap();
        let params = ScalingSeriesParams::default();
        assert_eq!(params.iterations(&region), 1);
        let ys = sample_surface_measurements(&mesh, &truth, 20, &NOISELESS, &mut substream(5, 0)).unwrap();
        let index = AngleIndex::build_auto(&mesh, &EntropyConfig::default()).unwrap();
        let noise = NoiseParams::default();
        let with = Scorer::new(&mesh, noise, Some((&index, 0.09))).unwrap();
        let without = Scorer::new(&mesh, noise, None).unwrap();
        let a = estimate_pose(&region, &ys, &with, &params, &mut substream(6, 0)).unwrap();
        let b = estimate_pose(&region, &ys, &without, &params, &mut substream(6, 0)).unwrap();
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.belief, b.belief);
        assert!(a.stats.faces_evaluated < b.stats.faces_evaluated);
    }
}

#[test]
fn same_seed_same_estimate() {
    let mesh = fixtures::register();
    let truth = Pose::from_axis_angle(Vec3::new(0.1, -0.2, 0.05), Vec3::new(10.0, -5.0, 2.0));
    let ys = sample_surface_measurements(&mesh, &truth, 15, &NoiseParams::default(), &mut substream(7, 0)).unwrap();
    let index = AngleIndex::build_auto(&mesh, &EntropyConfig::default()).unwrap();
    let scorer = Scorer::new(&mesh, NoiseParams::default(), Some((&index, 0.09))).unwrap();
    let region = UncertaintyRegion::uniform(Pose::identity(), 20.0, 0.3).unwrap();
    let params = ScalingSeriesParams {
        max_particles: 1000,
        ..ScalingSeriesParams::default()
    };
    let run = |seed| estimate_pose(&region, &ys, &scorer, &params, &mut substream(seed, 0)).unwrap();
    let (a, b, c) = (run(11), run(11), run(12));
    assert_eq!(a.belief.to_json(), b.belief.to_json());
    assert_eq!(a.pose, b.pose);
    assert_eq!(a.stats, b.stats);
    assert_ne!(a.pose, c.pose);
}

#[test]
fn more_measurements_help() {
    let mesh = fixtures::box_fixture();
    let noise = NoiseParams::default();
    let scorer = Scorer::new(&mesh, noise, None).unwrap();
    let region = UncertaintyRegion::uniform(Pose::identity(), 20.0, 0.3).unwrap();
    let params = ScalingSeriesParams {
        max_particles: 2000,
        ..ScalingSeriesParams::default()
    };
    let mean_error = |n: usize| {
        let mut total = 0.0;
        for seed in 0..6 {
            let mut rng = substream(seed, n as u64);
            let truth = region.sample_uniform(&mut rng);
            let ys = sample_surface_measurements(&mesh, &truth, n, &noise, &mut rng).unwrap();
            let est = estimate_pose(&region, &ys, &scorer, &params, &mut rng).unwrap();
            total += translation_distance(est.pose.translation(), truth.translation());
        }
        total / 6.0
    };
    let (few, many) = (mean_error(4), mean_error(40));
    assert!(many < few, "40 contacts: {many} mm, 4 contacts: {few} mm");
    assert!(many < 3.0, "40 contacts: {many} mm");
}

#[test]
fn estimate_stays_in_region() {
    let mesh = fixtures::chair_back();
    let region = UncertaintyRegion::uniform(Pose::from_translation(Vec3::new(5.0, 0.0, 0.0)), 5.0, 0.1).unwrap();
    let truth = Pose::from_translation(Vec3::new(40.0, 0.0, 0.0));
    let ys = sample_surface_measurements(&mesh, &truth, 10, &NoiseParams::default(), &mut substream(8, 0)).unwrap();
    let scorer = Scorer::new(&mesh, NoiseParams::default(), None).unwrap();
    let params = ScalingSeriesParams {
        max_particles: 500,
        ..ScalingSeriesParams::default()
    };
    let est = estimate_pose(&region, &ys, &scorer, &params, &mut substream(8, 1)).unwrap();
    assert!(est.belief.particles().iter().all(|p| region.contains(&p.pose)));
}
