//! Synthetic data: surface-sampled contacts, ray-cast contacts in cluttered
//! scenes, planted outliers and the shipped fixture meshes.

pub mod fixtures;
mod raycast;

pub use raycast::{
    generate_cluttered_measurements, ray_triangle, raycast, ApproachDistribution, LabeledMeasurement, Ray, RayHit,
    Scene, SceneObject,
};

use nalgebra::{SymmetricEigen, UnitQuaternion, Vector6};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Pose, UnitVec3, Vec3};
use crate::measurement::{Measurement, NoiseParams, Scorer};

/// Uniform point on a triangle from two uniform numbers.
fn point_in_triangle<R: Rng + ?Sized>(a: &Vec3, b: &Vec3, c: &Vec3, rng: &mut R) -> Vec3 {
    let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    a + (b - a) * u + (c - a) * v
}

/// Any unit vector orthogonal to `n`.
pub(crate) fn perpendicular(n: &UnitVec3) -> Vec3 {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    n.cross(&helper).normalize()
}

/// Adds isotropic Gaussian position noise (per axis) and tilts the normal
/// about a uniformly random perpendicular axis by `|N(0, sigma_nor)|`.
/// Zero sigmas leave the corresponding component untouched.
pub fn perturb<R: Rng + ?Sized>(y: &Measurement, noise: &NoiseParams, rng: &mut R) -> Measurement {
    let mut out = *y;
    if noise.sigma_pos > 0.0 {
        let g = Normal::new(0.0, noise.sigma_pos).expect("finite sigma");
        out.position += Vec3::new(g.sample(rng), g.sample(rng), g.sample(rng));
    }
    if noise.sigma_nor > 0.0 {
        let e1 = perpendicular(&y.normal);
        let e2 = y.normal.cross(&e1);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let axis = e1 * phi.cos() + e2 * phi.sin();
        let angle = Normal::new(0.0, noise.sigma_nor)
            .expect("finite sigma")
            .sample(rng)
            .abs();
        let tilt = UnitQuaternion::from_scaled_axis(axis * angle);
        out.normal = UnitVec3::new_normalize((tilt * y.normal).into_inner());
    }
    out
}

/// Draws `n` contacts: faces by area, points uniform within the face, the
/// face normal as contact normal, then noise, then the ground-truth pose.
pub fn sample_surface_measurements<R: Rng + ?Sized>(
    mesh: &Mesh,
    pose: &Pose,
    n: usize,
    noise: &NoiseParams,
    rng: &mut R,
) -> Result<Vec<Measurement>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one measurement".into()));
    }
    let areas: Vec<f64> = mesh.triangles().iter().map(|t| t.area()).collect();
    let pick = WeightedIndex::new(&areas).map_err(|e| Error::Validation(e.to_string()))?;
    Ok((0..n)
        .map(|_| {
            let f = pick.sample(rng);
            let t = &mesh.triangles()[f];
            let local = Measurement::new(point_in_triangle(&t.a, &t.b, &t.c, rng), mesh.faces()[f].normal);
            perturb(&local, noise, rng).transformed(pose)
        })
        .collect())
}

/// Smallest eigenvalue of the normalized 6x6 point-to-plane information
/// matrix. Zero means some rigid motion leaves every contact on its plane
/// (the set does not constrain the pose); larger is better conditioned.
///
/// Rows are `[n, ((p - c) x n) / L]` with `c` the contact centroid and `L`
/// the RMS contact radius, so the value is scale free and at most 1.
pub fn constraint_strength(ys: &[Measurement]) -> f64 {
    if ys.len() < 6 {
        return 0.0;
    }
    let c = ys.iter().map(|y| y.position).sum::<Vec3>() / ys.len() as f64;
    let l = (ys.iter().map(|y| (y.position - c).norm_squared()).sum::<f64>() / ys.len() as f64).sqrt();
    if l == 0.0 {
        return 0.0;
    }
    let mut info = nalgebra::Matrix6::<f64>::zeros();
    for y in ys {
        let n = y.normal.into_inner();
        let m = (y.position - c).cross(&n) / l;
        let row = Vector6::new(n.x, n.y, n.z, m.x, m.y, m.z);
        info += row * row.transpose();
    }
    info /= ys.len() as f64;
    SymmetricEigen::new(info).eigenvalues.min()
}

/// Resamples surface measurements until [`constraint_strength`] reaches
/// `min_strength` (at most `max_draws` attempts, then the best set seen).
pub fn sample_constraining_measurements<R: Rng + ?Sized>(
    mesh: &Mesh,
    pose: &Pose,
    n: usize,
    noise: &NoiseParams,
    min_strength: f64,
    max_draws: usize,
    rng: &mut R,
) -> Result<Vec<Measurement>> {
    let mut best: Option<(f64, Vec<Measurement>)> = None;
    for _ in 0..max_draws.max(1) {
        let ys = sample_surface_measurements(mesh, pose, n, noise, rng)?;
        let s = constraint_strength(&ys);
        if s >= min_strength {
            return Ok(ys);
        }
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, ys));
        }
    }
    Ok(best.expect("at least one draw").1)
}

/// Random contacts around the object whose object distance at the true
/// pose is at least `min_distance` (in combined-sigma units).
pub fn planted_outliers<R: Rng + ?Sized>(
    mesh: &Mesh,
    pose: &Pose,
    count: usize,
    noise: &NoiseParams,
    min_distance: f64,
    margin: f64,
    rng: &mut R,
) -> Result<Vec<Measurement>> {
    let scorer = Scorer::new(mesh, *noise, None)?;
    let (lo, hi) = mesh.bounds();
    let (lo, hi) = (lo.add_scalar(-margin), hi.add_scalar(margin));
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 10_000 * count.max(1) {
            return Err(Error::InvalidParameter(format!(
                "could not place outliers {min_distance} sigma away within a {margin} mm margin"
            )));
        }
        let local = Vec3::new(
            rng.random_range(lo.x..=hi.x),
            rng.random_range(lo.y..=hi.y),
            rng.random_range(lo.z..=hi.z),
        );
        let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
        let m = Measurement::new(
            pose.transform_point(&local),
            UnitVec3::new_normalize(Vec3::new(x, y, z)),
        );
        if scorer.object_distance(&m, pose).distance() >= min_distance {
            out.push(m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between;
    use crate::substream;

    #[test]
    fn noiseless_samples_lie_on_posed_mesh() {
        let mesh = fixtures::register();
        let pose = Pose::from_axis_angle(Vec3::new(0.2, -0.1, 0.4), Vec3::new(10.0, -5.0, 3.0));
        let zero = NoiseParams {
            sigma_pos: 0.0,
            sigma_nor: 0.0,
        };
        let mut rng = substream(1, 0);
        let ys = sample_surface_measurements(&mesh, &pose, 200, &zero, &mut rng).unwrap();
        let scorer = Scorer::new(&mesh, NoiseParams::default(), None).unwrap();
        for y in &ys {
            assert!(scorer.object_distance(y, &pose).distance() < 1e-6);
        }
    }

    #[test]
    fn perturbed_normal_angle_matches_draw() {
        let n = UnitVec3::new_normalize(Vec3::new(0.3, -0.2, 0.9));
        let y = Measurement::new(Vec3::zeros(), n);
        let noise = NoiseParams::new(1.0, 0.09).unwrap();
        let mut rng = substream(2, 0);
        let mut sum_sq = 0.0;
        let k = 20_000;
        for _ in 0..k {
            let a = angle_between(&perturb(&y, &noise, &mut rng).normal, &n);
            sum_sq += a * a;
        }
        // E[angle^2] = sigma^2 for |N(0, sigma)|
        let rms = (sum_sq / k as f64).sqrt();
        assert!((rms - 0.09).abs() < 0.003, "rms {rms}");
    }

    #[test]
    fn seeded_sampling_is_repeatable() {
        let mesh = fixtures::box_fixture();
        let draw = || {
            let mut rng = substream(5, 1);
            sample_surface_measurements(&mesh, &Pose::identity(), 30, &NoiseParams::default(), &mut rng).unwrap()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn coplanar_contacts_do_not_constrain() {
        let n = UnitVec3::new_normalize(Vec3::z());
        let ys: Vec<_> = (0..10)
            .map(|i| Measurement::new(Vec3::new(i as f64, (i * i) as f64 % 7.0, 0.0), n))
            .collect();
        assert!(constraint_strength(&ys) < 1e-12);
    }

    #[test]
    fn planted_outliers_are_far() {
        let mesh = fixtures::box_fixture();
        let pose = Pose::identity();
        let mut rng = substream(3, 0);
        let noise = NoiseParams::default();
        let out = planted_outliers(&mesh, &pose, 5, &noise, 10.0, 60.0, &mut rng).unwrap();
        let scorer = Scorer::new(&mesh, noise, None).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|y| scorer.object_distance(y, &pose).distance() >= 10.0));
    }
}
