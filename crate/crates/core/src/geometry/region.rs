use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Pose, Vec3};
use crate::error::{Error, Result};

/// Axis-wise bounds around a prior pose.
///
/// A pose belongs to the region when its translation lies in
/// `center.t ± translation_half` (world axes) and its rotation equals
/// `center.R · Rx(a) · Ry(b) · Rz(c)` with each angle inside
/// `± rotation_half`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRegion {
    pub center: Pose,
    pub translation_half: [f64; 3],
    pub rotation_half: [f64; 3],
}

fn rxyz(angles: &Vec3) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), angles.x)
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), angles.y)
        * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angles.z)
}

/// Inverse of [`rxyz`]: angles `(a, b, c)` with `R = Rx(a) Ry(b) Rz(c)`.
fn xyz_angles(q: &UnitQuaternion<f64>) -> Vec3 {
    let m = q.to_rotation_matrix();
    let m = m.matrix();
    let b = m[(0, 2)].clamp(-1.0, 1.0).asin();
    let a = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let c = (-m[(0, 1)]).atan2(m[(0, 0)]);
    Vec3::new(a, b, c)
}

impl UncertaintyRegion {
    pub fn new(center: Pose, translation_half: [f64; 3], rotation_half: [f64; 3]) -> Result<Self> {
        let region = Self {
            center,
            translation_half,
            rotation_half,
        };
        region.validate()?;
        Ok(region)
    }

    /// Same extent on every axis.
    pub fn uniform(center: Pose, translation_half: f64, rotation_half: f64) -> Result<Self> {
        Self::new(center, [translation_half; 3], [rotation_half; 3])
    }

    pub fn validate(&self) -> Result<()> {
        let ok_t = self.translation_half.iter().all(|h| h.is_finite() && *h >= 0.0);
        let ok_r = self
            .rotation_half
            .iter()
            .all(|h| h.is_finite() && (0.0..=PI).contains(h));
        if ok_t && ok_r {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "region half-extents out of range: t={:?} r={:?}",
                self.translation_half, self.rotation_half
            )))
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.translation_half
            .iter()
            .chain(&self.rotation_half)
            .all(|h| *h == 0.0)
    }

    pub fn max_translation_half(&self) -> f64 {
        self.translation_half.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_rotation_half(&self) -> f64 {
        self.rotation_half.iter().cloned().fold(0.0, f64::max)
    }

    /// Draws a pose with independent uniform translation offsets and
    /// independent uniform Euler perturbations.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Pose {
        let mut draw = |h: f64| if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 };
        let dt = Vec3::new(
            draw(self.translation_half[0]),
            draw(self.translation_half[1]),
            draw(self.translation_half[2]),
        );
        let dr = Vec3::new(
            draw(self.rotation_half[0]),
            draw(self.rotation_half[1]),
            draw(self.rotation_half[2]),
        );
        if dt == Vec3::zeros() && dr == Vec3::zeros() {
            return self.center;
        }
        Pose::new(self.center.rotation() * rxyz(&dr), self.center.translation() + dt)
    }

    /// Offsets of `pose` from the center: `(translation, xyz-angles)`.
    pub fn offsets(&self, pose: &Pose) -> (Vec3, Vec3) {
        let dt = pose.translation() - self.center.translation();
        let rel = self.center.rotation().inverse() * pose.rotation();
        (dt, xyz_angles(&rel))
    }

    pub fn contains(&self, pose: &Pose) -> bool {
        let (dt, dr) = self.offsets(pose);
        (0..3).all(|i| dt[i].abs() <= self.translation_half[i] && dr[i].abs() <= self.rotation_half[i])
    }

    /// Nearest pose inside the region in the offset coordinates.
    pub fn clamp(&self, pose: &Pose) -> Pose {
        let (dt, dr) = self.offsets(pose);
        let mut out_t = dt;
        let mut out_r = dr;
        let mut inside = true;
        for i in 0..3 {
            let (th, rh) = (self.translation_half[i], self.rotation_half[i]);
            if dt[i].abs() > th {
                out_t[i] = dt[i].clamp(-th, th);
                inside = false;
            }
            if dr[i].abs() > rh {
                out_r[i] = dr[i].clamp(-rh, rh);
                inside = false;
            }
        }
        if inside {
            return *pose;
        }
        Pose::new(self.center.rotation() * rxyz(&out_r), self.center.translation() + out_t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let angles = Vec3::new(
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
            );
            let back = xyz_angles(&rxyz(&angles));
            assert!((back - angles).norm() < 1e-9, "{angles:?} -> {back:?}");
        }
    }

    #[test]
    fn degenerate_region_returns_center() {
        let center = Pose::from_axis_angle(Vec3::new(0.1, 0.0, 0.0), Vec3::new(1.0, 2.0, 3.0));
        let region = UncertaintyRegion::uniform(center, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(region.sample_uniform(&mut rng), center);
        assert!(region.is_degenerate());
    }

    #[test]
    fn samples_stay_inside() {
        let center = Pose::from_axis_angle(Vec3::new(0.0, 0.4, 0.0), Vec3::new(10.0, 0.0, 0.0));
        let region = UncertaintyRegion::new(center, [50.0, 20.0, 5.0], [0.5, 0.3, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            assert!(region.contains(&region.sample_uniform(&mut rng)));
        }
    }

    #[test]
    fn clamp_projects_outside_poses() {
        let region = UncertaintyRegion::uniform(Pose::identity(), 1.0, 0.1).unwrap();
        let far = Pose::from_axis_angle(Vec3::new(0.5, 0.0, 0.0), Vec3::new(5.0, 0.0, -0.5));
        let c = region.clamp(&far);
        assert!(region.contains(&c));
        let (dt, dr) = region.offsets(&c);
        assert!((dt - Vec3::new(1.0, 0.0, -0.5)).norm() < 1e-12);
        assert!((dr.x - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_extents() {
        assert!(UncertaintyRegion::uniform(Pose::identity(), -1.0, 0.1).is_err());
        assert!(UncertaintyRegion::uniform(Pose::identity(), 1.0, 4.0).is_err());
    }
}
