use nalgebra::{Matrix4, Quaternion, SymmetricEigen, UnitQuaternion, Vector4};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{UnitVec3, Vec3};
use crate::error::{Error, Result};

/// Rigid transform taking object coordinates to world coordinates:
/// `p_world = R * p_object + t`.
///
/// The quaternion is kept in the `w >= 0` hemisphere so that equal
/// rotations serialize identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self {
            rotation: canonical(rotation),
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(UnitQuaternion::identity(), t)
    }

    /// Rotation given as an axis-angle vector (direction = axis, norm = angle).
    pub fn from_axis_angle(axis_angle: Vec3, translation: Vec3) -> Self {
        Self::new(UnitQuaternion::from_scaled_axis(axis_angle), translation)
    }

    /// Builds from raw `[w, x, y, z]`, normalizing; fails on a zero or
    /// non-finite quaternion.
    pub fn from_wxyz(q: [f64; 4], t: [f64; 3]) -> Result<Self> {
        let raw = Quaternion::new(q[0], q[1], q[2], q[3]);
        let n = raw.norm();
        if !n.is_finite() || n < 1e-12 || !t.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid pose q={q:?} t={t:?}")));
        }
        Ok(Self::new(
            UnitQuaternion::new_normalize(raw),
            Vec3::new(t[0], t[1], t[2]),
        ))
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Axis-angle vector of the rotation.
    pub fn scaled_axis(&self) -> Vec3 {
        self.rotation.scaled_axis()
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_direction(&self, n: &UnitVec3) -> UnitVec3 {
        self.rotation * n
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self::new(inv, -(inv * self.translation))
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            q: [f64; 4],
            t: [f64; 3],
        }
        Wire {
            q: self.wxyz(),
            t: self.translation.into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            q: [f64; 4],
            t: [f64; 3],
        }
        let w = Wire::deserialize(d)?;
        Pose::from_wxyz(w.q, w.t).map_err(serde::de::Error::custom)
    }
}

/// Geodesic angle between two rotations, `2 acos |<q1, q2>|`.
pub fn rotation_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let dot = a.coords.dot(&b.coords).abs();
    if dot < 0.9 {
        2.0 * dot.min(1.0).acos()
    } else {
        // acos is ill-conditioned near 1; use the norm of the difference
        // of sign-aligned quaternions instead: |q1 - q2| = 2 sin(theta / 4)
        let sign = if a.coords.dot(&b.coords) < 0.0 { -1.0 } else { 1.0 };
        let chord = (a.coords - b.coords * sign).norm();
        4.0 * (0.5 * chord).min(1.0).asin()
    }
}

pub fn translation_distance(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm()
}

/// Weighted mean pose: arithmetic mean of translations and the principal
/// eigenvector of `sum w q q^T` for the rotation.
pub fn pose_mean(poses: &[Pose], weights: &[f64]) -> Result<Pose> {
    if poses.is_empty() {
        return Err(Error::Empty("pose list"));
    }
    if poses.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "{} poses but {} weights",
            poses.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParameter("weights must be finite and >= 0".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter("weights sum to zero".into()));
    }

    let mut t = Vec3::zeros();
    let mut m = Matrix4::<f64>::zeros();
    for (p, &w) in poses.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let w = w / total;
        t += p.translation * w;
        let q = p.rotation.coords;
        m += q * q.transpose() * w;
    }

    let eig = SymmetricEigen::new(m);
    let k = eig.eigenvalues.imax();
    let mut v: Vector4<f64> = eig.eigenvectors.column(k).into_owned();
    if v.dot(&poses[0].rotation.coords) < 0.0 {
        v = -v;
    }
    // coords are stored (i, j, k, w)
    let q = UnitQuaternion::new_normalize(Quaternion::from(v));
    Ok(Pose::new(q, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn quarter_turn_about_z() {
        let pose = Pose::from_axis_angle(Vec3::new(0.0, 0.0, FRAC_PI_2), Vec3::zeros());
        let p = pose.transform_point(&Vec3::new(1.0, 0.0, 0.0));
        assert!((p - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn canonical_sign_and_json_shape() {
        let q = UnitQuaternion::new_normalize(Quaternion::new(-0.5, 0.5, 0.5, 0.5));
        let pose = Pose::new(q, Vec3::new(1.0, 2.0, 3.0));
        assert!(pose.wxyz()[0] >= 0.0);
        let json = serde_json::to_string(&pose).unwrap();
        assert_eq!(json, r#"{"q":[0.5,-0.5,-0.5,-0.5],"t":[1.0,2.0,3.0]}"#);
        let back: Pose = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pose);
    }

    #[test]
    fn rejects_zero_quaternion() {
        assert!(serde_json::from_str::<Pose>(r#"{"q":[0,0,0,0],"t":[0,0,0]}"#).is_err());
    }

    #[test]
    fn inverse_composes_to_identity() {
        let p = Pose::from_axis_angle(Vec3::new(0.3, -0.2, 0.9), Vec3::new(4.0, 5.0, -6.0));
        let id = p.compose(&p.inverse());
        assert!(rotation_distance(id.rotation(), &UnitQuaternion::identity()) < 1e-12);
        assert!(id.translation().norm() < 1e-12);
    }

    #[test]
    fn rotation_distance_of_known_angle() {
        let a = UnitQuaternion::identity();
        let b = UnitQuaternion::from_scaled_axis(Vec3::new(0.0, 0.3, 0.0));
        assert!((rotation_distance(&a, &b) - 0.3).abs() < 1e-12);
        assert_eq!(rotation_distance(&a, &a), 0.0);
        let flip = UnitQuaternion::new_unchecked(-b.into_inner());
        assert!((rotation_distance(&a, &flip) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn translation_distance_345() {
        assert_eq!(translation_distance(&Vec3::zeros(), &Vec3::new(3.0, 4.0, 0.0)), 5.0);
    }

    #[test]
    fn mean_of_single_and_identical() {
        let p = Pose::from_axis_angle(Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, 1.0, 1.0));
        let m = pose_mean(&[p], &[1.0]).unwrap();
        assert!(rotation_distance(m.rotation(), p.rotation()) < 1e-12);
        assert!((m.translation() - p.translation()).norm() < 1e-12);

        let m = pose_mean(&[p, p], &[0.2, 5.0]).unwrap();
        assert!(rotation_distance(m.rotation(), p.rotation()) < 1e-12);
        assert!((m.translation() - p.translation()).norm() < 1e-12);
    }

    #[test]
    fn mean_rejects_bad_weights() {
        let p = Pose::identity();
        assert!(matches!(pose_mean(&[], &[]), Err(Error::Empty(_))));
        assert!(pose_mean(&[p, p], &[0.0, 0.0]).is_err());
        assert!(pose_mean(&[p], &[-1.0]).is_err());
    }

    #[test]
    fn mean_is_sign_invariant() {
        let a = UnitQuaternion::from_scaled_axis(Vec3::new(0.0, 0.0, 0.2));
        let b = UnitQuaternion::from_scaled_axis(Vec3::new(0.0, 0.0, 0.4));
        let b_neg = UnitQuaternion::new_unchecked(-b.into_inner());
        let poses = [
            Pose {
                rotation: a,
                translation: Vec3::zeros(),
            },
            Pose {
                rotation: b_neg,
                translation: Vec3::zeros(),
            },
        ];
        let m = pose_mean(&poses, &[1.0, 1.0]).unwrap();
        let expected = UnitQuaternion::from_scaled_axis(Vec3::new(0.0, 0.0, 0.3));
        assert!(rotation_distance(m.rotation(), &expected) < 1e-9);
    }
}
