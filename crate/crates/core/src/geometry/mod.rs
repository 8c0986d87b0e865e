//! Mesh, rigid transforms and the metric primitives used by every other
//! module. Units are millimetres and radians throughout.

mod io;
mod mesh;
mod pose;
mod region;

pub use io::{load_mesh, parse_obj, parse_stl_ascii, write_obj, MeshFormat};
pub use mesh::{Face, Mesh, Triangle};
pub use pose::{pose_mean, rotation_distance, translation_distance, Pose};
pub use region::UncertaintyRegion;

use nalgebra::{Unit, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;

/// Builds a unit vector, failing on zero-length or non-finite input.
pub fn unit(x: f64, y: f64, z: f64) -> Result<UnitVec3> {
    let v = Vec3::new(x, y, z);
    let n = v.norm();
    if !n.is_finite() || n == 0.0 {
        return Err(Error::InvalidParameter(format!("cannot normalize ({x}, {y}, {z})")));
    }
    Ok(Unit::new_unchecked(v / n))
}

/// Angle in `[0, pi]` between two unit vectors.
///
/// `acos` loses precision when the vectors are nearly parallel or
/// antiparallel, so that band switches to the cross-product form.
#[inline]
pub fn angle_between(a: &UnitVec3, b: &UnitVec3) -> f64 {
    let dot = a.dot(b).clamp(-1.0, 1.0);
    if dot.abs() < 0.9 {
        dot.acos()
    } else {
        let s = a.cross(b).norm().min(1.0).asin();
        if dot > 0.0 {
            s
        } else {
            std::f64::consts::PI - s
        }
    }
}

/// Exact Euclidean distance from `p` to the closed triangle `abc`.
pub fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Result<f64> {
    let tri = Triangle::new(*a, *b, *c);
    if tri.is_degenerate() {
        return Err(Error::DegenerateTriangle);
    }
    Ok(tri.distance_squared(p).sqrt())
}

/// Uniform draw from an uncertainty region; see [`UncertaintyRegion::sample_uniform`].
pub fn sample_pose_uniform<R: rand::Rng + ?Sized>(region: &UncertaintyRegion, rng: &mut R) -> Pose {
    region.sample_uniform(rng)
}

pub(crate) use mesh::to_hex as mesh_hex;
