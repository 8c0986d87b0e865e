use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use super::perturb;
use crate::error::{Error, Result};
use crate::geometry::{load_mesh, Mesh, Pose, Triangle, UnitVec3, Vec3};
use crate::measurement::{Measurement, MeasurementRecord, NoiseParams};

/// Hits closer than this along the ray are ignored.
const T_MIN: f64 = 1e-9;
/// Barycentric slack; shared edges hit both neighbours, the id order decides.
const BARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: UnitVec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: UnitVec3) -> Self {
        Self { origin, direction }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction.into_inner() * t
    }
}

/// Watertight ray/triangle test (shear into ray space, signed edge
/// functions). Returns `(t, [b0, b1, b2])` with barycentrics for `a, b, c`.
pub fn ray_triangle(ray: &Ray, tri: &Triangle) -> Option<(f64, [f64; 3])> {
    let d = ray.direction.into_inner();
    let kz = d.iamax();
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if d[kz] < 0.0 {
        std::mem::swap(&mut kx, &mut ky);
    }
    let sx = d[kx] / d[kz];
    let sy = d[ky] / d[kz];
    let sz = 1.0 / d[kz];

    let a = tri.a - ray.origin;
    let b = tri.b - ray.origin;
    let c = tri.c - ray.origin;
    let (ax, ay) = (a[kx] - sx * a[kz], a[ky] - sy * a[kz]);
    let (bx, by) = (b[kx] - sx * b[kz], b[ky] - sy * b[kz]);
    let (cx, cy) = (c[kx] - sx * c[kz], c[ky] - sy * c[kz]);

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    let det = u + v + w;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let bary = [u / det, v / det, w / det];
    if bary.iter().any(|&x| x < -BARY_EPS) {
        return None;
    }
    let t = (u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz]) / det;
    if t < T_MIN {
        return None;
    }
    Some((t, bary))
}

#[derive(Debug, Clone)]
pub struct SceneObject {
    pub label: String,
    pub mesh: Arc<Mesh>,
    pub pose: Pose,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub point: Vec3,
    /// Outward normal of the struck face, world frame.
    pub normal: UnitVec3,
    pub object: usize,
    pub face: usize,
    pub label: String,
}

#[derive(Deserialize)]
struct SceneFile {
    objects: Vec<SceneFileObject>,
    target: String,
}

#[derive(Deserialize)]
struct SceneFileObject {
    mesh: PathBuf,
    pose: Pose,
    label: String,
}

impl Scene {
    pub fn new(objects: Vec<SceneObject>, target: impl Into<String>) -> Result<Self> {
        let scene = Self {
            objects,
            target: target.into(),
        };
        let n = scene.objects.iter().filter(|o| o.label == scene.target).count();
        if n != 1 {
            return Err(Error::InvalidParameter(format!(
                "scene needs exactly one object labelled {:?}, found {n}",
                scene.target
            )));
        }
        Ok(scene)
    }

    /// Loads `{objects: [{mesh, pose, label}], target}`; mesh paths are
    /// relative to the scene file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file: SceneFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let objects = file
            .objects
            .into_iter()
            .map(|o| {
                Ok(SceneObject {
                    label: o.label,
                    mesh: Arc::new(load_mesh(base.join(&o.mesh), None)?),
                    pose: o.pose,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(objects, file.target)
    }

    pub fn target(&self) -> &SceneObject {
        self.objects
            .iter()
            .find(|o| o.label == self.target)
            .expect("validated at construction")
    }

    pub fn target_mut(&mut self) -> &mut SceneObject {
        let target = self.target.clone();
        self.objects
            .iter_mut()
            .find(|o| o.label == target)
            .expect("validated at construction")
    }
}

/// Nearest hit over every posed mesh in the scene. Equal distances keep the
/// lowest `(object, face)`.
pub fn raycast(scene: &Scene, ray: &Ray) -> Option<RayHit> {
    let mut best: Option<(f64, usize, usize, [f64; 3])> = None;
    for (oi, obj) in scene.objects.iter().enumerate() {
        let inv = obj.pose.inverse();
        let local = Ray::new(
            inv.transform_point(&ray.origin),
            inv.transform_direction(&ray.direction),
        );
        for (fi, tri) in obj.mesh.triangles().iter().enumerate() {
            if let Some((t, bary)) = ray_triangle(&local, tri) {
                if best.is_none_or(|(bt, ..)| t < bt - T_MIN) {
                    best = Some((t, oi, fi, bary));
                }
            }
        }
    }
    let (t, oi, fi, bary) = best?;
    let obj = &scene.objects[oi];
    let tri = &obj.mesh.triangles()[fi];
    let local_point = tri.a * bary[0] + tri.b * bary[1] + tri.c * bary[2];
    Some(RayHit {
        t,
        point: obj.pose.transform_point(&local_point),
        normal: obj.pose.transform_direction(&obj.mesh.faces()[fi].normal),
        object: oi,
        face: fi,
        label: obj.label.clone(),
    })
}

/// Where simulated approach rays come from and aim at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachDistribution {
    /// Nominal target position the approaches are planned against.
    pub center: [f64; 3],
    /// Distance of the ray origin from `center`.
    pub standoff: f64,
    /// Aim points are uniform in `center ± aim_half`.
    pub aim_half: [f64; 3],
    /// Minimum z component of the approach direction (origin above this
    /// elevation on the unit sphere around `center`).
    pub min_elevation: f64,
    /// Misses allowed per requested hit.
    pub retries_per_hit: usize,
    /// Planned approach sides, as directions from `center` towards the ray
    /// origin. Empty means uniform over the sphere.
    #[serde(default)]
    pub axes: Vec<[f64; 3]>,
    /// With planned sides, the origin direction is tilted off the chosen
    /// axis by an angle uniform in `[0, axis_jitter]`.
    #[serde(default)]
    pub axis_jitter: f64,
}

impl ApproachDistribution {
    /// Uniformly random directions over the whole sphere.
    pub fn uniform(center: [f64; 3], standoff: f64, aim_half: [f64; 3]) -> Self {
        Self {
            center,
            standoff,
            aim_half,
            min_elevation: -1.0,
            retries_per_hit: 20,
            axes: Vec::new(),
            axis_jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.standoff > 0.0) {
            return bad(format!("standoff must be > 0, got {}", self.standoff));
        }
        if !(self.min_elevation <= 1.0) {
            return bad(format!("min_elevation must be <= 1, got {}", self.min_elevation));
        }
        if self.aim_half.iter().any(|h| !(*h >= 0.0)) || !(self.axis_jitter >= 0.0) {
            return bad("aim half-widths and axis jitter must be >= 0".into());
        }
        if self.axes.iter().any(|a| !(Vec3::from(*a).norm() > 0.0)) {
            return bad("approach axes must be non-zero".into());
        }
        // every axis must be able to produce a direction above min_elevation
        for a in &self.axes {
            let z = Vec3::from(*a).normalize().z;
            let best = (z.clamp(-1.0, 1.0).acos() - self.axis_jitter).max(0.0).cos();
            if best < self.min_elevation {
                return bad(format!(
                    "approach axis {a:?} never reaches elevation {}",
                    self.min_elevation
                ));
            }
        }
        Ok(())
    }

    fn direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        if self.axes.is_empty() {
            let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
            return Vec3::new(x, y, z);
        }
        let axis = UnitVec3::new_normalize(Vec3::from(self.axes[rng.random_range(0..self.axes.len())]));
        let e1 = super::perpendicular(&axis);
        let e2 = axis.cross(&e1);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let tilt: f64 = rng.random_range(0.0..=self.axis_jitter);
        axis.into_inner() * tilt.cos() + (e1 * phi.cos() + e2 * phi.sin()) * tilt.sin()
    }

    fn sample_ray<R: Rng + ?Sized>(&self, rng: &mut R) -> Ray {
        let u = loop {
            let u = self.direction(rng);
            if u.z >= self.min_elevation {
                break u;
            }
        };
        let center = Vec3::from(self.center);
        let origin = center + u * self.standoff;
        let mut aim = center;
        for i in 0..3 {
            if self.aim_half[i] > 0.0 {
                aim[i] += rng.random_range(-self.aim_half[i]..=self.aim_half[i]);
            }
        }
        Ray::new(origin, UnitVec3::new_normalize(aim - origin))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMeasurement {
    pub measurement: Measurement,
    pub label: String,
    pub is_outlier: bool,
}

#[derive(Serialize, Deserialize)]
struct LabeledRecord {
    p: [f64; 3],
    n: [f64; 3],
    label: String,
    outlier: bool,
}

impl Serialize for LabeledMeasurement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let MeasurementRecord { p, n } = MeasurementRecord::from(&self.measurement);
        LabeledRecord {
            p,
            n,
            label: self.label.clone(),
            outlier: self.is_outlier,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledMeasurement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = LabeledRecord::deserialize(d)?;
        let measurement =
            Measurement::try_from(MeasurementRecord { p: r.p, n: r.n }).map_err(serde::de::Error::custom)?;
        Ok(Self {
            measurement,
            label: r.label,
            is_outlier: r.outlier,
        })
    }
}

/// Simulated approach contacts: each approach ray records its first hit,
/// noise is added as for surface samples, and hits on anything but the
/// target are flagged as outliers. Misses are retried.
pub fn generate_cluttered_measurements<R: Rng + ?Sized>(
    scene: &Scene,
    n: usize,
    approach: &ApproachDistribution,
    noise: &NoiseParams,
    rng: &mut R,
) -> Result<Vec<LabeledMeasurement>> {
    approach.validate()?;
    let budget = n * (approach.retries_per_hit + 1);
    let mut out = Vec::with_capacity(n);
    for _ in 0..budget {
        if out.len() == n {
            break;
        }
        let ray = approach.sample_ray(rng);
        if let Some(hit) = raycast(scene, &ray) {
            let exact = Measurement::new(hit.point, hit.normal);
            out.push(LabeledMeasurement {
                measurement: perturb(&exact, noise, rng),
                is_outlier: hit.label != scene.target,
                label: hit.label,
            });
        }
    }
    if out.len() < n {
        return Err(Error::RetryBudget {
            hits: out.len(),
            wanted: n,
        });
    }
    Ok(out)
}
