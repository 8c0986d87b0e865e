//! Proximity measurement model.
//!
//! A contact measurement is scored against a face by the combined
//! position/normal distance
//!
//! ```text
//! d(y, F_i)^2 = dist(y_pos, F_i)^2 / sigma_pos^2 + angle(y_nor, n_i)^2 / sigma_nor^2
//! ```
//!
//! against the object by the minimum over faces, and a whole set by the sum
//! of squared object distances `u`. The log-likelihood is `-u / 2` (the
//! normalizer is dropped).
//!
//! Distances are evaluated in the object frame: the measurement is mapped
//! through the inverse pose once instead of transforming every face.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::face_index::AngleIndex;
use crate::geometry::{angle_between, unit, Mesh, Pose, UnitVec3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub position: Vec3,
    pub normal: UnitVec3,
}

impl Measurement {
    pub fn new(position: Vec3, normal: UnitVec3) -> Self {
        Self { position, normal }
    }

    /// Applies a rigid transform to both components.
    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            position: pose.transform_point(&self.position),
            normal: pose.transform_direction(&self.normal),
        }
    }
}

/// One line of a measurement file: `{"p": [x, y, z], "n": [nx, ny, nz]}`.
/// Extra fields (labels written by the simulator) are ignored.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct MeasurementRecord {
    pub p: [f64; 3],
    pub n: [f64; 3],
}

impl From<&Measurement> for MeasurementRecord {
    fn from(m: &Measurement) -> Self {
        Self {
            p: m.position.into(),
            n: [m.normal.x, m.normal.y, m.normal.z],
        }
    }
}

impl TryFrom<MeasurementRecord> for Measurement {
    type Error = Error;

    fn try_from(r: MeasurementRecord) -> Result<Self> {
        if !r.p.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite position {:?}", r.p)));
        }
        let n = Vec3::from(r.n);
        if (n.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!("normal {:?} is not unit length", r.n)));
        }
        Ok(Self::new(Vec3::from(r.p), unit(n.x, n.y, n.z)?))
    }
}

impl Serialize for Measurement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasurementRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Measurement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MeasurementRecord::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

/// Reads JSON-lines (`{"p":..,"n":..}` per line) or, for `.csv` files, six
/// comma-separated columns `px,py,pz,nx,ny,nz` with an optional header.
pub fn read_measurements(path: impl AsRef<Path>) -> Result<Vec<Measurement>> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed = if csv {
            parse_csv_line(trimmed, n + 1)?
        } else {
            Some(
                serde_json::from_str::<MeasurementRecord>(trimmed).map_err(|e| Error::Parse {
                    line: n + 1,
                    msg: e.to_string(),
                })?,
            )
        };
        let Some(rec) = parsed else { continue };
        out.push(rec.try_into().map_err(|e: Error| Error::Parse {
            line: n + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

fn parse_csv_line(line: &str, line_no: usize) -> Result<Option<MeasurementRecord>> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    if cols.len() != 6 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected 6 columns, found {}", cols.len()),
        });
    }
    let vals: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
    match vals {
        Ok(v) => Ok(Some(MeasurementRecord {
            p: [v[0], v[1], v[2]],
            n: [v[3], v[4], v[5]],
        })),
        // a non-numeric first line is a header
        Err(_) if line_no == 1 => Ok(None),
        Err(e) => Err(Error::Parse {
            line: line_no,
            msg: e.to_string(),
        }),
    }
}

pub fn write_measurements_jsonl<W: Write>(mut w: W, ys: &[Measurement]) -> Result<()> {
    for y in ys {
        serde_json::to_writer(&mut w, y)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma_pos: f64,
    pub sigma_nor: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            sigma_pos: 2.0,
            sigma_nor: 0.09,
        }
    }
}

impl NoiseParams {
    pub fn new(sigma_pos: f64, sigma_nor: f64) -> Result<Self> {
        let n = Self { sigma_pos, sigma_nor };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_pos > 0.0 && self.sigma_nor > 0.0 && self.sigma_pos.is_finite() && self.sigma_nor.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "noise sigmas must be > 0, got {self:?}"
            )))
        }
    }

    /// Both sigmas multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sigma_pos: self.sigma_pos * factor,
            sigma_nor: self.sigma_nor * factor,
        }
    }
}

/// Squared face distance for a measurement already in the object frame.
#[inline]
fn face_distance_sq(mesh: &Mesh, face: usize, p: &Vec3, n: &UnitVec3, inv_pos2: f64, inv_nor2: f64) -> f64 {
    let pos2 = mesh.triangles()[face].distance_squared(p);
    let ang = angle_between(n, &mesh.faces()[face].normal);
    pos2 * inv_pos2 + ang * ang * inv_nor2
}

/// Per-call result of the object-distance search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectDistance {
    /// Squared distance `d(y, O)^2`.
    pub distance_sq: f64,
    pub face: usize,
    /// Faces actually compared.
    pub faces_evaluated: usize,
}

impl ObjectDistance {
    pub fn distance(&self) -> f64 {
        self.distance_sq.sqrt()
    }
}

/// Mesh + noise + optional index, validated once and then evaluated many
/// times. Cheap to copy; safe to share across threads.
#[derive(Debug, Clone, Copy)]
pub struct Scorer<'a> {
    mesh: &'a Mesh,
    noise: NoiseParams,
    index: Option<(&'a AngleIndex, f64)>,
    inv_pos2: f64,
    inv_nor2: f64,
}

impl<'a> Scorer<'a> {
    /// `index` carries the dictionary and the window half-width `delta_alpha`.
    pub fn new(mesh: &'a Mesh, noise: NoiseParams, index: Option<(&'a AngleIndex, f64)>) -> Result<Self> {
        noise.validate()?;
        if let Some((idx, delta)) = index {
            idx.check_mesh(mesh)?;
            if !(delta >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "delta_alpha must be >= 0, got {delta}"
                )));
            }
        }
        Ok(Self {
            mesh,
            noise,
            index,
            inv_pos2: 1.0 / (noise.sigma_pos * noise.sigma_pos),
            inv_nor2: 1.0 / (noise.sigma_nor * noise.sigma_nor),
        })
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.mesh
    }

    pub fn noise(&self) -> NoiseParams {
        self.noise
    }

    pub fn index(&self) -> Option<(&'a AngleIndex, f64)> {
        self.index
    }

    /// Same mesh and index with different sigmas.
    pub fn with_noise(&self, noise: NoiseParams) -> Result<Self> {
        Self::new(self.mesh, noise, self.index)
    }

    /// Sigmas and index window all multiplied by `factor`, for annealing.
    pub fn tempered(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.mesh,
            self.noise.scaled(factor),
            self.index.map(|(idx, delta)| (idx, delta * factor)),
        )
    }

    /// Same mesh and sigmas, exhaustive face search.
    pub fn exhaustive(&self) -> Self {
        Self { index: None, ..*self }
    }

    /// Minimum over faces for a measurement expressed in the object frame.
    /// Ties go to the lowest face id.
    #[inline]
    pub fn object_distance_local(&self, p: &Vec3, n: &UnitVec3) -> ObjectDistance {
        let mut best = (f64::INFINITY, usize::MAX);
        let mut consider = |face: usize| {
            // the normal term only adds, so a face whose position term
            // already exceeds the best cannot win
            let pos = self.mesh.triangles()[face].distance_squared(p) * self.inv_pos2;
            if pos > best.0 {
                return;
            }
            let ang = angle_between(n, &self.mesh.faces()[face].normal);
            let d = pos + ang * ang * self.inv_nor2;
            if d < best.0 || (d == best.0 && face < best.1) {
                best = (d, face);
            }
        };
        let evaluated = match self.index {
            Some((idx, delta)) => {
                let entries = idx.candidate_entries(n, delta);
                for e in entries {
                    consider(e.face);
                }
                entries.len()
            }
            None => {
                for face in 0..self.mesh.face_count() {
                    consider(face);
                }
                self.mesh.face_count()
            }
        };
        ObjectDistance {
            distance_sq: best.0,
            face: best.1,
            faces_evaluated: evaluated,
        }
    }

    pub fn object_distance(&self, y: &Measurement, pose: &Pose) -> ObjectDistance {
        let frame = LocalFrame::new(pose);
        let (p, n) = frame.apply(y);
        self.object_distance_local(&p, &n)
    }

    /// `u(y, X) = sum_k d(y_k, O^X)^2`.
    pub fn total_error(&self, ys: &[Measurement], pose: &Pose) -> f64 {
        let frame = LocalFrame::new(pose);
        ys.iter()
            .map(|y| {
                let (p, n) = frame.apply(y);
                self.object_distance_local(&p, &n).distance_sq
            })
            .sum()
    }

    /// Like [`Scorer::total_error`] but also reports how many faces were compared.
    pub fn total_error_counted(&self, ys: &[Measurement], pose: &Pose) -> (f64, usize) {
        let frame = LocalFrame::new(pose);
        ys.iter().fold((0.0, 0), |(u, c), y| {
            let (p, n) = frame.apply(y);
            let od = self.object_distance_local(&p, &n);
            (u + od.distance_sq, c + od.faces_evaluated)
        })
    }

    pub fn log_likelihood(&self, ys: &[Measurement], pose: &Pose) -> f64 {
        -0.5 * self.total_error(ys, pose)
    }
}

/// Inverse pose as a matrix, for mapping world measurements into the object frame.
struct LocalFrame {
    rt: Matrix3<f64>,
    t: Vec3,
}

impl LocalFrame {
    #[inline]
    fn new(pose: &Pose) -> Self {
        Self {
            rt: pose.rotation().to_rotation_matrix().matrix().transpose(),
            t: *pose.translation(),
        }
    }

    #[inline]
    fn apply(&self, y: &Measurement) -> (Vec3, UnitVec3) {
        let p = self.rt * (y.position - self.t);
        let n = UnitVec3::new_unchecked(self.rt * y.normal.into_inner());
        (p, n)
    }
}

fn non_empty(ys: &[Measurement]) -> Result<()> {
    if ys.is_empty() {
        Err(Error::Empty("measurement set"))
    } else {
        Ok(())
    }
}

/// Distance between a measurement and face `face` of the mesh placed at `pose`.
pub fn face_distance(y: &Measurement, face: usize, mesh: &Mesh, pose: &Pose, noise: &NoiseParams) -> Result<f64> {
    mesh.face(face)?;
    noise.validate()?;
    let (p, n) = LocalFrame::new(pose).apply(y);
    let d2 = face_distance_sq(
        mesh,
        face,
        &p,
        &n,
        1.0 / (noise.sigma_pos * noise.sigma_pos),
        1.0 / (noise.sigma_nor * noise.sigma_nor),
    );
    Ok(d2.sqrt())
}

/// `(d(y, O^X), argmin face)`; with an index only the candidate faces are searched.
pub fn object_distance(
    y: &Measurement,
    mesh: &Mesh,
    pose: &Pose,
    noise: &NoiseParams,
    index: Option<(&AngleIndex, f64)>,
) -> Result<(f64, usize)> {
    let od = Scorer::new(mesh, *noise, index)?.object_distance(y, pose);
    Ok((od.distance(), od.face))
}

pub fn total_error(
    ys: &[Measurement],
    mesh: &Mesh,
    pose: &Pose,
    noise: &NoiseParams,
    index: Option<(&AngleIndex, f64)>,
) -> Result<f64> {
    non_empty(ys)?;
    Ok(Scorer::new(mesh, *noise, index)?.total_error(ys, pose))
}

/// Unnormalized `ln P(y | X) = -u / 2`.
pub fn log_likelihood(
    ys: &[Measurement],
    mesh: &Mesh,
    pose: &Pose,
    noise: &NoiseParams,
    index: Option<(&AngleIndex, f64)>,
) -> Result<f64> {
    Ok(-0.5 * total_error(ys, mesh, pose, noise, index)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face_index::EntropyConfig;
    use crate::simkit::fixtures;

    fn noise() -> NoiseParams {
        NoiseParams::new(2.0, 0.09).unwrap()
    }

    /// Center of face `f` with its normal, in the mesh frame.
    fn on_face(mesh: &Mesh, f: usize) -> Measurement {
        let t = &mesh.triangles()[f];
        Measurement::new((t.a + t.b + t.c) / 3.0, mesh.faces()[f].normal)
    }

    #[test]
    fn exact_contact_is_zero() {
        let mesh = fixtures::unit_box();
        let y = on_face(&mesh, 7);
        assert!(face_distance(&y, 7, &mesh, &Pose::identity(), &noise()).unwrap() < 1e-12);
        let (d, f) = object_distance(&y, &mesh, &Pose::identity(), &noise(), None).unwrap();
        assert!(d < 1e-12);
        assert_eq!(f, 7);
    }

    #[test]
    fn offset_along_normal_is_one_sigma() {
        let mesh = fixtures::box_fixture();
        let f = 3;
        let mut y = on_face(&mesh, f);
        y.position += y.normal.into_inner() * 2.0;
        let d = face_distance(&y, f, &mesh, &Pose::identity(), &noise()).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let (d, face) = object_distance(&y, &mesh, &Pose::identity(), &noise(), None).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert_eq!(face, f);
    }

    #[test]
    fn tilted_normal_is_one_sigma() {
        let mesh = fixtures::box_fixture();
        let f = 0;
        let mut y = on_face(&mesh, f);
        let n = y.normal.into_inner();
        let perp = n.cross(&Vec3::new(0.3, 0.5, 0.7)).normalize();
        let tilt = nalgebra::UnitQuaternion::from_scaled_axis(perp * 0.09);
        y.normal = tilt * y.normal;
        let d = face_distance(&y, f, &mesh, &Pose::identity(), &noise()).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_face_and_mismatched_index() {
        let mesh = fixtures::unit_box();
        let y = on_face(&mesh, 0);
        assert!(matches!(
            face_distance(&y, 12, &mesh, &Pose::identity(), &noise()),
            Err(Error::InvalidFaceId { .. })
        ));
        let other = fixtures::chair_back();
        let idx = AngleIndex::build_auto(&other, &EntropyConfig::default()).unwrap();
        assert!(matches!(
            object_distance(&y, &mesh, &Pose::identity(), &noise(), Some((&idx, 0.09))),
            Err(Error::IndexMismatch)
        ));
    }

    #[test]
    fn totals_and_likelihood() {
        let mesh = fixtures::box_fixture();
        let mut y = on_face(&mesh, 2);
        y.position += y.normal.into_inner() * 2.0;
        let exact = on_face(&mesh, 5);
        let pose = Pose::identity();
        assert!(total_error(&[exact], &mesh, &pose, &noise(), None).unwrap() < 1e-24);
        assert!(log_likelihood(&[exact], &mesh, &pose, &noise(), None).unwrap() > -1e-24);
        let u = total_error(&[y], &mesh, &pose, &noise(), None).unwrap();
        assert!((u - 1.0).abs() < 1e-12);
        let ll = log_likelihood(&[y, y], &mesh, &pose, &noise(), None).unwrap();
        assert!((ll + 1.0).abs() < 1e-12);
        assert!(matches!(
            total_error(&[], &mesh, &pose, &noise(), None),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseParams::new(0.0, 0.1).is_err());
        assert!(NoiseParams::new(1.0, -0.1).is_err());
    }

    #[test]
    fn csv_and_jsonl_readers() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("m.csv");
        std::fs::write(&csv, "px,py,pz,nx,ny,nz\n1,2,3,0,0,1\n4,5,6,1,0,0\n").unwrap();
        let ys = read_measurements(&csv).unwrap();
        assert_eq!(ys.len(), 2);
        assert_eq!(ys[1].position, Vec3::new(4.0, 5.0, 6.0));

        let jl = dir.path().join("m.jsonl");
        let mut buf = Vec::new();
        write_measurements_jsonl(&mut buf, &ys).unwrap();
        std::fs::write(&jl, &buf).unwrap();
        assert_eq!(read_measurements(&jl).unwrap(), ys);

        std::fs::write(&jl, "{\"p\":[0,0,0],\"n\":[0,0,2]}\n").unwrap();
        assert!(matches!(read_measurements(&jl), Err(Error::Parse { line: 1, .. })));
    }
}
