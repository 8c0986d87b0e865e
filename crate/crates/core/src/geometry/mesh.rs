use nalgebra::Unit;
use sha2::{Digest, Sha256};

use super::{UnitVec3, Vec3};
use crate::error::{Error, Result};

/// Relative area tolerance below which a face counts as degenerate.
const DEGENERATE_REL: f64 = 1e-12;

/// Triangle with the edge vectors cached for closest-point queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub a: Vec3,
    pub b: Vec3,
    pub c: Vec3,
    ab: Vec3,
    ac: Vec3,
}

impl Triangle {
    pub fn new(a: Vec3, b: Vec3, c: Vec3) -> Self {
        Self {
            a,
            b,
            c,
            ab: b - a,
            ac: c - a,
        }
    }

    /// Right-hand-rule normal of the `a -> b -> c` winding (not normalized).
    pub fn scaled_normal(&self) -> Vec3 {
        self.ab.cross(&self.ac)
    }

    pub fn area(&self) -> f64 {
        0.5 * self.scaled_normal().norm()
    }

    pub fn is_degenerate(&self) -> bool {
        let scale = self
            .ab
            .norm_squared()
            .max(self.ac.norm_squared())
            .max((self.c - self.b).norm_squared());
        let cross = self.scaled_normal().norm();
        !cross.is_finite() || scale == 0.0 || cross <= DEGENERATE_REL * scale
    }

    /// Closest point on the closed triangle to `p` (Voronoi-region walk).
    #[inline]
    pub fn closest_point(&self, p: &Vec3) -> Vec3 {
        let (a, b, c, ab, ac) = (&self.a, &self.b, &self.c, &self.ab, &self.ac);

        let ap = p - a;
        let d1 = ab.dot(&ap);
        let d2 = ac.dot(&ap);
        if d1 <= 0.0 && d2 <= 0.0 {
            return *a;
        }

        let bp = p - b;
        let d3 = ab.dot(&bp);
        let d4 = ac.dot(&bp);
        if d3 >= 0.0 && d4 <= d3 {
            return *b;
        }

        let vc = d1 * d4 - d3 * d2;
        if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            let v = d1 / (d1 - d3);
            return a + ab * v;
        }

        let cp = p - c;
        let d5 = ab.dot(&cp);
        let d6 = ac.dot(&cp);
        if d6 >= 0.0 && d5 <= d6 {
            return *c;
        }

        let vb = d5 * d2 - d1 * d6;
        if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            let w = d2 / (d2 - d6);
            return a + ac * w;
        }

        let va = d3 * d6 - d5 * d4;
        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            return b + (c - b) * w;
        }

        let denom = 1.0 / (va + vb + vc);
        let v = vb * denom;
        let w = vc * denom;
        a + ab * v + ac * w
    }

    #[inline]
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        (p - self.closest_point(p)).norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [usize; 3],
    pub normal: UnitVec3,
}

/// Immutable triangle mesh. Normals always come from the winding order.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<Face>,
    triangles: Vec<Triangle>,
    fingerprint: [u8; 32],
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.faces == other.faces
    }
}

impl Mesh {
    /// Validates the index table, rejects degenerate faces and computes
    /// outward normals from counter-clockwise winding.
    pub fn new(vertices: Vec<Vec3>, indices: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || indices.is_empty() {
            return Err(Error::Validation("mesh has no faces".into()));
        }
        if let Some(v) = vertices.iter().position(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::Validation(format!("vertex {v} is not finite")));
        }

        let mut faces = Vec::with_capacity(indices.len());
        let mut triangles = Vec::with_capacity(indices.len());
        for (f, idx) in indices.into_iter().enumerate() {
            if let Some(&bad) = idx.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::Validation(format!(
                    "face {f} references vertex {bad}, only {} exist",
                    vertices.len()
                )));
            }
            if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
                return Err(Error::Validation(format!("face {f} repeats a vertex")));
            }
            let tri = Triangle::new(vertices[idx[0]], vertices[idx[1]], vertices[idx[2]]);
            if tri.is_degenerate() {
                return Err(Error::Validation(format!("face {f} has zero area")));
            }
            let normal = Unit::new_normalize(tri.scaled_normal());
            faces.push(Face { vertices: idx, normal });
            triangles.push(tri);
        }

        let fingerprint = fingerprint(&vertices, &faces);
        Ok(Self {
            vertices,
            faces,
            triangles,
            fingerprint,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face(&self, id: usize) -> Result<&Face> {
        self.faces.get(id).ok_or(Error::InvalidFaceId {
            id,
            count: self.faces.len(),
        })
    }

    /// SHA-256 over vertex bit patterns and the face index table.
    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn fingerprint_hex(&self) -> String {
        to_hex(&self.fingerprint)
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(Triangle::area).sum()
    }

    /// Area-weighted centroid of the surface.
    pub fn surface_centroid(&self) -> Vec3 {
        let (sum, area) = self.triangles.iter().fold((Vec3::zeros(), 0.0), |(s, a), t| {
            let w = t.area();
            (s + (t.a + t.b + t.c) * (w / 3.0), a + w)
        });
        sum / area
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }
}

fn fingerprint(vertices: &[Vec3], faces: &[Face]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((vertices.len() as u64).to_le_bytes());
    for v in vertices {
        for x in v.iter() {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    h.update((faces.len() as u64).to_le_bytes());
    for f in faces {
        for &i in &f.vertices {
            h.update((i as u64).to_le_bytes());
        }
    }
    h.finalize().into()
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
