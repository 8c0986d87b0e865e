//! Wavefront OBJ and ASCII STL loading.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    StlAscii,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "stl" => Some(Self::StlAscii),
            _ => None,
        }
    }
}

/// Loads a mesh, inferring the format from the extension when `format` is `None`.
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<Mesh> {
    let path = path.as_ref();
    let format = format
        .or_else(|| MeshFormat::from_path(path))
        .ok_or_else(|| Error::InvalidParameter(format!("unknown mesh format for {}", path.display())))?;
    let text = std::fs::read_to_string(path)?;
    match format {
        MeshFormat::Obj => parse_obj(&text),
        MeshFormat::StlAscii => parse_stl_ascii(&text),
    }
}

/// Collapses exactly-equal coordinates onto one vertex id.
#[derive(Default)]
struct VertexPool {
    ids: HashMap<[u64; 3], usize>,
    vertices: Vec<Vec3>,
}

impl VertexPool {
    fn insert(&mut self, v: Vec3) -> usize {
        // -0.0 == 0.0, so key both on the same bits
        let key = [v.x, v.y, v.z].map(|x| if x == 0.0 { 0u64 } else { x.to_bits() });
        *self.ids.entry(key).or_insert_with(|| {
            self.vertices.push(v);
            self.vertices.len() - 1
        })
    }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: "missing coordinate".into(),
    })?;
    let x: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad number {tok:?}"),
    })?;
    if !x.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite coordinate {tok:?}"),
        });
    }
    Ok(x)
}

fn parse_vec3<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec3> {
    Ok(Vec3::new(
        parse_f64(toks.next(), line)?,
        parse_f64(toks.next(), line)?,
        parse_f64(toks.next(), line)?,
    ))
}

pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut raw: Vec<Vec3> = Vec::new();
    let mut polygons: Vec<(usize, Vec<usize>)> = Vec::new();

    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => raw.push(parse_vec3(toks, line_no)?),
            Some("f") => {
                let mut poly = Vec::new();
                for tok in toks {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad face index {tok:?}"),
                    })?;
                    // 1-based, negative counts back from the latest vertex
                    let idx = match i {
                        0 => None,
                        i if i > 0 => Some(i as usize - 1),
                        i => raw.len().checked_sub(i.unsigned_abs() as usize),
                    };
                    match idx {
                        Some(idx) if idx < raw.len() => poly.push(idx),
                        _ => {
                            return Err(Error::Parse {
                                line: line_no,
                                msg: format!("face index {i} out of range"),
                            })
                        }
                    }
                }
                if poly.len() < 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "face needs at least 3 vertices".into(),
                    });
                }
                polygons.push((line_no, poly));
            }
            // normals, texture coords, groups, materials: not needed
            _ => {}
        }
    }

    let mut pool = VertexPool::default();
    let remap: Vec<usize> = raw.iter().map(|v| pool.insert(*v)).collect();
    let mut indices = Vec::new();
    for (line, poly) in polygons {
        let ids: Vec<usize> = poly.iter().map(|&i| remap[i]).collect();
        fan_triangulate(&pool.vertices, &ids, line, &mut indices)?;
    }
    Mesh::new(pool.vertices, indices)
}

/// Fan-triangulates a convex polygon, refusing fans that fold over.
fn fan_triangulate(vertices: &[Vec3], poly: &[usize], line: usize, out: &mut Vec<[usize; 3]>) -> Result<()> {
    if poly.len() == 3 {
        out.push([poly[0], poly[1], poly[2]]);
        return Ok(());
    }
    // Newell normal of the whole polygon
    let mut newell = Vec3::zeros();
    for (k, &i) in poly.iter().enumerate() {
        let a = vertices[i];
        let b = vertices[poly[(k + 1) % poly.len()]];
        newell += Vec3::new(
            (a.y - b.y) * (a.z + b.z),
            (a.z - b.z) * (a.x + b.x),
            (a.x - b.x) * (a.y + b.y),
        );
    }
    for k in 1..poly.len() - 1 {
        let (a, b, c) = (poly[0], poly[k], poly[k + 1]);
        let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
        if n.dot(&newell) < 0.0 {
            return Err(Error::Parse {
                line,
                msg: "polygon is not convex".into(),
            });
        }
        out.push([a, b, c]);
    }
    Ok(())
}

pub fn parse_stl_ascii(text: &str) -> Result<Mesh> {
    let mut pool = VertexPool::default();
    let mut indices = Vec::new();
    let mut corners: Vec<usize> = Vec::with_capacity(3);
    let mut in_loop = false;
    let mut saw_solid = false;

    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let mut toks = line.split_whitespace();
        let err = |msg: &str| Error::Parse {
            line: line_no,
            msg: msg.into(),
        };
        match toks.next() {
            None => {}
            Some("solid") => saw_solid = true,
            Some("facet") | Some("endsolid") => {}
            Some("outer") => {
                if in_loop {
                    return Err(err("nested loop"));
                }
                in_loop = true;
                corners.clear();
            }
            Some("vertex") => {
                if !in_loop {
                    return Err(err("vertex outside loop"));
                }
                corners.push(pool.insert(parse_vec3(toks, line_no)?));
            }
            Some("endloop") => {
                if !in_loop || corners.len() != 3 {
                    return Err(err("facet loop must have exactly 3 vertices"));
                }
                indices.push([corners[0], corners[1], corners[2]]);
                in_loop = false;
            }
            Some("endfacet") => {
                if in_loop {
                    return Err(err("endfacet inside loop"));
                }
            }
            Some(other) => return Err(err(&format!("unexpected keyword {other:?}"))),
        }
    }
    if !saw_solid {
        return Err(Error::Parse {
            line: 1,
            msg: "missing `solid` header".into(),
        });
    }
    if in_loop {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: "unterminated facet loop".into(),
        });
    }
    Mesh::new(pool.vertices, indices)
}

/// Serializes to OBJ with shortest round-trip float formatting.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let [a, b, c] = f.vertices;
        let _ = writeln!(s, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    s
}
