//! Shipped test objects (millimetres, object frame near the surface
//! centroid) and the procedural builders that produced them.
//!
//! The OBJ files under `fixtures/` are generated by
//! `cargo run -p tactile-core --example gen_fixtures`; a unit test keeps them
//! in sync with [`build`].

use std::path::PathBuf;

use super::ApproachDistribution;
use crate::geometry::{parse_obj, Mesh};

pub const UNIT_BOX_OBJ: &str = include_str!("../../fixtures/unit_box.obj");
pub const BOX_OBJ: &str = include_str!("../../fixtures/box.obj");
pub const CHAIR_BACK_OBJ: &str = include_str!("../../fixtures/chair_back.obj");
pub const REGISTER_OBJ: &str = include_str!("../../fixtures/register.obj");
pub const STICK_OBJ: &str = include_str!("../../fixtures/stick.obj");

/// Directory holding the fixture meshes and the clutter scene.
pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Box scene with a chair back and a stick close by, for outlier tests.
pub fn clutter_scene_path() -> PathBuf {
    dir().join("clutter_scene.json")
}

/// Approach rays used with the clutter scene: planned against the five
/// upper sides of the nominal box (jittered by up to 0.6 rad), from 400 mm
/// away, aimed anywhere over the nominal box.
pub fn clutter_approach() -> ApproachDistribution {
    ApproachDistribution {
        center: [0.0; 3],
        standoff: 400.0,
        aim_half: [75.0, 47.0, 32.0],
        min_elevation: 0.0,
        retries_per_hit: 20,
        axes: vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
        ],
        axis_jitter: 0.6,
    }
}

fn parse(text: &str) -> Mesh {
    parse_obj(text).expect("shipped fixture parses")
}

/// Axis-aligned cube of side 1 centred on the origin (12 faces).
pub fn unit_box() -> Mesh {
    parse(UNIT_BOX_OBJ)
}

/// 160 x 100 x 70 mm box centred on the origin (12 faces).
pub fn box_fixture() -> Mesh {
    parse(BOX_OBJ)
}

/// Curved chair-back panel with a handle slot.
pub fn chair_back() -> Mesh {
    parse(CHAIR_BACK_OBJ)
}

/// Register-like stepped body with a display, a handle and a printer dome.
pub fn register() -> Mesh {
    parse(REGISTER_OBJ)
}

/// 400 x 15 x 15 mm bar along x.
pub fn stick() -> Mesh {
    parse(STICK_OBJ)
}

/// Procedural construction of the fixtures.
pub mod build {
    use std::collections::HashMap;
    use std::f64::consts::PI;

    use nalgebra::{Rotation3, Vector2};

    use crate::geometry::{Mesh, Vec3};

    #[derive(Default)]
    struct Builder {
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        seen: HashMap<[u64; 3], usize>,
    }

    impl Builder {
        fn vertex(&mut self, p: Vec3) -> usize {
            // +0.0 for -0.0 so the OBJ round trip sees the same vertex list
            let p = p.map(|x| x + 0.0);
            *self.seen.entry([p.x, p.y, p.z].map(f64::to_bits)).or_insert_with(|| {
                self.vertices.push(p);
                self.vertices.len() - 1
            })
        }

        /// Triangle wound so its normal agrees with `outward`.
        fn tri(&mut self, a: usize, b: usize, c: usize, outward: &Vec3) {
            let v = &self.vertices;
            let n = (v[b] - v[a]).cross(&(v[c] - v[a]));
            if n.dot(outward) >= 0.0 {
                self.faces.push([a, b, c]);
            } else {
                self.faces.push([a, c, b]);
            }
        }

        /// Planar quad `a b c d` (in cyclic order), split along `a c`.
        fn quad(&mut self, q: [Vec3; 4], outward: &Vec3) {
            let [a, b, c, d] = q.map(|p| self.vertex(p));
            self.tri(a, b, c, outward);
            self.tri(a, c, d, outward);
        }

        fn cuboid(&mut self, lo: Vec3, hi: Vec3, rot: &Rotation3<f64>, shift: Vec3, skip: &[usize]) {
            let corner = |i: usize| {
                let p = Vec3::new(
                    if i & 1 == 0 { lo.x } else { hi.x },
                    if i & 2 == 0 { lo.y } else { hi.y },
                    if i & 4 == 0 { lo.z } else { hi.z },
                );
                rot * p + shift
            };
            // -x, +x, -y, +y, -z, +z
            let sides: [([usize; 4], Vec3); 6] = [
                ([0, 2, 6, 4], -Vec3::x()),
                ([1, 3, 7, 5], Vec3::x()),
                ([0, 1, 5, 4], -Vec3::y()),
                ([2, 3, 7, 6], Vec3::y()),
                ([0, 1, 3, 2], -Vec3::z()),
                ([4, 5, 7, 6], Vec3::z()),
            ];
            for (k, (idx, n)) in sides.iter().enumerate() {
                if !skip.contains(&k) {
                    self.quad(idx.map(corner), &(rot * n));
                }
            }
        }

        fn finish(self) -> Mesh {
            Mesh::new(self.vertices, self.faces).expect("fixture builder produces a valid mesh")
        }
    }

    pub fn unit_box() -> Mesh {
        let mut b = Builder::default();
        b.cuboid(
            Vec3::repeat(-0.5),
            Vec3::repeat(0.5),
            &Rotation3::identity(),
            Vec3::zeros(),
            &[],
        );
        b.finish()
    }

    pub fn box_fixture() -> Mesh {
        let mut b = Builder::default();
        let half = Vec3::new(80.0, 50.0, 35.0);
        b.cuboid(-half, half, &Rotation3::identity(), Vec3::zeros(), &[]);
        b.finish()
    }

    pub fn stick() -> Mesh {
        let mut b = Builder::default();
        let half = Vec3::new(200.0, 7.5, 7.5);
        b.cuboid(-half, half, &Rotation3::identity(), Vec3::zeros(), &[]);
        b.finish()
    }

    /// Arc of radius 500 mm around the z axis spanning 0.8 rad, 25 mm thick,
    /// 400 mm tall, cut into four columns; the two middle columns carry a
    /// 40 mm handle slot near the top.
    pub fn chair_back() -> Mesh {
        const R: f64 = 500.0;
        const T: f64 = 25.0;
        const COLS: usize = 4;
        const SPAN: f64 = 0.8;
        let (z0, s0, s1, z1) = (-200.0, 100.0, 140.0, 200.0);
        let phi = |j: usize| -SPAN / 2.0 + SPAN * j as f64 / COLS as f64;
        // inner surface faces +y, centred near the origin
        let at = |j: usize, r: f64, z: f64| Vec3::new(r * phi(j).sin(), R + T / 2.0 - r * phi(j).cos(), z);
        let radial = |j0: usize| {
            let m = (phi(j0) + phi(j0 + 1)) / 2.0;
            Vec3::new(m.sin(), -m.cos(), 0.0)
        };
        let tangent = |j: usize| Vec3::new(phi(j).cos(), phi(j).sin(), 0.0);
        let slot = |j: usize| j == 1 || j == 2;

        let mut b = Builder::default();
        for j in 0..COLS {
            let spans: &[(f64, f64)] = if slot(j) { &[(z0, s0), (s1, z1)] } else { &[(z0, z1)] };
            for &(za, zb) in spans {
                // inner (concave) side faces the axis, outer side away from it
                b.quad(
                    [at(j, R, za), at(j + 1, R, za), at(j + 1, R, zb), at(j, R, zb)],
                    &-radial(j),
                );
                let outer = R + T;
                b.quad(
                    [
                        at(j, outer, za),
                        at(j + 1, outer, za),
                        at(j + 1, outer, zb),
                        at(j, outer, zb),
                    ],
                    &radial(j),
                );
            }
            let mut cap = |z: f64, up: f64| {
                b.quad(
                    [at(j, R, z), at(j + 1, R, z), at(j + 1, R + T, z), at(j, R + T, z)],
                    &(Vec3::z() * up),
                );
            };
            cap(z1, 1.0);
            cap(z0, -1.0);
            if slot(j) {
                cap(s0, 1.0);
                cap(s1, -1.0);
            }
        }
        for (j, sign, za, zb) in [
            (0, -1.0, z0, z1),
            (COLS, 1.0, z0, z1),
            (1, 1.0, s0, s1),
            (3, -1.0, s0, s1),
        ] {
            b.quad(
                [at(j, R, za), at(j, R + T, za), at(j, R + T, zb), at(j, R, zb)],
                &(tangent(j) * sign),
            );
        }
        b.finish()
    }

    /// Side profile (y, z) of the register body, counter-clockwise seen from +x.
    const PROFILE: [(f64, f64); 7] = [
        (-120.0, 0.0),
        (130.0, 0.0),
        (130.0, 140.0),
        (60.0, 140.0),
        (40.0, 120.0),
        (-90.0, 80.0),
        (-120.0, 60.0),
    ];

    pub fn register() -> Mesh {
        const HALF_W: f64 = 150.0;
        const BULGE: f64 = 20.0;
        let mut b = Builder::default();
        let p = PROFILE.map(|(y, z)| Vector2::new(y, z));
        let centroid = Vector2::new(10.0, 70.0);
        let n = p.len();
        for i in 0..n {
            let (a, c) = (p[i], p[(i + 1) % n]);
            let e = c - a;
            let out = Vec3::new(0.0, e.y, -e.x);
            b.quad(
                [
                    Vec3::new(-HALF_W, a.x, a.y),
                    Vec3::new(-HALF_W, c.x, c.y),
                    Vec3::new(HALF_W, c.x, c.y),
                    Vec3::new(HALF_W, a.x, a.y),
                ],
                &out,
            );
        }
        // side panels bulge outwards as shallow fans
        for side in [-1.0, 1.0] {
            let apex = b.vertex(Vec3::new(side * (HALF_W + BULGE), centroid.x, centroid.y));
            let ring: Vec<usize> = p.iter().map(|q| b.vertex(Vec3::new(side * HALF_W, q.x, q.y))).collect();
            for i in 0..n {
                b.tri(apex, ring[i], ring[(i + 1) % n], &(Vec3::x() * side));
            }
        }
        let id = Rotation3::identity();
        // display post and tilted screen
        b.cuboid(
            Vec3::new(-20.0, 80.0, 140.0),
            Vec3::new(20.0, 110.0, 200.0),
            &id,
            Vec3::zeros(),
            &[4, 5],
        );
        b.cuboid(
            Vec3::new(-100.0, -10.0, -60.0),
            Vec3::new(100.0, 10.0, 60.0),
            &Rotation3::from_axis_angle(&Vec3::x_axis(), -0.35),
            Vec3::new(0.0, 95.0, 250.0),
            &[],
        );
        // drawer handle on the front
        b.cuboid(
            Vec3::new(-60.0, -135.0, 25.0),
            Vec3::new(60.0, -120.0, 40.0),
            &id,
            Vec3::zeros(),
            &[3],
        );
        // half-cylinder printer dome on the rear deck
        const FACETS: usize = 6;
        let (dx, dz, r, y0, y1) = (-100.0, 140.0, 30.0, 70.0, 130.0);
        let arc = |k: usize| {
            let t = PI * k as f64 / FACETS as f64;
            (dx + r * t.cos(), dz + r * t.sin())
        };
        for k in 0..FACETS {
            let ((xa, za), (xb, zb)) = (arc(k), arc(k + 1));
            let mid = PI * (k as f64 + 0.5) / FACETS as f64;
            b.quad(
                [
                    Vec3::new(xa, y0, za),
                    Vec3::new(xb, y0, zb),
                    Vec3::new(xb, y1, zb),
                    Vec3::new(xa, y1, za),
                ],
                &Vec3::new(mid.cos(), 0.0, mid.sin()),
            );
        }
        for (y, s) in [(y0, -1.0), (y1, 1.0)] {
            let ring: Vec<usize> = (0..=FACETS)
                .map(|k| {
                    let (x, z) = arc(k);
                    b.vertex(Vec3::new(x, y, z))
                })
                .collect();
            for k in 1..FACETS {
                b.tri(ring[0], ring[k], ring[k + 1], &(Vec3::y() * s));
            }
        }
        let mesh = b.finish();
        recentre(mesh)
    }

    /// Shifts a mesh so its surface centroid sits at the origin (rounded to
    /// whole millimetres to keep the OBJ readable).
    fn recentre(mesh: Mesh) -> Mesh {
        let c = mesh.surface_centroid().map(|x| x.round());
        let vertices = mesh.vertices().iter().map(|v| v - c).collect();
        let faces = mesh.faces().iter().map(|f| f.vertices).collect();
        Mesh::new(vertices, faces).expect("translation keeps the mesh valid")
    }

    /// Every shipped fixture with its file name.
    pub fn all() -> Vec<(&'static str, Mesh)> {
        vec![
            ("unit_box.obj", unit_box()),
            ("box.obj", box_fixture()),
            ("chair_back.obj", chair_back()),
            ("register.obj", register()),
            ("stick.obj", stick()),
        ]
    }
}
