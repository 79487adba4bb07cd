//! Procedural meshes bundled for desk-scale experiments.

use std::collections::HashMap;
use std::f64::consts::PI;

use otsample_core::{Mesh, Vec3};

pub const BUNDLED: [&str; 5] = ["icosahedron", "sphere", "torus", "cube", "cylinder"];

pub fn bundled(name: &str) -> Option<Mesh> {
    Some(match name {
        "icosahedron" => icosahedron(),
        "sphere" => icosphere(2),
        "torus" => torus(32, 12, 1.0, 0.35),
        "cube" => cube(3),
        "cylinder" => cylinder(24, 6),
        _ => return None,
    })
}

pub fn icosahedron() -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ];
    let faces = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    let vertices = v.iter().map(|&(x, y, z)| Vec3::new(x, y, z).normalize()).collect();
    Mesh::new(vertices, faces).expect("valid icosahedron")
}

/// Icosahedron subdivided `levels` times at edge midpoints, projected to the unit sphere.
pub fn icosphere(levels: usize) -> Mesh {
    let base = icosahedron();
    let mut vertices = base.vertices;
    let mut faces = base.faces;
    for _ in 0..levels {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut m = [0; 3];
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[e] = *mid.entry(key).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                    vertices.len() - 1
                });
            }
            next.push([f[0], m[0], m[2]]);
            next.push([f[1], m[1], m[0]]);
            next.push([f[2], m[2], m[1]]);
            next.push([m[0], m[1], m[2]]);
        }
        faces = next;
    }
    Mesh::new(vertices, faces).expect("valid icosphere")
}

pub fn torus(major: usize, minor: usize, r_major: f64, r_minor: f64) -> Mesh {
    let mut vertices = Vec::with_capacity(major * minor);
    for i in 0..major {
        let u = 2.0 * PI * i as f64 / major as f64;
        for j in 0..minor {
            let v = 2.0 * PI * j as f64 / minor as f64;
            let r = r_major + r_minor * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), r_minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % major) * minor + (j % minor);
    let mut faces = Vec::with_capacity(2 * major * minor);
    for i in 0..major {
        for j in 0..minor {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(vertices, faces).expect("valid torus")
}

/// Unit cube with every side split into `n × n` squares.
pub fn cube(n: usize) -> Mesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let axes = [
        (Vec3::x(), Vec3::y(), Vec3::z()),
        (Vec3::y(), Vec3::z(), Vec3::x()),
        (Vec3::z(), Vec3::x(), Vec3::y()),
    ];
    for (a, b, c) in axes {
        for side in [0.0, 1.0] {
            let start = vertices.len();
            for j in 0..=n {
                for i in 0..=n {
                    let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
                    vertices.push(a * s + b * t + c * side);
                }
            }
            let id = |i: usize, j: usize| start + j * (n + 1) + i;
            for j in 0..n {
                for i in 0..n {
                    let (p, q, r, s) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    if side == 1.0 {
                        faces.push([p, q, r]);
                        faces.push([p, r, s]);
                    } else {
                        faces.push([p, r, q]);
                        faces.push([p, s, r]);
                    }
                }
            }
        }
    }
    Mesh::new(vertices, faces).expect("valid cube")
}

/// Closed cylinder of radius 0.5 and height 1.5 with fan caps.
pub fn cylinder(segments: usize, rings: usize) -> Mesh {
    let mut vertices = Vec::new();
    for r in 0..=rings {
        let z = 1.5 * r as f64 / rings as f64;
        for s in 0..segments {
            let a = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Vec3::new(0.5 * a.cos(), 0.5 * a.sin(), z));
        }
    }
    let id = |r: usize, s: usize| r * segments + s % segments;
    let mut faces = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            faces.push([id(r, s), id(r, s + 1), id(r + 1, s + 1)]);
            faces.push([id(r, s), id(r + 1, s + 1), id(r + 1, s)]);
        }
    }
    let bottom = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, 0.0));
    let top = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, 1.5));
    for s in 0..segments {
        faces.push([bottom, id(0, s + 1), id(0, s)]);
        faces.push([top, id(rings, s), id(rings, s + 1)]);
    }
    Mesh::new(vertices, faces).expect("valid cylinder")
}

/// Flat-ish height-field grid with `2·n²` faces, used for timing sweeps.
pub fn wavy_grid(n: usize) -> Mesh {
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
            vertices.push(Vec3::new(x, y, 0.05 * (6.0 * x).sin() * (4.0 * y).cos()));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(vertices, faces).expect("valid grid")
}
