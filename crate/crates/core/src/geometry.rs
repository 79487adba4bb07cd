//! Triangle and mesh primitives.
//!
//! Canonical frame: the longest edge of a triangle is mapped to the segment
//! (0,0)→(0,1) of the plane and the remaining vertex (the apex) lands in the
//! half-lens `x > 0, |p| ≤ 1, |p − (0,1)| ≤ 1`. The endpoint that becomes the
//! origin is the one closer to the apex, so canonical apexes also satisfy
//! `apex.y ≤ 1/2`.

use std::cmp::Ordering;

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;

use crate::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Relative area below which a triangle is degenerate: `area < DEGENERATE_AREA · L²`.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Relative tolerance under which two edge lengths count as tied.
const EDGE_TIE: f64 = 1e-12;

fn lex_cmp(a: &Vec3, b: &Vec3) -> Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v1: Vec3,
    pub v2: Vec3,
    pub v3: Vec3,
}

/// The longest edge `(from, to)` in winding order and the opposite vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LongestEdge {
    pub from: usize,
    pub to: usize,
    pub opposite: usize,
}

impl Triangle {
    pub fn new(v1: Vec3, v2: Vec3, v3: Vec3) -> Self {
        Self { v1, v2, v3 }
    }

    pub fn vertices(&self) -> [Vec3; 3] {
        [self.v1, self.v2, self.v3]
    }

    pub fn vertex(&self, i: usize) -> Vec3 {
        match i {
            0 => self.v1,
            1 => self.v2,
            2 => self.v3,
            _ => panic!("triangle vertex index {i} out of range"),
        }
    }

    /// Unnormalized winding normal `(v2 − v1) × (v3 − v1)`.
    pub fn cross(&self) -> Vec3 {
        (self.v2 - self.v1).cross(&(self.v3 - self.v1))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.cross().norm()
    }

    /// Unit normal oriented by vertex winding; `None` for zero-area triangles.
    pub fn normal(&self) -> Option<Vec3> {
        let c = self.cross();
        let n = c.norm();
        (n > 0.0).then(|| c / n)
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v1 + self.v2 + self.v3) / 3.0
    }

    pub fn edge_length(&self, from: usize) -> f64 {
        (self.vertex((from + 1) % 3) - self.vertex(from)).norm()
    }

    /// Longest edge with ties broken by the lexicographically smallest
    /// (sorted) endpoint coordinate pair.
    pub fn longest_edge(&self) -> LongestEdge {
        let lengths = [self.edge_length(0), self.edge_length(1), self.edge_length(2)];
        let max = lengths.iter().cloned().fold(0.0, f64::max);
        let key = |e: usize| {
            let a = self.vertex(e);
            let b = self.vertex((e + 1) % 3);
            if lex_cmp(&a, &b) == Ordering::Greater {
                (b, a)
            } else {
                (a, b)
            }
        };
        let mut best: Option<usize> = None;
        for e in 0..3 {
            if max - lengths[e] > EDGE_TIE * max {
                continue;
            }
            best = match best {
                None => Some(e),
                Some(b) => {
                    let (ka, kb) = (key(e), key(b));
                    let ord = lex_cmp(&ka.0, &kb.0).then(lex_cmp(&ka.1, &kb.1));
                    if ord == Ordering::Less {
                        Some(e)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let from = best.unwrap_or(0);
        LongestEdge {
            from,
            to: (from + 1) % 3,
            opposite: (from + 2) % 3,
        }
    }

    pub fn longest_edge_length(&self) -> f64 {
        self.edge_length(self.longest_edge().from)
    }

    pub fn is_degenerate(&self) -> bool {
        let l = self.longest_edge_length();
        !(self.area() >= DEGENERATE_AREA * l * l) || l == 0.0
    }

    /// Barycentric coordinates of the orthogonal projection of `p` onto the
    /// triangle plane.
    pub fn barycentric(&self, p: &Vec3) -> [f64; 3] {
        let c = self.cross();
        let denom = c.norm_squared();
        let b2 = (self.v2 - p).cross(&(self.v3 - p)).dot(&c) / denom;
        let b3 = (self.v3 - p).cross(&(self.v1 - p)).dot(&c) / denom;
        [b2, b3, 1.0 - b2 - b3]
    }

    pub fn from_barycentric(&self, b: [f64; 3]) -> Vec3 {
        self.v1 * b[0] + self.v2 * b[1] + self.v3 * b[2]
    }

    /// Distance of `p` to the supporting plane.
    pub fn plane_distance(&self, p: &Vec3) -> f64 {
        match self.normal() {
            Some(n) => (p - self.v1).dot(&n).abs(),
            None => 0.0,
        }
    }
}

/// Indexed triangle soup.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds a mesh, rejecting faces that index past the vertex list.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad} but only {} vertices exist",
                    vertices.len()
                )));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn triangle(&self, face: usize) -> Triangle {
        let [a, b, c] = self.faces[face];
        Triangle::new(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn triangles(&self) -> impl Iterator<Item = Triangle> + '_ {
        (0..self.faces.len()).map(|f| self.triangle(f))
    }

    pub fn total_area(&self) -> f64 {
        face_areas(self).iter().sum()
    }

    /// Axis-aligned bounding box `(min, max)`; `None` for a mesh without vertices.
    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }
}

/// Per-face areas `½‖(v2 − v1) × (v3 − v1)‖`.
pub fn face_areas(mesh: &Mesh) -> Vec<f64> {
    mesh.triangles().map(|t| t.area()).collect()
}

/// Shape-space representative of a triangle.
///
/// The canonical vertices are `(0,0)`, `(0,1)` and `apex`; `scale` is the
/// length of the original longest edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalTriangle {
    pub apex: Vec2,
    pub scale: f64,
}

impl CanonicalTriangle {
    pub fn from_apex(apex: Vec2) -> Self {
        Self { apex, scale: 1.0 }
    }

    pub fn vertices(&self) -> [Vec2; 3] {
        [Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), self.apex]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.apex.x
    }

    pub fn centroid(&self) -> Vec2 {
        Vec2::new(self.apex.x / 3.0, (1.0 + self.apex.y) / 3.0)
    }

    /// Point with barycentric coordinates `b` w.r.t. the canonical vertices.
    pub fn point(&self, b: [f64; 3]) -> Vec2 {
        Vec2::new(b[2] * self.apex.x, b[1] + b[2] * self.apex.y)
    }

    pub fn barycentric(&self, p: &Vec2) -> [f64; 3] {
        let b2 = p.x / self.apex.x;
        let b1 = p.y - b2 * self.apex.y;
        [1.0 - b1 - b2, b1, b2]
    }

    /// Whether the apex lies in the canonical half-lens (with tolerance `tol`).
    pub fn in_lens(&self, tol: f64) -> bool {
        let a = self.apex;
        a.x > 0.0
            && a.norm() <= 1.0 + tol
            && (a - Vec2::new(0.0, 1.0)).norm() <= 1.0 + tol
    }
}

/// Similarity mapping the canonical plane onto a triangle's plane.
///
/// `rotation` rows are the world-space canonical axes `(e_x, e_y, e_z)`; the
/// canonical frame is right-handed, and `reflected` records whether that
/// frame's normal is opposite to the triangle's winding normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub reflected: bool,
    pub scale: f64,
}

impl SimilarityTransform {
    pub fn basis(&self) -> (Vec3, Vec3) {
        (
            self.rotation.row(0).transpose().into_owned(),
            self.rotation.row(1).transpose().into_owned(),
        )
    }

    pub fn to_world(&self, q: &Vec2) -> Vec3 {
        self.translation + self.rotation.transpose() * Vec3::new(q.x, q.y, 0.0) * self.scale
    }

    /// World point expressed in the canonical frame; the third component is
    /// the (scaled) distance to the triangle plane.
    pub fn to_canonical(&self, p: &Vec3) -> Vec3 {
        self.rotation * (p - self.translation) / self.scale
    }
}

/// Maps a triangle to its canonical representative.
pub fn canonicalize(tri: &Triangle) -> Result<(CanonicalTriangle, SimilarityTransform)> {
    if tri.is_degenerate() {
        return Err(Error::DegenerateTriangle { face: None });
    }
    let edge = tri.longest_edge();
    let (mut a, mut b) = (tri.vertex(edge.from), tri.vertex(edge.to));
    let c = tri.vertex(edge.opposite);
    let len = (b - a).norm();

    // Origin goes to the endpoint closer to the apex; exact ties fall back to
    // coordinate order.
    let t = (c - a).dot(&(b - a)) / (len * len);
    if t > 0.5 + EDGE_TIE || ((t - 0.5).abs() <= EDGE_TIE && lex_cmp(&a, &b) == Ordering::Greater)
    {
        std::mem::swap(&mut a, &mut b);
    }

    let e_y = (b - a) / len;
    let rel = c - a;
    let h = rel - e_y * rel.dot(&e_y);
    let e_x = h / h.norm();
    let e_z = e_x.cross(&e_y);
    let rotation = Matrix3::from_rows(&[e_x.transpose(), e_y.transpose(), e_z.transpose()]);
    let apex = Vec2::new(rel.dot(&e_x) / len, rel.dot(&e_y) / len);
    let reflected = e_z.dot(&tri.cross()) < 0.0;

    Ok((
        CanonicalTriangle { apex, scale: len },
        SimilarityTransform {
            rotation,
            translation: a,
            reflected,
            scale: len,
        },
    ))
}

/// Maps canonical-plane points back to world space.
pub fn uncanonicalize(points: &[Vec2], xf: &SimilarityTransform) -> Vec<Vec3> {
    points.iter().map(|q| xf.to_world(q)).collect()
}

/// Square-root parametrization of uniform triangle sampling.
///
/// `u1 = 0` gives `v1`, `(1, 1)` gives `v2` and `(1, 0)` gives `v3`.
pub fn square_root_point(tri: &Triangle, u1: f64, u2: f64) -> Vec3 {
    let s = u1.sqrt();
    tri.v1 * (1.0 - s) + tri.v2 * (s * u2) + tri.v3 * ((1.0 - u2) * s)
}

/// `count` i.i.d. uniform points on `tri`.
pub fn sample_uniform_triangle<R: Rng + ?Sized>(
    tri: &Triangle,
    count: usize,
    rng: &mut R,
) -> Vec<Vec3> {
    (0..count)
        .map(|_| {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            square_root_point(tri, u1, u2)
        })
        .collect()
}

/// Low-distortion area-preserving map from the unit square to barycentric
/// coordinates. Vertices map as `(0,0) → (1,0,0)`, `(1,0) → (0,1,0)`,
/// `(0,1) → (0,0,1)`; the diagonal belongs to the second branch.
pub fn square_to_triangle(u: f64, v: f64) -> [f64; 3] {
    let (s, t) = if v > u {
        let s = 0.5 * u;
        (s, v - s)
    } else {
        let t = 0.5 * v;
        (u - t, t)
    };
    [1.0 - s - t, s, t]
}

/// Jacobian of the last two barycentric coordinates of [`square_to_triangle`]
/// w.r.t. `(u, v)`, as rows `[∂b1/∂(u,v), ∂b2/∂(u,v)]`.
pub fn square_to_triangle_jacobian(u: f64, v: f64) -> [[f64; 2]; 2] {
    if v > u {
        [[0.5, 0.0], [-0.5, 1.0]]
    } else {
        [[1.0, -0.5], [0.0, 0.5]]
    }
}

/// Splits the longest edge at its midpoint; children keep the parent winding.
pub fn split_longest_edge(tri: &Triangle) -> Result<(Triangle, Triangle)> {
    if tri.is_degenerate() {
        return Err(Error::DegenerateTriangle { face: None });
    }
    let e = tri.longest_edge();
    let (a, b, c) = (tri.vertex(e.from), tri.vertex(e.to), tri.vertex(e.opposite));
    let m = (a + b) * 0.5;
    Ok((Triangle::new(a, m, c), Triangle::new(m, b, c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn random_triangle(rng: &mut ChaCha8Rng) -> Triangle {
        loop {
            let mut p = || v(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let t = Triangle::new(p(), p(), p());
            if !t.is_degenerate() {
                return t;
            }
        }
    }

    fn rel_close(a: &Vec3, b: &Vec3, scale: f64, tol: f64) -> bool {
        (a - b).norm() <= tol * scale.max(1.0)
    }

    #[test]
    fn canonicalize_identity_case() {
        let t = Triangle::new(v(0.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.5, 0.5, 0.0));
        let (ct, xf) = canonicalize(&t).unwrap();
        assert!((ct.apex - Vec2::new(0.5, 0.5)).norm() < 1e-12);
        assert!((ct.scale - 1.0).abs() < 1e-15);
        assert_eq!(xf.scale, ct.scale);
    }

    #[test]
    fn canonicalize_right_isoceles() {
        let t = Triangle::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0));
        let (ct, _) = canonicalize(&t).unwrap();
        assert!((ct.apex - Vec2::new(0.5, 0.5)).norm() < 1e-12, "{:?}", ct.apex);
        assert!((ct.scale - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn canonicalize_rejects_collinear() {
        let t = Triangle::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(2.0, 0.0, 0.0));
        assert!(matches!(canonicalize(&t), Err(Error::DegenerateTriangle { .. })));
    }

    #[test]
    fn canonical_round_trip_and_lens() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let t = random_triangle(&mut rng);
            let (ct, xf) = canonicalize(&t).unwrap();
            assert!(ct.apex.x > 0.0 && ct.apex.x <= 3f64.sqrt() / 2.0 + 1e-12);
            assert!(ct.in_lens(1e-12));
            assert!(ct.apex.y <= 0.5 + 1e-12 && ct.apex.y >= -1e-12);
            let back = uncanonicalize(&ct.vertices(), &xf);
            let scale = t.longest_edge_length();
            for w in t.vertices() {
                assert!(
                    back.iter().any(|b| rel_close(b, &w, scale, 1e-9)),
                    "vertex {w:?} not reproduced"
                );
            }
            let c = xf.to_world(&ct.centroid());
            assert!(rel_close(&c, &t.centroid(), scale, 1e-9));
            // transform then inverse
            let p = t.v1 * 0.2 + t.v2 * 0.3 + t.v3 * 0.5;
            let q = xf.to_canonical(&p);
            assert!(q.z.abs() < 1e-12);
            assert!(rel_close(&xf.to_world(&q.xy()), &p, scale, 1e-12));
        }
    }

    #[test]
    fn canonicalize_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let t = random_triangle(&mut rng);
            let (ref_ct, _) = canonicalize(&t).unwrap();
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            for p in perms {
                let tp = Triangle::new(t.vertex(p[0]), t.vertex(p[1]), t.vertex(p[2]));
                let (ct, _) = canonicalize(&tp).unwrap();
                assert!((ct.apex - ref_ct.apex).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn uncanonicalize_stays_on_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_triangle(&mut rng);
        let (ct, xf) = canonicalize(&t).unwrap();
        let pts: Vec<Vec2> = (0..50)
            .map(|i| ct.point(square_to_triangle(i as f64 / 50.0, ((i * 7) % 50) as f64 / 50.0)))
            .collect();
        for p in uncanonicalize(&pts, &xf) {
            assert!(t.plane_distance(&p) <= 1e-9 * ct.scale);
        }
        assert!(uncanonicalize(&[], &xf).is_empty());
    }

    #[test]
    fn square_root_corners() {
        let t = Triangle::new(v(1.0, 2.0, 3.0), v(-1.0, 0.5, 2.0), v(0.0, 4.0, -1.0));
        assert_eq!(square_root_point(&t, 0.0, 0.3), t.v1);
        assert!((square_root_point(&t, 1.0, 1.0) - t.v2).norm() < 1e-15);
        assert!((square_root_point(&t, 1.0, 0.0) - t.v3).norm() < 1e-15);
    }

    #[test]
    fn uniform_samples_inside() {
        let t = Triangle::new(v(0.0, 0.0, 0.0), v(3.0, 0.0, 1.0), v(0.0, 2.0, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = sample_uniform_triangle(&t, 10, &mut rng);
        assert_eq!(pts.len(), 10);
        for p in &pts {
            let b = t.barycentric(p);
            assert!(b.iter().all(|&x| x > 0.0 && x < 1.0));
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(sample_uniform_triangle(&t, 0, &mut rng).is_empty());
    }

    #[test]
    fn square_to_triangle_vertices() {
        assert_eq!(square_to_triangle(0.0, 0.0), [1.0, 0.0, 0.0]);
        assert_eq!(square_to_triangle(1.0, 0.0), [0.0, 1.0, 0.0]);
        assert_eq!(square_to_triangle(0.0, 1.0), [0.0, 0.0, 1.0]);
        // continuous across the diagonal
        let a = square_to_triangle(0.4, 0.4);
        let b = square_to_triangle(0.4, 0.4 + 1e-12);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-11));
    }

    #[test]
    fn square_to_triangle_jacobian_matches_differences() {
        for &(u, v) in &[(0.2, 0.7), (0.8, 0.1), (0.5, 0.3)] {
            let j = square_to_triangle_jacobian(u, v);
            let h = 1e-7;
            for (k, (du, dv)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
                let p = square_to_triangle(u + du, v + dv);
                let m = square_to_triangle(u - du, v - dv);
                for r in 0..2 {
                    let fd = (p[r + 1] - m[r + 1]) / (2.0 * h);
                    assert!((fd - j[r][k]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn split_legs_two_and_one() {
        // hypotenuse (2,0)→(0,1) is the longest edge (√5 > 2)
        let t = Triangle::new(v(0.0, 0.0, 0.0), v(2.0, 0.0, 0.0), v(0.0, 1.0, 0.0));
        let (a, b) = split_longest_edge(&t).unwrap();
        let m = v(1.0, 0.5, 0.0);
        assert!(a.vertices().contains(&m) && b.vertices().contains(&m));
        assert!((a.area() - 0.5).abs() < 1e-15 && (b.area() - 0.5).abs() < 1e-15);
        assert!(a.area() < t.area() && b.area() < t.area());
        assert!(a.cross().dot(&t.cross()) > 0.0 && b.cross().dot(&t.cross()) > 0.0);
    }

    #[test]
    fn split_flat_obtuse() {
        let t = Triangle::new(v(0.0, 0.0, 0.0), v(2.0, 0.0, 0.0), v(1.0, 0.5, 0.0));
        let (a, b) = split_longest_edge(&t).unwrap();
        assert_eq!(a.v2, v(1.0, 0.0, 0.0));
        assert_eq!(b.v1, v(1.0, 0.0, 0.0));
        assert!((a.area() - 0.25).abs() < 1e-15 && (b.area() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn split_equilateral_is_deterministic() {
        let h = 3f64.sqrt() / 2.0;
        let t = Triangle::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.5, h, 0.0));
        let first = split_longest_edge(&t).unwrap();
        for _ in 0..10 {
            assert_eq!(split_longest_edge(&t).unwrap(), first);
        }
        let rotated = Triangle::new(t.v2, t.v3, t.v1);
        let (a, b) = split_longest_edge(&rotated).unwrap();
        // same geometric split: the shared midpoint is the same point
        let m = |x: &Triangle, y: &Triangle| {
            x.vertices().into_iter().find(|p| y.vertices().contains(p) && !t.vertices().contains(p))
        };
        assert_eq!(m(&a, &b), m(&first.0, &first.1));
    }

    #[test]
    fn recursive_splitting_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let t = random_triangle(&mut rng);
            let mut level = vec![t];
            for depth in 0..8 {
                let mut next = Vec::new();
                for p in &level {
                    let (a, b) = split_longest_edge(p).unwrap();
                    for c in [a, b] {
                        assert!(c.longest_edge_length() <= p.longest_edge_length() * (1.0 + 1e-12));
                        next.push(c);
                    }
                }
                let area: f64 = next.iter().map(|c| c.area()).sum();
                assert!((area - t.area()).abs() <= 1e-12 * t.area() * (depth + 2) as f64);
                level = next;
            }
            for c in &level {
                assert!(c.area() <= t.area() / 256.0 * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn face_areas_basic() {
        let m = Mesh::new(
            vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)],
            vec![[0, 1, 2], [0, 1, 2]],
        )
        .unwrap();
        let a = face_areas(&m);
        assert_eq!(a, vec![0.5, 0.5]);
        assert!(Mesh::new(vec![v(0.0, 0.0, 0.0)], vec![[0, 0, 9]]).is_err());
    }

    #[test]
    fn icosahedron_faces_equal() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts = Vec::new();
        for &(a, b) in &[(1.0, phi), (-1.0, phi), (1.0, -phi), (-1.0, -phi)] {
            verts.push(v(0.0, a, b));
            verts.push(v(a, b, 0.0));
            verts.push(v(b, 0.0, a));
        }
        let r = verts[0].norm();
        let verts: Vec<Vec3> = verts.into_iter().map(|p| p / r).collect();
        // faces = triples of mutually adjacent vertices (edge length 2/r)
        let e = 2.0 / r;
        let mut faces = Vec::new();
        for i in 0..12 {
            for j in i + 1..12 {
                for k in j + 1..12 {
                    let adj = |a: usize, b: usize| ((verts[a] - verts[b]).norm() - e).abs() < 1e-9;
                    if adj(i, j) && adj(j, k) && adj(i, k) {
                        faces.push([i, j, k]);
                    }
                }
            }
        }
        assert_eq!(faces.len(), 20);
        let m = Mesh::new(verts, faces).unwrap();
        let a = face_areas(&m);
        for x in &a {
            assert!((x - a[0]).abs() < 1e-12);
        }
    }
}
