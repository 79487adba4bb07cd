//! Mesh sampling: multinomial budget allocation over faces, refinement of
//! over-full faces and per-face dispatch to the sampling back-ends.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::geometry::{
    canonicalize, face_areas, sample_uniform_triangle, split_longest_edge, uncanonicalize,
    CanonicalTriangle, Mesh, Triangle, Vec2, Vec3,
};
use crate::measures::{resolution_for_support, GridQuadrature};
use crate::model::loss::map_to_triangle;
use crate::model::mlp::{predict_block, MlpParams, NUM_BLOCKS};
use crate::ot::{lloyd_cvt, LloydOptions};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Largest number of points a single (leaf) face receives.
pub const MAX_FACE_POINTS: usize = NUM_BLOCKS;
/// Face-count limit of the oracle back-end on meshes.
pub const ORACLE_MAX_FACES: usize = 200;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub face_ids: Option<Vec<usize>>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub enum SamplerMethod {
    Uniform,
    Oracle { resolution: usize, lloyd: LloydOptions },
    Learned(Arc<MlpParams>),
}

impl SamplerMethod {
    pub fn oracle() -> Self {
        SamplerMethod::Oracle {
            resolution: 100,
            lloyd: LloydOptions {
                energy_rtol: crate::model::dataset::DATASET_ENERGY_RTOL,
                ..LloydOptions::default()
            },
        }
    }

    pub fn learned(params: MlpParams) -> Result<Self> {
        params.validate()?;
        Ok(SamplerMethod::Learned(Arc::new(params)))
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplerMethod::Uniform => "uniform",
            SamplerMethod::Oracle { .. } => "oracle",
            SamplerMethod::Learned(_) => "learned",
        }
    }
}

/// Draws `Multinomial(n, areas / Σ areas)` by sequential binomials.
pub fn allocate_points<R: Rng + ?Sized>(areas: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if areas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidArgument("areas must be finite and nonnegative".into()));
    }
    let mut rest_mass: f64 = areas.iter().sum();
    if !(rest_mass > 0.0) {
        return Err(Error::AllZeroAreas);
    }
    let last = areas.iter().rposition(|&a| a > 0.0).unwrap_or(0);
    let mut counts = vec![0; areas.len()];
    let mut rest = n;
    for (i, &a) in areas.iter().enumerate() {
        if rest == 0 {
            break;
        }
        if i == last {
            counts[i] = rest;
            break;
        }
        if a == 0.0 {
            continue;
        }
        let p = (a / rest_mass).clamp(0.0, 1.0);
        let c = Binomial::new(rest as u64, p)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sample(rng) as usize;
        counts[i] = c;
        rest -= c;
        rest_mass -= a;
    }
    Ok(counts)
}

/// One leaf of a refined face; `path` identifies its split history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf {
    pub triangle: Triangle,
    pub count: usize,
    pub path: u64,
}

/// Splits `tri` at longest-edge midpoints until every leaf holds at most
/// [`MAX_FACE_POINTS`] points, reallocating counts binomially by child area.
/// Randomness is keyed by `(seed, face, path)`.
pub fn refine_allocation(tri: &Triangle, count: usize, seed: u64, face: usize) -> Result<Vec<Leaf>> {
    if count <= MAX_FACE_POINTS {
        return Err(Error::InvalidArgument(format!(
            "refinement needs more than {MAX_FACE_POINTS} points, got {count}"
        )));
    }
    if tri.is_degenerate() {
        return Err(Error::DegenerateTriangle { face: Some(face) });
    }
    let mut leaves = Vec::new();
    let mut stack = vec![(*tri, count, 1u64)];
    while let Some((t, c, path)) = stack.pop() {
        if c <= MAX_FACE_POINTS {
            if c > 0 {
                leaves.push(Leaf { triangle: t, count: c, path });
            }
            continue;
        }
        let (a, b) = split_longest_edge(&t).map_err(|_| Error::DegenerateTriangle { face: Some(face) })?;
        let mut rng = stream(seed, Purpose::Refine, face as u64, path);
        let counts = allocate_points(&[a.area(), b.area()], c, &mut rng)?;
        let child = |bit: u64| path.wrapping_mul(2).wrapping_add(bit);
        // pushed in reverse so leaves come out in depth-first left-to-right order
        stack.push((b, counts[1], child(1)));
        stack.push((a, counts[0], child(0)));
    }
    Ok(leaves)
}

/// `count` points on a canonical triangle.
pub fn sample_canonical<R: Rng + ?Sized>(
    ct: &CanonicalTriangle,
    count: usize,
    method: &SamplerMethod,
    rng: &mut R,
) -> Result<Vec<Vec2>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    match method {
        SamplerMethod::Uniform => {
            let [o, b, a] = ct.vertices();
            let tri = Triangle::new(Vec3::new(o.x, o.y, 0.0), Vec3::new(b.x, b.y, 0.0), Vec3::new(a.x, a.y, 0.0));
            Ok(sample_uniform_triangle(&tri, count, rng)
                .into_iter()
                .map(|p| Vec2::new(p.x, p.y))
                .collect())
        }
        SamplerMethod::Learned(params) => {
            if count > MAX_FACE_POINTS {
                return Err(Error::EllOutOfRange(count));
            }
            let p: f64 = rng.sample(StandardNormal);
            let uv = predict_block(params, &ct.apex, p, count)?;
            Ok(map_to_triangle(ct, &uv))
        }
        SamplerMethod::Oracle { resolution, lloyd } => {
            let res = resolution_for_support(ct, *resolution, 30 * count);
            let quad = GridQuadrature::new(ct, res)?.to_measure();
            Ok(lloyd_cvt(&quad, count, rng, lloyd)?.sites)
        }
    }
}

/// `count` points on a world-space triangle (`count ≤ 30` for the learned
/// and oracle back-ends).
pub fn sample_triangle<R: Rng + ?Sized>(
    tri: &Triangle,
    count: usize,
    method: &SamplerMethod,
    rng: &mut R,
) -> Result<Vec<Vec3>> {
    match method {
        SamplerMethod::Uniform => Ok(sample_uniform_triangle(tri, count, rng)),
        _ => {
            let (ct, xf) = canonicalize(tri)?;
            Ok(uncanonicalize(&sample_canonical(&ct, count, method, rng)?, &xf))
        }
    }
}

/// Samples exactly `n` points on `mesh`. Results depend only on
/// `(mesh, n, method, seed)`, not on the number of worker threads.
pub fn sample_mesh(mesh: &Mesh, n: usize, method: &SamplerMethod, seed: u64, with_normals: bool) -> Result<PointCloud> {
    let areas: Vec<f64> = mesh
        .triangles()
        .map(|t| if t.is_degenerate() { 0.0 } else { t.area() })
        .collect();
    if !areas.iter().any(|&a| a > 0.0) {
        return Err(Error::DegenerateMesh);
    }
    if matches!(method, SamplerMethod::Oracle { .. }) && mesh.faces.len() > ORACLE_MAX_FACES {
        return Err(Error::TooLarge {
            size: mesh.faces.len(),
            limit: ORACLE_MAX_FACES,
        });
    }
    let counts = allocate_points(&areas, n, &mut stream(seed, Purpose::Allocation, 0, 0))?;
    let per_face: Vec<Result<Vec<Vec3>>> = counts
        .par_iter()
        .enumerate()
        .map(|(f, &c)| {
            if c == 0 {
                return Ok(Vec::new());
            }
            let tri = mesh.triangle(f);
            let leaves = if c > MAX_FACE_POINTS {
                refine_allocation(&tri, c, seed, f)?
            } else {
                vec![Leaf { triangle: tri, count: c, path: 1 }]
            };
            let mut pts = Vec::with_capacity(c);
            for leaf in leaves {
                let mut rng = stream(seed, Purpose::Face, f as u64, leaf.path);
                pts.extend(sample_triangle(&leaf.triangle, leaf.count, method, &mut rng)?);
            }
            Ok(pts)
        })
        .collect();
    let mut points = Vec::with_capacity(n);
    let mut face_ids = Vec::with_capacity(n);
    for (f, pts) in per_face.into_iter().enumerate() {
        let pts = pts?;
        face_ids.extend(std::iter::repeat_n(f, pts.len()));
        points.extend(pts);
    }
    let normals = with_normals.then(|| {
        face_ids
            .iter()
            .map(|&f| mesh.triangle(f).normal().unwrap_or_else(Vec3::zeros))
            .collect()
    });
    Ok(PointCloud {
        points,
        face_ids: Some(face_ids),
        normals,
    })
}

pub fn sample_mesh_timed(
    mesh: &Mesh,
    n: usize,
    method: &SamplerMethod,
    seed: u64,
    with_normals: bool,
) -> Result<(PointCloud, Duration)> {
    let t = Instant::now();
    let cloud = sample_mesh(mesh, n, method, seed, with_normals)?;
    Ok((cloud, t.elapsed()))
}

/// Total area of every face, used for partition checks.
pub fn mesh_area(mesh: &Mesh) -> f64 {
    face_areas(mesh).iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mlp::MlpParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn square_mesh() -> Mesh {
        Mesh::new(
            vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(1.0, 1.0, 0.0), v(0.0, 1.0, 0.0)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn allocation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(allocate_points(&[1.0, 3.0], 0, &mut rng).unwrap(), vec![0, 0]);
        assert_eq!(allocate_points(&[2.5], 17, &mut rng).unwrap(), vec![17]);
        assert_eq!(allocate_points(&[0.0, 2.0, 0.0], 9, &mut rng).unwrap(), vec![0, 9, 0]);
        assert!(matches!(allocate_points(&[0.0, 0.0], 3, &mut rng), Err(Error::AllZeroAreas)));
        let mut mean = 0.0;
        for s in 0..200 {
            let c = allocate_points(&[1.0, 3.0], 1000, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
            assert_eq!(c[0] + c[1], 1000);
            mean += c[0] as f64 / 200.0;
        }
        assert!((mean - 250.0).abs() < 20.0, "{mean}");
    }

    #[test]
    fn refinement_examples() {
        let tri = Triangle::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0));
        let one = refine_allocation(&tri, 31, 1, 0).unwrap();
        assert!(one.len() <= 2);
        assert_eq!(one.iter().map(|l| l.count).sum::<usize>(), 31);
        let many = refine_allocation(&tri, 200, 1, 0).unwrap();
        assert!(many.iter().all(|l| l.count <= 30 && l.count > 0));
        assert_eq!(many.iter().map(|l| l.count).sum::<usize>(), 200);
        assert!(matches!(refine_allocation(&tri, 30, 1, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn uniform_sampling_is_exact_and_on_surface() {
        let m = square_mesh();
        let c = sample_mesh(&m, 1000, &SamplerMethod::Uniform, 3, true).unwrap();
        assert_eq!(c.len(), 1000);
        let ids = c.face_ids.as_ref().unwrap();
        for (p, &f) in c.points.iter().zip(ids) {
            let b = m.triangle(f).barycentric(p);
            assert!(b.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
        }
        let n = c.normals.unwrap();
        assert!(n.iter().all(|x| (x.norm() - 1.0).abs() < 1e-9 && (x.z - 1.0).abs() < 1e-12));
        assert_eq!(sample_mesh(&m, 1000, &SamplerMethod::Uniform, 3, false).unwrap().points, c.points);
    }

    #[test]
    fn degenerate_faces_get_nothing() {
        let m = Mesh::new(
            vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(2.0, 0.0, 0.0)],
            vec![[0, 1, 3], [0, 1, 2]],
        )
        .unwrap();
        let c = sample_mesh(&m, 50, &SamplerMethod::Uniform, 0, false).unwrap();
        assert_eq!(c.len(), 50);
        assert!(c.face_ids.unwrap().iter().all(|&f| f == 1));
        let flat = Mesh::new(vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(2.0, 0.0, 0.0)], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(sample_mesh(&flat, 5, &SamplerMethod::Uniform, 0, false), Err(Error::DegenerateMesh)));
    }

    #[test]
    fn learned_back_end_runs_through_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let method = SamplerMethod::learned(MlpParams::init(8, &mut rng)).unwrap();
        let m = square_mesh();
        let c = sample_mesh(&m, 500, &method, 9, false).unwrap();
        assert_eq!(c.len(), 500);
        for (p, &f) in c.points.iter().zip(c.face_ids.as_ref().unwrap()) {
            let t = m.triangle(f);
            assert!(t.plane_distance(p).abs() <= 1e-9);
            assert!(t.barycentric(p).iter().all(|&x| x >= -1e-9));
        }
        assert_eq!(sample_mesh(&m, 500, &method, 9, false).unwrap(), c);
    }

    #[test]
    fn oracle_guard_and_run() {
        let m = square_mesh();
        let c = sample_mesh(&m, 12, &SamplerMethod::oracle(), 2, false).unwrap();
        assert_eq!(c.len(), 12);
        let big = Mesh::new(
            vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]; 201],
        )
        .unwrap();
        assert!(matches!(sample_mesh(&big, 5, &SamplerMethod::oracle(), 0, false), Err(Error::TooLarge { .. })));
    }
}
