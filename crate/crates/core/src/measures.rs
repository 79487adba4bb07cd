//! Discrete measures and exact grid quadrature of canonical triangles.

use nalgebra::SVector;

use crate::geometry::{CanonicalTriangle, Vec2};
use crate::{Error, Result};

/// Clipped cells lighter than this (in unit-square area) are dropped.
pub const MIN_CELL_AREA: f64 = 1e-16;

/// Weighted point masses; weights are positive and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<const D: usize> {
    pub points: Vec<SVector<f64, D>>,
    pub weights: Vec<f64>,
}

pub type Measure2 = DiscreteMeasure<2>;
pub type Measure3 = DiscreteMeasure<3>;

impl<const D: usize> DiscreteMeasure<D> {
    /// Builds a measure from raw weights, normalizing them to unit mass.
    pub fn new(points: Vec<SVector<f64, D>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if points.len() != weights.len() {
            return Err(Error::SizeMismatch(points.len(), weights.len()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument(
                "measure weights must be positive".into(),
            ));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mean(&self) -> SVector<f64, D> {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(SVector::zeros(), |acc, (p, w)| acc + p * *w)
    }

    /// `Σ w ‖x − c‖²` about an arbitrary center.
    pub fn second_moment_about(&self, c: &SVector<f64, D>) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * (p - c).norm_squared())
            .sum()
    }

    pub fn variance(&self) -> f64 {
        self.second_moment_about(&self.mean())
    }
}

/// Uniform measure `1/n` on a point set.
pub fn measure_from_points<const D: usize>(
    points: &[SVector<f64, D>],
) -> Result<DiscreteMeasure<D>> {
    if points.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let w = 1.0 / points.len() as f64;
    Ok(DiscreteMeasure {
        points: points.to_vec(),
        weights: vec![w; points.len()],
    })
}

/// One grid cell that meets the triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub ix: usize,
    pub iy: usize,
    /// Area of cell ∩ triangle.
    pub area: f64,
    /// Centroid of cell ∩ triangle.
    pub centroid: Vec2,
}

impl GridCell {
    pub fn center(&self, resolution: usize) -> Vec2 {
        let h = 1.0 / resolution as f64;
        Vec2::new((self.ix as f64 + 0.5) * h, (self.iy as f64 + 0.5) * h)
    }
}

/// Exact cell-by-cell intersection of a canonical triangle with a regular
/// `resolution × resolution` grid on the unit square.
#[derive(Debug, Clone)]
pub struct GridQuadrature {
    pub resolution: usize,
    pub cells: Vec<GridCell>,
}

impl GridQuadrature {
    pub fn new(ct: &CanonicalTriangle, resolution: usize) -> Result<Self> {
        if resolution < 4 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be at least 4, got {resolution}"
            )));
        }
        let h = 1.0 / resolution as f64;
        let tri = ct.vertices().to_vec();
        let mut cells = Vec::new();
        for iy in 0..resolution {
            let (y0, y1) = (iy as f64 * h, (iy + 1) as f64 * h);
            let band = clip(&clip(&tri, Axis::Y, y0, true), Axis::Y, y1, false);
            if band.len() < 3 {
                continue;
            }
            let (xmin, xmax) = band
                .iter()
                .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.x), b.max(p.x)));
            let ix0 = ((xmin / h).floor().max(0.0)) as usize;
            let ix1 = (((xmax / h).ceil()) as usize).min(resolution);
            for ix in ix0..ix1 {
                let (x0, x1) = (ix as f64 * h, (ix + 1) as f64 * h);
                let poly = clip(&clip(&band, Axis::X, x0, true), Axis::X, x1, false);
                if poly.len() < 3 {
                    continue;
                }
                let (area, centroid) = polygon_area_centroid(&poly);
                if area < MIN_CELL_AREA {
                    continue;
                }
                cells.push(GridCell {
                    ix,
                    iy,
                    area,
                    centroid,
                });
            }
        }
        if cells.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        Ok(Self { resolution, cells })
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Normalized measure supported on the clipped-cell centroids.
    pub fn to_measure(&self) -> Measure2 {
        let total = self.total_area();
        DiscreteMeasure {
            points: self.cells.iter().map(|c| c.centroid).collect(),
            weights: self.cells.iter().map(|c| c.area / total).collect(),
        }
    }
}

/// Quadrature measure of the canonical triangle at the given grid resolution.
pub fn triangle_grid_measure(ct: &CanonicalTriangle, resolution: usize) -> Result<Measure2> {
    Ok(GridQuadrature::new(ct, resolution)?.to_measure())
}

/// Smallest resolution ≥ `base` whose grid is expected to give at least
/// `min_support` cells on the triangle.
pub fn resolution_for_support(ct: &CanonicalTriangle, base: usize, min_support: usize) -> usize {
    let area = ct.area().max(1e-12);
    // boundary cells make the real count larger than area·r²
    let needed = ((min_support as f64) / area).sqrt().ceil() as usize;
    base.max(needed).max(4)
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

/// Sutherland–Hodgman clip of a convex polygon against `coord ≥ c` (`keep_above`)
/// or `coord ≤ c`.
fn clip(poly: &[Vec2], axis: Axis, c: f64, keep_above: bool) -> Vec<Vec2> {
    let coord = |p: &Vec2| match axis {
        Axis::X => p.x,
        Axis::Y => p.y,
    };
    let inside = |p: &Vec2| {
        if keep_above {
            coord(p) >= c
        } else {
            coord(p) <= c
        }
    };
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        let (ci, pi) = (inside(&cur), inside(&prev));
        if ci != pi {
            let t = (c - coord(&prev)) / (coord(&cur) - coord(&prev));
            let mut x = prev + (cur - prev) * t;
            match axis {
                Axis::X => x.x = c,
                Axis::Y => x.y = c,
            }
            out.push(x);
        }
        if ci {
            out.push(cur);
        }
    }
    out
}

fn polygon_area_centroid(poly: &[Vec2]) -> (f64, Vec2) {
    // shoelace relative to the first vertex for accuracy on tiny pieces
    let o = poly[0];
    let mut a2 = 0.0;
    let mut c = Vec2::zeros();
    for i in 1..poly.len() - 1 {
        let (p, q) = (poly[i] - o, poly[i + 1] - o);
        let cr = p.x * q.y - p.y * q.x;
        a2 += cr;
        c += (p + q) * cr;
    }
    if a2.abs() == 0.0 {
        return (0.0, o);
    }
    (0.5 * a2.abs(), o + c / (3.0 * a2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn right_triangle() -> CanonicalTriangle {
        // legs of length 1 along both axes: vertices (0,0),(0,1),(1,0)
        CanonicalTriangle::from_apex(Vec2::new(1.0, 0.0))
    }

    #[test]
    fn grid_measure_total_mass_and_centroid() {
        let ct = CanonicalTriangle::from_apex(Vec2::new(0.5, 0.5));
        let m = triangle_grid_measure(&ct, 500).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        let q = GridQuadrature::new(&ct, 500).unwrap();
        assert!((q.total_area() - ct.area()).abs() < 1e-12);
        assert!((m.mean() - ct.centroid()).norm() < 2.0 / 500.0);
        for p in &m.points {
            assert!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0);
            let b = ct.barycentric(p);
            assert!(b.iter().all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn cells_outside_have_no_mass() {
        let ct = CanonicalTriangle::from_apex(Vec2::new(0.3, 0.2));
        let q = GridQuadrature::new(&ct, 64).unwrap();
        // No cell beyond the apex column can intersect.
        assert!(q.cells.iter().all(|c| (c.ix as f64) / 64.0 < 0.3));
        assert!(q.cells.iter().all(|c| c.area > 0.0));
    }

    #[test]
    fn second_moment_right_triangle() {
        // Var_x = Var_y = 1/18 for the unit right triangle.
        let m = triangle_grid_measure(&right_triangle(), 500).unwrap();
        let var = m.variance();
        assert!((var - 1.0 / 9.0).abs() < 0.01 / 9.0, "{var}");
    }

    #[test]
    fn moments_converge_with_resolution() {
        let ct = right_triangle();
        let exact_mean = ct.centroid();
        let mut last = f64::INFINITY;
        for r in [125, 250, 500] {
            let m = triangle_grid_measure(&ct, r).unwrap();
            // clipped centroids make the first moment exact
            assert!((m.mean() - exact_mean).norm() < 1e-12);
            let err = (m.variance() - 1.0 / 9.0).abs();
            assert!(err < last, "r={r} err={err} last={last}");
            last = err;
        }
    }

    #[test]
    fn rejects_tiny_resolution() {
        assert!(triangle_grid_measure(&right_triangle(), 3).is_err());
    }

    #[test]
    fn uniform_measures() {
        let pts = vec![Vec2::new(0.0, 0.0); 4];
        let m = measure_from_points(&pts).unwrap();
        assert_eq!(m.weights, vec![0.25; 4]);
        let one = measure_from_points(&pts[..1]).unwrap();
        assert_eq!(one.weights, vec![1.0]);
        let many: Vec<Vec2> = (0..465).map(|i| Vec2::new(i as f64, 0.0)).collect();
        let m = measure_from_points(&many).unwrap();
        assert!(m.weights.iter().all(|&w| w == 1.0 / 465.0));
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        let empty: Vec<Vec2> = Vec::new();
        assert!(matches!(measure_from_points(&empty), Err(Error::EmptyMeasure)));
    }

    #[test]
    fn support_resolution_grows_for_thin_triangles() {
        let thin = CanonicalTriangle::from_apex(Vec2::new(0.01, 0.3));
        let r = resolution_for_support(&thin, 100, 480);
        let q = GridQuadrature::new(&thin, r).unwrap();
        assert!(q.cells.len() >= 480);
    }
}
