//! Chi-square uniformity of the two square → triangle maps.

use otsample_core::geometry::{square_root_point, square_to_triangle, Triangle, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SAMPLES: usize = 50_000;
const SIDE: usize = 8;

/// Bin of barycentric `(b1, b2)` among `SIDE²` congruent sub-triangles.
fn bin(b1: f64, b2: f64) -> usize {
    let (x, y) = (b1 * SIDE as f64, b2 * SIDE as f64);
    let (i, j) = ((x.floor() as usize).min(SIDE - 1), (y.floor() as usize).min(SIDE - 1));
    let up = (x - i as f64) + (y - j as f64) < 1.0;
    // row j holds 2(SIDE − j) − 1 cells; clamp stray boundary points
    let i = i.min(SIDE - 1 - j);
    let row_start: usize = (0..j).map(|r| 2 * (SIDE - r) - 1).sum();
    let off = if up || i + j == SIDE - 1 { 2 * i } else { 2 * i + 1 };
    row_start + off
}

fn chi_square(counts: &[usize]) -> f64 {
    let e = SAMPLES as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

fn critical(bins: usize) -> f64 {
    ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999)
}

#[test]
fn bins_cover_triangle() {
    let mut seen = vec![false; SIDE * SIDE];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200_000 {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        if a + b < 1.0 {
            seen[bin(a, b)] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn square_to_triangle_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counts = vec![0usize; SIDE * SIDE];
    for _ in 0..SAMPLES {
        let b = square_to_triangle(rng.random(), rng.random());
        counts[bin(b[1], b[2])] += 1;
    }
    let chi = chi_square(&counts);
    assert!(chi < critical(counts.len()), "chi² {chi}");
}

#[test]
fn square_root_sampler_is_uniform() {
    let tri = Triangle::new(
        Vec3::new(0.3, -1.0, 2.0),
        Vec3::new(2.0, 0.5, 1.0),
        Vec3::new(-0.5, 1.5, 0.0),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut counts = vec![0usize; SIDE * SIDE];
    for _ in 0..SAMPLES {
        let p = square_root_point(&tri, rng.random(), rng.random());
        let b = tri.barycentric(&p);
        counts[bin(b[1], b[2])] += 1;
    }
    let chi = chi_square(&counts);
    assert!(chi < critical(counts.len()), "chi² {chi}");
}
