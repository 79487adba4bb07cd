//! Exact W2 between equal-size uniform point sets via linear assignment.

use nalgebra::SVector;

use crate::{Error, Result};

/// Largest instance accepted by [`hungarian_w2`].
pub const MAX_ASSIGNMENT_SIZE: usize = 4096;

/// Minimum-cost perfect matching on a dense square cost matrix (row-major).
///
/// Shortest augmenting path with potentials, O(n³). Returns `assignment`
/// with row `i` matched to column `assignment[i]`.
pub fn solve_assignment(costs: &[f64], n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    debug_assert_eq!(costs.len(), n * n);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &costs[(i0 - 1) * n..i0 * n];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// `min_σ (1/n) Σ ‖P_i − Q_σ(i)‖²` and the minimizing permutation.
pub fn hungarian_w2<const D: usize>(
    p: &[SVector<f64, D>],
    q: &[SVector<f64, D>],
) -> Result<(f64, Vec<usize>)> {
    if p.len() != q.len() {
        return Err(Error::SizeMismatch(p.len(), q.len()));
    }
    let n = p.len();
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(Error::TooLarge {
            size: n,
            limit: MAX_ASSIGNMENT_SIZE,
        });
    }
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    let mut costs = Vec::with_capacity(n * n);
    for pi in p {
        for qj in q {
            costs.push((pi - qj).norm_squared());
        }
    }
    let assignment = solve_assignment(&costs, n);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i * n + j])
        .sum();
    Ok((total / n as f64, assignment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type V2 = Vector2<f64>;

    /// Exhaustive minimum over all permutations (Heap's algorithm).
    fn brute_force(p: &[V2], q: &[V2]) -> f64 {
        let n = p.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let cost = |perm: &[usize]| -> f64 {
            perm.iter().enumerate().map(|(i, &j)| (p[i] - q[j]).norm_squared()).sum::<f64>() / n as f64
        };
        let mut best = cost(&perm);
        let mut c = vec![0usize; n];
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                best = best.min(cost(&perm));
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best
    }

    #[test]
    fn identical_sets_cost_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p: Vec<V2> = (0..10).map(|_| V2::new(rng.random(), rng.random())).collect();
        let mut q = p.clone();
        q.reverse();
        let (c, a) = hungarian_w2(&p, &q).unwrap();
        assert!(c.abs() < 1e-15);
        for (i, &j) in a.iter().enumerate() {
            assert_eq!(p[i], q[j]);
        }
        let (c, _) = hungarian_w2(&[V2::new(0.0, 0.0), V2::new(1.0, 0.0)], &[V2::new(1.0, 0.0), V2::new(0.0, 0.0)]).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=7 {
            for _ in 0..5 {
                let p: Vec<V2> = (0..n).map(|_| V2::new(rng.random(), rng.random())).collect();
                let q: Vec<V2> = (0..n).map(|_| V2::new(rng.random(), rng.random())).collect();
                let (c, _) = hungarian_w2(&p, &q).unwrap();
                let b = brute_force(&p, &q);
                assert!((c - b).abs() <= 1e-12, "n={n}: {c} vs {b}");
                let (c2, _) = hungarian_w2(&q, &p).unwrap();
                assert!((c - c2).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn size_mismatch() {
        let p = vec![V2::new(0.0, 0.0)];
        assert!(matches!(hungarian_w2(&p, &[]), Err(Error::SizeMismatch(1, 0))));
    }
}
