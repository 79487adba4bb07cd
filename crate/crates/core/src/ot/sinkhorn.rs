//! Log-domain Sinkhorn with ε-scaling for the squared Euclidean cost.
//!
//! Potentials `f, g` parametrize the plan
//! `π_ij = a_i b_j exp((f_i + g_j − C_ij) / ε)`. Two values are reported:
//!
//! * `cost`: the primal transport cost `⟨π, C⟩`, which tends to `W2²` as ε → 0;
//! * `regularized_cost`: the dual objective, equal to `⟨π, C⟩ + ε KL(π | a⊗b)`
//!   at convergence. Its gradient w.r.t. support positions is exactly
//!   `Σ_j π_ij ∂C_ij/∂x_i`, which is what [`sinkhorn_grad_x`] returns.

use nalgebra::SVector;

use crate::measures::DiscreteMeasure;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Target regularization.
    pub epsilon: f64,
    /// Iteration cap over all ε stages.
    pub max_iter: usize,
    /// L1 marginal violation at which the final stage stops.
    pub tol: f64,
    /// First ε of the annealing schedule (clamped to be ≥ `epsilon`).
    pub epsilon_start: f64,
    /// Geometric factor between ε stages.
    pub scaling: f64,
    /// Iterations spent on each intermediate stage.
    pub stage_iter: usize,
}

impl SinkhornOptions {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_iter: 10_000,
            tol: 1e-9,
            epsilon_start: 0.1,
            scaling: 0.5,
            stage_iter: 3,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.scaling > 0.0 && self.scaling < 1.0) {
            return Err(Error::InvalidArgument("scaling must lie in (0,1)".into()));
        }
        Ok(())
    }

    fn schedule(&self) -> Vec<f64> {
        let mut eps = Vec::new();
        let mut e = self.epsilon_start.max(self.epsilon);
        while e > self.epsilon * (1.0 + 1e-12) {
            eps.push(e);
            e *= self.scaling;
        }
        eps.push(self.epsilon);
        eps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    pub cost: f64,
    pub regularized_cost: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub epsilon: f64,
    pub iterations: usize,
    pub marginal_error: f64,
    /// `false` when `max_iter` was reached before `tol`.
    pub converged: bool,
}

/// Dense squared-distance matrix, stored row-major and transposed.
struct Costs {
    n: usize,
    m: usize,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

impl Costs {
    fn new<const D: usize>(x: &[SVector<f64, D>], y: &[SVector<f64, D>]) -> Self {
        let (n, m) = (x.len(), y.len());
        let mut rows = Vec::with_capacity(n * m);
        for xi in x {
            for yj in y {
                rows.push((xi - yj).norm_squared());
            }
        }
        let mut cols = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                cols[j * n + i] = rows[i * m + j];
            }
        }
        Self { n, m, rows, cols }
    }
}

/// `out_i = −ε log Σ_j exp(logw_j + (pot_j − C_ij)/ε)` over rows of `c` (len × k).
fn softmin(c: &[f64], k: usize, logw: &[f64], pot: &[f64], eps: f64, out: &mut [f64]) {
    let inv = 1.0 / eps;
    let mut z = vec![0.0; k];
    for (i, o) in out.iter_mut().enumerate() {
        let row = &c[i * k..(i + 1) * k];
        let mut mx = f64::NEG_INFINITY;
        for j in 0..k {
            let v = logw[j] + (pot[j] - row[j]) * inv;
            z[j] = v;
            if v > mx {
                mx = v;
            }
        }
        let s: f64 = z.iter().map(|v| (v - mx).exp()).sum();
        *o = -eps * (mx + s.ln());
    }
}

fn l1_row_error(a: &[f64], f: &[f64], f_next: &[f64], eps: f64) -> f64 {
    a.iter()
        .zip(f.iter().zip(f_next))
        .map(|(ai, (fi, fn_))| ai * (((fi - fn_) / eps).exp() - 1.0).abs())
        .sum()
}

/// Row-normalized plan row `π_i· = a_i softmax_j(log b_j + (g_j − C_ij)/ε)`.
fn plan_row(c_row: &[f64], ai: f64, lb: &[f64], g: &[f64], eps: f64, out: &mut [f64]) {
    let inv = 1.0 / eps;
    let mut mx = f64::NEG_INFINITY;
    for j in 0..out.len() {
        let v = lb[j] + (g[j] - c_row[j]) * inv;
        out[j] = v;
        mx = mx.max(v);
    }
    let mut s = 0.0;
    for o in out.iter_mut() {
        *o = (*o - mx).exp();
        s += *o;
    }
    let scale = ai / s;
    out.iter_mut().for_each(|o| *o *= scale);
}

/// Primal cost of the row-normalized plan.
fn plan_cost(c: &Costs, a: &[f64], lb: &[f64], g: &[f64], eps: f64) -> f64 {
    let mut row = vec![0.0; c.m];
    let mut cost = 0.0;
    for i in 0..c.n {
        let cr = &c.rows[i * c.m..(i + 1) * c.m];
        plan_row(cr, a[i], lb, g, eps, &mut row);
        cost += row.iter().zip(cr).map(|(p, c)| p * c).sum::<f64>();
    }
    cost
}

fn ln_weights(w: &[f64]) -> Vec<f64> {
    w.iter().map(|x| x.ln()).collect()
}

/// Entropic OT between two discrete measures.
pub fn sinkhorn<const D: usize>(
    mu: &DiscreteMeasure<D>,
    nu: &DiscreteMeasure<D>,
    opts: &SinkhornOptions,
) -> Result<SinkhornResult> {
    opts.validate()?;
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let c = Costs::new(&mu.points, &nu.points);
    let (la, lb) = (ln_weights(&mu.weights), ln_weights(&nu.weights));
    let (n, m) = (c.n, c.m);
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut f_next = vec![0.0; n];
    let mut iterations = 0;
    let mut err = f64::INFINITY;
    let stages = opts.schedule();
    for (si, &eps) in stages.iter().enumerate() {
        let last = si + 1 == stages.len();
        let cap = if last {
            opts.max_iter.saturating_sub(iterations).max(1)
        } else {
            opts.stage_iter.max(1)
        };
        softmin(&c.cols, n, &la, &f, eps, &mut g);
        for _ in 0..cap {
            softmin(&c.rows, m, &lb, &g, eps, &mut f_next);
            iterations += 1;
            err = l1_row_error(&mu.weights, &f, &f_next, eps);
            if err <= opts.tol {
                break;
            }
            std::mem::swap(&mut f, &mut f_next);
            softmin(&c.cols, n, &la, &f, eps, &mut g);
        }
    }
    let eps = opts.epsilon;
    // f ← softmin(g) so the plan has exact row marginals and unit mass
    softmin(&c.rows, m, &lb, &g, eps, &mut f);
    let cost = plan_cost(&c, &mu.weights, &lb, &g, eps);
    let dual = dot(&mu.weights, &f) + dot(&nu.weights, &g);
    Ok(SinkhornResult {
        cost,
        regularized_cost: dual,
        f,
        g,
        epsilon: eps,
        iterations,
        marginal_error: err,
        converged: err <= opts.tol,
    })
}

/// Symmetric entropic self-transport `OT_ε(μ, μ)`; `f == g` in the result.
pub fn sinkhorn_self<const D: usize>(
    mu: &DiscreteMeasure<D>,
    opts: &SinkhornOptions,
) -> Result<SinkhornResult> {
    opts.validate()?;
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let c = Costs::new(&mu.points, &mu.points);
    let la = ln_weights(&mu.weights);
    let n = c.n;
    let mut f = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut iterations = 0;
    let mut err = f64::INFINITY;
    let stages = opts.schedule();
    for (si, &eps) in stages.iter().enumerate() {
        let last = si + 1 == stages.len();
        let cap = if last {
            opts.max_iter.saturating_sub(iterations).max(1)
        } else {
            opts.stage_iter.max(1)
        };
        for _ in 0..cap {
            softmin(&c.rows, n, &la, &f, eps, &mut t);
            iterations += 1;
            err = l1_row_error(&mu.weights, &f, &t, eps);
            if err <= opts.tol {
                break;
            }
            for (fi, ti) in f.iter_mut().zip(&t) {
                *fi = 0.5 * (*fi + ti);
            }
        }
    }
    let eps = opts.epsilon;
    softmin(&c.rows, n, &la, &f, eps, &mut t);
    let cost = plan_cost(&c, &mu.weights, &la, &f, eps);
    let dual = dot(&mu.weights, &f) + dot(&mu.weights, &t);
    Ok(SinkhornResult {
        cost,
        regularized_cost: dual,
        g: f.clone(),
        f,
        epsilon: eps,
        iterations,
        marginal_error: err,
        converged: err <= opts.tol,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient of `regularized_cost` w.r.t. the positions of `mu`:
/// `Σ_j π_ij · 2 (x_i − y_j)` with the plan recovered from the potentials.
pub fn sinkhorn_grad_x<const D: usize>(
    mu: &DiscreteMeasure<D>,
    nu: &DiscreteMeasure<D>,
    res: &SinkhornResult,
) -> Vec<SVector<f64, D>> {
    let eps = res.epsilon;
    mu.points
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut grad = SVector::<f64, D>::zeros();
            for (j, yj) in nu.points.iter().enumerate() {
                let d = xi - yj;
                let p = mu.weights[i]
                    * nu.weights[j]
                    * ((res.f[i] + res.g[j] - d.norm_squared()) / eps).exp();
                grad += d * (2.0 * p);
            }
            grad
        })
        .collect()
}

/// Gradient of the symmetric self-transport w.r.t. the (shared) positions.
pub fn sinkhorn_self_grad<const D: usize>(
    mu: &DiscreteMeasure<D>,
    res: &SinkhornResult,
) -> Vec<SVector<f64, D>> {
    sinkhorn_grad_x(mu, mu, res)
        .into_iter()
        .map(|g| g * 2.0)
        .collect()
}

/// Debiased Sinkhorn divergence
/// `S_ε(μ, ν) = OT_ε(μ, ν) − ½ OT_ε(μ, μ) − ½ OT_ε(ν, ν)` with gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence<const D: usize> {
    pub value: f64,
    pub grad_x: Vec<SVector<f64, D>>,
    /// Present when requested.
    pub grad_y: Option<Vec<SVector<f64, D>>>,
    pub converged: bool,
}

pub fn sinkhorn_divergence<const D: usize>(
    mu: &DiscreteMeasure<D>,
    nu: &DiscreteMeasure<D>,
    opts: &SinkhornOptions,
    with_grad_y: bool,
) -> Result<Divergence<D>> {
    let xy = sinkhorn(mu, nu, opts)?;
    let xx = sinkhorn_self(mu, opts)?;
    let yy = sinkhorn_self(nu, opts)?;
    let value = xy.regularized_cost - 0.5 * (xx.regularized_cost + yy.regularized_cost);

    let cross = sinkhorn_grad_x(mu, nu, &xy);
    let selfx = sinkhorn_self_grad(mu, &xx);
    let grad_x = cross
        .iter()
        .zip(&selfx)
        .map(|(c, s)| c - s * 0.5)
        .collect();
    let grad_y = with_grad_y.then(|| {
        let swapped = SinkhornResult {
            f: xy.g.clone(),
            g: xy.f.clone(),
            ..xy.clone()
        };
        let cross = sinkhorn_grad_x(nu, mu, &swapped);
        let selfy = sinkhorn_self_grad(nu, &yy);
        cross
            .iter()
            .zip(&selfy)
            .map(|(c, s)| c - s * 0.5)
            .collect()
    });
    Ok(Divergence {
        value,
        grad_x,
        grad_y,
        converged: xy.converged && xx.converged && yy.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::measure_from_points;
    use crate::ot::hungarian::hungarian_w2;
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type V2 = Vector2<f64>;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<V2> {
        (0..n).map(|_| V2::new(rng.random(), rng.random())).collect()
    }

    #[test]
    fn single_point_masses() {
        let a = measure_from_points(&[V2::new(0.3, 0.4)]).unwrap();
        let r = sinkhorn(&a, &a, &SinkhornOptions::new(1e-3)).unwrap();
        assert!(r.cost.abs() < 1e-15);
        let b = measure_from_points(&[V2::new(0.3, 1.4)]).unwrap();
        for eps in [1e-1, 1e-3, 5e-5] {
            let r = sinkhorn(&a, &b, &SinkhornOptions::new(eps)).unwrap();
            assert!((r.cost - 1.0).abs() < 1e-12, "{}", r.cost);
            assert!((r.regularized_cost - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn small_epsilon_does_not_overflow() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = measure_from_points(&cloud(&mut rng, 20)).unwrap();
        let b = measure_from_points(&cloud(&mut rng, 35)).unwrap();
        let opts = SinkhornOptions::new(5e-5).with_tol(1e-5).with_max_iter(200_000);
        let r = sinkhorn(&a, &b, &opts).unwrap();
        assert!(r.cost.is_finite() && r.cost > 0.0);
        assert!(r.f.iter().chain(&r.g).all(|x| x.is_finite()));
        assert!(r.converged, "err {}", r.marginal_error);
    }

    #[test]
    fn close_to_exact_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let p = cloud(&mut rng, 8);
            let q = cloud(&mut rng, 8);
            let (exact, _) = hungarian_w2(&p, &q).unwrap();
            let r = sinkhorn(
                &measure_from_points(&p).unwrap(),
                &measure_from_points(&q).unwrap(),
                &SinkhornOptions::new(1e-3),
            )
            .unwrap();
            assert!((r.cost - exact).abs() <= 0.02 * exact, "{} vs {exact}", r.cost);
        }
    }

    #[test]
    fn marginals_and_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = measure_from_points(&cloud(&mut rng, 7)).unwrap();
        let b = measure_from_points(&cloud(&mut rng, 11)).unwrap();
        let opts = SinkhornOptions::new(1e-2).with_tol(1e-10);
        let r = sinkhorn(&a, &b, &opts).unwrap();
        assert!(r.converged && r.marginal_error <= 1e-10);
        let plan = |f: &[f64], g: &[f64]| -> Vec<f64> {
            let mut p = Vec::new();
            for i in 0..7 {
                for j in 0..11 {
                    let c = (a.points[i] - b.points[j]).norm_squared();
                    p.push(a.weights[i] * b.weights[j] * ((f[i] + g[j] - c) / 1e-2).exp());
                }
            }
            p
        };
        let p0 = plan(&r.f, &r.g);
        let f2: Vec<f64> = r.f.iter().map(|x| x + 0.7).collect();
        let g2: Vec<f64> = r.g.iter().map(|x| x - 0.7).collect();
        let p1 = plan(&f2, &g2);
        for (x, y) in p0.iter().zip(&p1) {
            assert!((x - y).abs() < 1e-12);
        }
        for i in 0..7 {
            let row: f64 = p0[i * 11..(i + 1) * 11].iter().sum();
            assert!((row - a.weights[i]).abs() < 1e-12);
        }
        let col_l1: f64 = (0..11)
            .map(|j| ((0..7).map(|i| p0[i * 11 + j]).sum::<f64>() - b.weights[j]).abs())
            .sum();
        assert!(col_l1 <= 2e-10, "{col_l1}");
    }

    #[test]
    fn single_point_gradient_is_mean_pull() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = V2::new(2.0, -1.0);
        let mu = measure_from_points(&[x]).unwrap();
        let nu = measure_from_points(&cloud(&mut rng, 13)).unwrap();
        let r = sinkhorn(&mu, &nu, &SinkhornOptions::new(1e-3)).unwrap();
        let g = sinkhorn_grad_x(&mu, &nu, &r);
        let expect = (x - nu.mean()) * 2.0;
        assert!((g[0] - expect).norm() < 1e-9);
        // far point is pulled back toward the cloud
        assert!((-g[0]).dot(&(nu.mean() - x)) > 0.0);
    }

    fn regularized<const D: usize>(mu: &DiscreteMeasure<D>, nu: &DiscreteMeasure<D>, opts: &SinkhornOptions) -> f64 {
        sinkhorn(mu, nu, opts).unwrap().regularized_cost
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let opts = SinkhornOptions::new(1e-2).with_tol(1e-13);
        for _ in 0..5 {
            let mut mu = measure_from_points(&cloud(&mut rng, 6)).unwrap();
            let nu = measure_from_points(&cloud(&mut rng, 9)).unwrap();
            let r = sinkhorn(&mu, &nu, &opts).unwrap();
            let g = sinkhorn_grad_x(&mu, &nu, &r);
            let h = 1e-5;
            for i in 0..6 {
                for k in 0..2 {
                    let orig = mu.points[i][k];
                    mu.points[i][k] = orig + h;
                    let up = regularized(&mu, &nu, &opts);
                    mu.points[i][k] = orig - h;
                    let dn = regularized(&mu, &nu, &opts);
                    mu.points[i][k] = orig;
                    let fd = (up - dn) / (2.0 * h);
                    let err = (fd - g[i][k]).abs() / fd.abs().max(g[i][k].abs()).max(1e-6);
                    assert!(err <= 1e-3, "i={i} k={k} fd={fd} g={}", g[i][k]);
                }
            }
        }
    }

    #[test]
    fn divergence_vanishes_on_matched_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = measure_from_points(&cloud(&mut rng, 15)).unwrap();
        let d = sinkhorn_divergence(&p, &p, &SinkhornOptions::new(1e-3), true).unwrap();
        assert!(d.value.abs() < 1e-9, "{}", d.value);
        assert!(d.grad_x.iter().all(|g| g.norm() < 1e-6));
    }

    #[test]
    fn divergence_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let opts = SinkhornOptions::new(1e-2).with_tol(1e-13);
        let mut mu = measure_from_points(&cloud(&mut rng, 5)).unwrap();
        let mut nu = measure_from_points(&cloud(&mut rng, 4)).unwrap();
        let d = sinkhorn_divergence(&mu, &nu, &opts, true).unwrap();
        let h = 1e-5;
        for i in 0..5 {
            for k in 0..2 {
                let orig = mu.points[i][k];
                mu.points[i][k] = orig + h;
                let up = sinkhorn_divergence(&mu, &nu, &opts, false).unwrap().value;
                mu.points[i][k] = orig - h;
                let dn = sinkhorn_divergence(&mu, &nu, &opts, false).unwrap().value;
                mu.points[i][k] = orig;
                let fd = (up - dn) / (2.0 * h);
                assert!((fd - d.grad_x[i][k]).abs() <= 1e-3 * fd.abs().max(1e-4));
            }
        }
        let gy = d.grad_y.unwrap();
        for j in 0..4 {
            for k in 0..2 {
                let orig = nu.points[j][k];
                nu.points[j][k] = orig + h;
                let up = sinkhorn_divergence(&mu, &nu, &opts, false).unwrap().value;
                nu.points[j][k] = orig - h;
                let dn = sinkhorn_divergence(&mu, &nu, &opts, false).unwrap().value;
                nu.points[j][k] = orig;
                let fd = (up - dn) / (2.0 * h);
                assert!((fd - gy[j][k]).abs() <= 1e-3 * fd.abs().max(1e-4));
            }
        }
    }
}
