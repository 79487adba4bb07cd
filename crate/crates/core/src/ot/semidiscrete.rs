//! Semi-discrete transport from a quadrature measure to a few Dirac sites.
//!
//! Quadrature points are labelled by the power diagram of the sites: a point
//! `x` goes to `argmin_k ‖x − s_k‖² − w_k` (lowest index on ties). The
//! weights `w` are the dual variables of the transport problem and are found
//! by ascent on the concave dual
//! `D(w) = Σ_k w_k t_k + Σ_x μ_x min_k (‖x − s_k‖² − w_k)`,
//! whose gradient is `t − mass(w)`.

use rand::Rng;

use crate::geometry::Vec2;
use crate::measures::Measure2;
use crate::{Error, Result};

/// Power weights, one per site, in squared-length units.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiDiscretePlanWeights {
    pub w: Vec<f64>,
}

impl SemiDiscretePlanWeights {
    pub fn zeros(k: usize) -> Self {
        Self { w: vec![0.0; k] }
    }

    /// Shifts the weights to zero mean; the power diagram is unchanged.
    pub fn gauge_fix(&mut self) {
        if self.w.is_empty() {
            return;
        }
        let mean = self.w.iter().sum::<f64>() / self.w.len() as f64;
        self.w.iter_mut().for_each(|x| *x -= mean);
    }
}

/// Per-cell aggregates of a power assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCellStats {
    pub mass: Vec<f64>,
    pub barycenter: Vec<Vec2>,
    /// `Σ_{x ∈ cell} μ_x ‖x − s_k‖²`.
    pub second_moment: Vec<f64>,
    /// Cell index of every quadrature point.
    pub labels: Vec<u32>,
    /// `Σ_x μ_x min_k (‖x − s_k‖² − w_k)`.
    pub power_sum: f64,
}

impl PowerCellStats {
    /// Transport cost of the assignment, `Σ_k second_moment_k`.
    pub fn cost(&self) -> f64 {
        self.second_moment.iter().sum()
    }

    pub fn max_mass_error(&self, targets: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(targets)
            .map(|(m, t)| (m - t).abs())
            .fold(0.0, f64::max)
    }
}

fn check_sites(sites: &[Vec2]) -> Result<()> {
    if sites.is_empty() {
        return Err(Error::InvalidArgument("at least one site is required".into()));
    }
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            if (sites[i] - sites[j]).norm() <= 1e-12 {
                return Err(Error::DuplicateSites(i, j));
            }
        }
    }
    Ok(())
}

fn assign(quad: &Measure2, sites: &[Vec2], w: &[f64]) -> PowerCellStats {
    let k = sites.len();
    let (sx, sy): (Vec<f64>, Vec<f64>) = sites.iter().map(|s| (s.x, s.y)).unzip();
    let mut mass = vec![0.0; k];
    let mut first = vec![Vec2::zeros(); k];
    let mut second = vec![0.0; k];
    let mut labels = Vec::with_capacity(quad.len());
    let mut power_sum = 0.0;
    for (x, &mu) in quad.points.iter().zip(&quad.weights) {
        let mut best = f64::INFINITY;
        let mut arg = 0usize;
        let mut best_d = 0.0;
        for j in 0..k {
            let dx = x.x - sx[j];
            let dy = x.y - sy[j];
            let d = dx * dx + dy * dy;
            let v = d - w[j];
            if v < best {
                best = v;
                arg = j;
                best_d = d;
            }
        }
        labels.push(arg as u32);
        mass[arg] += mu;
        first[arg] += x * mu;
        second[arg] += mu * best_d;
        power_sum += mu * best;
    }
    let barycenter = first
        .iter()
        .zip(&mass)
        .zip(sites)
        .map(|((f, &m), s)| if m > 0.0 { f / m } else { *s })
        .collect();
    PowerCellStats {
        mass,
        barycenter,
        second_moment: second,
        labels,
        power_sum,
    }
}

/// Power-diagram assignment of the quadrature points and per-cell statistics.
pub fn power_assign(
    quad: &Measure2,
    sites: &[Vec2],
    weights: &SemiDiscretePlanWeights,
) -> Result<PowerCellStats> {
    check_sites(sites)?;
    if weights.w.len() != sites.len() {
        return Err(Error::SizeMismatch(sites.len(), weights.w.len()));
    }
    if quad.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    Ok(assign(quad, sites, &weights.w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiDiscreteOptions {
    /// L∞ mass tolerance; `None` uses [`default_mass_tol`].
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Initial damping λ of the step `λ (t − m) 2 diam²`.
    pub step: f64,
    /// Once balanced, keep ascending until a step gains at most this much.
    pub dual_tol: f64,
    /// Start from the optimum of the smoothed dual (see [`smoothed_solve`]).
    pub smooth_start: bool,
}

impl Default for SemiDiscreteOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 2000,
            step: 0.05,
            dual_tol: f64::INFINITY,
            smooth_start: true,
        }
    }
}

/// `1e-3 / k`, floored at twice the heaviest quadrature atom: a power
/// diagram cannot split atoms, so finer balance is generally unreachable.
pub fn default_mass_tol(quad: &Measure2, k: usize) -> f64 {
    let atom = quad.weights.iter().cloned().fold(0.0, f64::max);
    (1e-3 / k as f64).max(2.0 * atom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiDiscreteSolution {
    pub weights: SemiDiscretePlanWeights,
    pub stats: PowerCellStats,
    pub max_mass_error: f64,
    /// Dual objective at the returned weights, a lower bound on the cost of
    /// transporting the quadrature measure onto the exact target masses.
    pub dual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dual_value(stats: &PowerCellStats, w: &[f64], targets: &[f64]) -> f64 {
    w.iter().zip(targets).map(|(a, b)| a * b).sum::<f64>() + stats.power_sum
}

/// Raises the weight of every empty cell until it captures its nearest
/// quadrature point.
fn rescue_empty(quad: &Measure2, sites: &[Vec2], w: &mut [f64], stats: &PowerCellStats) -> bool {
    let mut changed = false;
    for k in 0..sites.len() {
        if stats.mass[k] > 0.0 {
            continue;
        }
        let (idx, _) = quad
            .points
            .iter()
            .enumerate()
            .map(|(i, x)| (i, (x - sites[k]).norm_squared()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let x = quad.points[idx];
        let owner = stats.labels[idx] as usize;
        let owner_val = (x - sites[owner]).norm_squared() - w[owner];
        let own = (x - sites[k]).norm_squared();
        w[k] = own - owner_val + 1e-12 * (1.0 + own.abs());
        changed = true;
    }
    changed
}

/// Assignment at `w`, raising empty cells first.
fn evaluate(quad: &Measure2, sites: &[Vec2], w: &mut [f64]) -> PowerCellStats {
    let stats = assign(quad, sites, w);
    if rescue_empty(quad, sites, w, &stats) {
        assign(quad, sites, w)
    } else {
        stats
    }
}

fn bounds<'a>(points: impl Iterator<Item = &'a Vec2>) -> (Vec2, Vec2) {
    let mut lo = Vec2::repeat(f64::INFINITY);
    let mut hi = Vec2::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Typical distance between neighbouring quadrature points.
fn quadrature_spacing(quad: &Measure2) -> f64 {
    let (lo, hi) = bounds(quad.points.iter());
    let ext = hi - lo;
    (ext.x * ext.y / quad.len() as f64).sqrt().max(1e-12)
}

fn diameter_sq(quad: &Measure2, sites: &[Vec2]) -> f64 {
    let (lo, hi) = bounds(quad.points.iter().chain(sites));
    (hi - lo).norm_squared().max(f64::MIN_POSITIVE)
}

/// Dual ascent for power weights whose cells carry the target masses.
pub fn semidiscrete_solve(
    quad: &Measure2,
    sites: &[Vec2],
    targets: &[f64],
    opts: &SemiDiscreteOptions,
    warm_start: Option<&SemiDiscretePlanWeights>,
) -> Result<SemiDiscreteSolution> {
    check_sites(sites)?;
    if quad.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let k = sites.len();
    if targets.len() != k {
        return Err(Error::SizeMismatch(k, targets.len()));
    }
    if targets.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("target masses must be positive".into()));
    }
    let tol = opts.tol.unwrap_or_else(|| default_mass_tol(quad, k));
    let mut w = match warm_start {
        Some(ws) if ws.w.len() == k => ws.w.clone(),
        _ => vec![0.0; k],
    };
    if k == 1 {
        let stats = assign(quad, sites, &[0.0]);
        let err = stats.max_mass_error(targets);
        return Ok(SemiDiscreteSolution {
            weights: SemiDiscretePlanWeights::zeros(1),
            dual: stats.power_sum,
            stats,
            max_mass_error: err,
            iterations: 0,
            converged: err <= tol,
        });
    }

    if opts.smooth_start {
        let tau = default_temperature(quad, k);
        let warm = SemiDiscretePlanWeights { w };
        let soft = smoothed_solve(quad, sites, targets, tau, SOFT_TOL, opts.max_iter, Some(&warm))?;
        w = soft.weights.w;
    }
    let scale = 2.0 * diameter_sq(quad, sites);
    let mut stats = evaluate(quad, sites, &mut w);
    let mut value = dual_value(&stats, &w, targets);
    let mut err = stats.max_mass_error(targets);
    let mut best = (err, w.clone(), stats.clone());
    let mut lambda = opts.step;
    let mut iterations = 0;
    let mut gain = f64::INFINITY;
    while iterations < opts.max_iter && !(err <= tol && gain <= opts.dual_tol) {
        iterations += 1;
        let mut trial: Vec<f64> = w
            .iter()
            .zip(targets.iter().zip(&stats.mass))
            .map(|(a, (t, m))| a + lambda * (t - m) * scale)
            .collect();
        let tstats = evaluate(quad, sites, &mut trial);
        let tvalue = dual_value(&tstats, &trial, targets);
        if tvalue >= value - 1e-15 * value.abs().max(1e-300) {
            w = trial;
            stats = tstats;
            gain = tvalue - value;
            value = tvalue;
            err = stats.max_mass_error(targets);
            if err <= tol || err < best.0 {
                best = (err, w.clone(), stats.clone());
            }
            lambda = (lambda * 1.25).min(1.0);
        } else {
            lambda *= 0.5;
            if lambda < 1e-14 {
                break;
            }
        }
    }
    let (max_mass_error, w, stats) = best;
    let dual = dual_value(&stats, &w, targets);
    let mut weights = SemiDiscretePlanWeights { w };
    weights.gauge_fix();
    Ok(SemiDiscreteSolution {
        weights,
        stats,
        dual,
        max_mass_error,
        iterations,
        converged: max_mass_error <= tol,
    })
}

/// Soft-mass tolerance of [`smoothed_solve`] when used internally.
pub const SOFT_TOL: f64 = 1e-10;

/// Temperature of the smoothed dual: the soft boundary between two cells is
/// about half a quadrature spacing wide.
pub fn default_temperature(quad: &Measure2, k: usize) -> f64 {
    let (lo, hi) = bounds(quad.points.iter());
    let ext = hi - lo;
    let spacing = quadrature_spacing(quad);
    let separation = (0.5 * ext.x * ext.y / k as f64).sqrt();
    (0.5 * spacing * separation).max(1e-15)
}

/// Cells of the smoothed assignment
/// `π(x, k) ∝ μ_x exp(−(‖x − s_k‖² − w_k) / τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCells {
    pub mass: Vec<f64>,
    pub barycenter: Vec<Vec2>,
    /// Plan-weighted transport cost `Σ π ‖x − s‖²`.
    pub cost: f64,
    /// Smoothed dual objective.
    pub dual: f64,
}

impl SoftCells {
    pub fn max_mass_error(&self, targets: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(targets)
            .map(|(m, t)| (m - t).abs())
            .fold(0.0, f64::max)
    }
}

/// exp(−40) is below double precision relative to the leading term.
const SOFT_CUTOFF: f64 = 40.0;

fn soft_eval(
    quad: &Measure2,
    sites: &[Vec2],
    w: &[f64],
    targets: &[f64],
    tau: f64,
    hessian: Option<&mut nalgebra::DMatrix<f64>>,
) -> SoftCells {
    let k = sites.len();
    let mut mass = vec![0.0; k];
    let mut first = vec![Vec2::zeros(); k];
    let mut cost = 0.0;
    let mut dual: f64 = w.iter().zip(targets).map(|(a, b)| a * b).sum();
    let mut vals = vec![0.0; k];
    let mut near: Vec<(usize, f64)> = Vec::with_capacity(k);
    let mut hess = hessian;
    if let Some(h) = hess.as_deref_mut() {
        h.fill(0.0);
    }
    let inv = 1.0 / tau;
    for (x, &mu) in quad.points.iter().zip(&quad.weights) {
        let mut vmin = f64::INFINITY;
        for (j, s) in sites.iter().enumerate() {
            let v = (x - s).norm_squared() - w[j];
            vals[j] = v;
            vmin = vmin.min(v);
        }
        near.clear();
        let mut z = 0.0;
        for (j, &v) in vals.iter().enumerate() {
            let t = (v - vmin) * inv;
            if t < SOFT_CUTOFF {
                let e = (-t).exp();
                z += e;
                near.push((j, e));
            }
        }
        dual += mu * (vmin - tau * z.ln());
        for (j, e) in near.iter_mut() {
            *e /= z;
            let pm = mu * *e;
            mass[*j] += pm;
            first[*j] += x * pm;
            cost += pm * (vals[*j] + w[*j]);
        }
        if let Some(h) = hess.as_deref_mut() {
            if near.len() > 1 {
                let c = mu * inv;
                for &(a, pa) in &near {
                    h[(a, a)] += c * pa;
                    for &(b, pb) in &near {
                        h[(a, b)] -= c * pa * pb;
                    }
                }
            }
        }
    }
    let barycenter = first
        .iter()
        .zip(&mass)
        .zip(sites)
        .map(|((f, &m), s)| if m > 0.0 { f / m } else { *s })
        .collect();
    SoftCells {
        mass,
        barycenter,
        cost,
        dual,
    }
}

/// Smoothed cells at given weights.
pub fn soft_cells(
    quad: &Measure2,
    sites: &[Vec2],
    weights: &SemiDiscretePlanWeights,
    tau: f64,
) -> Result<SoftCells> {
    check_sites(sites)?;
    if weights.w.len() != sites.len() {
        return Err(Error::SizeMismatch(sites.len(), weights.w.len()));
    }
    let targets = vec![0.0; sites.len()];
    Ok(soft_eval(quad, sites, &weights.w, &targets, tau, None))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSolution {
    pub weights: SemiDiscretePlanWeights,
    pub cells: SoftCells,
    pub max_mass_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton ascent on the smoothed dual
/// `Σ_k w_k t_k − τ Σ_x μ_x log Σ_k exp((w_k − ‖x − s_k‖²) / τ)`,
/// which is smooth and concave, so soft masses balance to `tol`.
pub fn smoothed_solve(
    quad: &Measure2,
    sites: &[Vec2],
    targets: &[f64],
    tau: f64,
    tol: f64,
    max_iter: usize,
    warm_start: Option<&SemiDiscretePlanWeights>,
) -> Result<SmoothedSolution> {
    check_sites(sites)?;
    let k = sites.len();
    if targets.len() != k {
        return Err(Error::SizeMismatch(k, targets.len()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument("temperature must be positive".into()));
    }
    let mut w = match warm_start {
        Some(ws) if ws.w.len() == k => ws.w.clone(),
        _ => vec![0.0; k],
    };
    // empty cells have a vanishing Hessian row; give them a foothold first
    let hard = assign(quad, sites, &w);
    rescue_empty(quad, sites, &mut w, &hard);

    let mut h = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut cells = soft_eval(quad, sites, &w, targets, tau, Some(&mut h));
    let mut err = cells.max_mass_error(targets);
    let mut iterations = 0;
    let mut stalled = false;
    let max_step = 0.25 * diameter_sq(quad, sites);
    while err > tol && iterations < max_iter {
        iterations += 1;
        let grad: Vec<f64> = targets.iter().zip(&cells.mass).map(|(t, m)| t - m).collect();
        // constant shifts span the null space; the rank-one term removes it
        let shift = h.trace() / k as f64 + f64::MIN_POSITIVE;
        let mut hp = h.clone();
        hp.add_scalar_mut(shift / k as f64);
        for i in 0..k {
            hp[(i, i)] += 1e-12 * shift;
        }
        let Some(chol) = hp.cholesky() else { break };
        let mut dir = chol.solve(&nalgebra::DVector::from_column_slice(&grad));
        let longest = dir.amax();
        if longest > max_step {
            dir *= max_step / longest;
        }
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if slope <= 1e-13 * cells.dual.abs() {
            // Newton decrement at summation-noise level
            stalled = true;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = w.iter().zip(dir.iter()).map(|(a, d)| a + alpha * d).collect();
            let tc = soft_eval(quad, sites, &trial, targets, tau, None);
            if tc.dual >= cells.dual + 1e-4 * alpha * slope {
                w = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            stalled = true;
            break;
        }
        cells = soft_eval(quad, sites, &w, targets, tau, Some(&mut h));
        err = cells.max_mass_error(targets);
    }
    let mut weights = SemiDiscretePlanWeights { w };
    weights.gauge_fix();
    Ok(SmoothedSolution {
        weights,
        cells,
        max_mass_error: err,
        iterations,
        converged: err <= tol || stalled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydOptions {
    pub outer_iters: usize,
    /// Stop once every site is within this distance of its cell barycenter.
    pub site_tol: f64,
    /// Hard mass-balance tolerance of the returned weights; `None` uses
    /// [`default_mass_tol`].
    pub mass_tol: Option<f64>,
    /// Temperature of the smoothed cells; `None` uses [`default_temperature`].
    pub temperature: Option<f64>,
    /// Newton budget of every smoothed solve.
    pub inner_iters: usize,
    /// Dual-ascent budget of the final hard balancing solve.
    pub final_iters: usize,
    /// Also stop once one iteration lowers the energy by less than this
    /// fraction; 0 disables the test.
    pub energy_rtol: f64,
}

impl Default for LloydOptions {
    fn default() -> Self {
        Self {
            outer_iters: 100,
            site_tol: 1e-4,
            mass_tol: None,
            temperature: None,
            inner_iters: 50,
            final_iters: 2000,
            energy_rtol: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub sites: Vec<Vec2>,
    /// Power weights balancing the hard cells of `sites`.
    pub weights: SemiDiscretePlanWeights,
    /// Weights balancing the smoothed cells at `temperature`.
    pub soft_weights: SemiDiscretePlanWeights,
    /// Cost of the transport plan onto equal masses `1/k` (≈ W2²).
    pub w2sq: f64,
    /// Smoothed transport energy at the start of every outer iteration.
    pub history: Vec<f64>,
    pub temperature: f64,
    pub iterations: usize,
    /// Hard mass error of `weights`.
    pub max_mass_error: f64,
    pub converged: bool,
}

/// Capacity-constrained Lloyd relaxation: alternate equal-mass transport
/// cells and moves of every site to its cell barycenter.
pub fn lloyd_cvt<R: Rng + ?Sized>(
    quad: &Measure2,
    k: usize,
    rng: &mut R,
    opts: &LloydOptions,
) -> Result<LloydResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k * 4 > quad.len() {
        return Err(Error::InvalidArgument(format!(
            "{k} sites need at least {} quadrature points, got {}",
            4 * k,
            quad.len()
        )));
    }
    let picks = rand::seq::index::sample_weighted(rng, quad.len(), |i| quad.weights[i], k)
        .map_err(|e| Error::InvalidArgument(format!("site initialization failed: {e}")))?;
    let sites: Vec<Vec2> = picks.iter().map(|i| quad.points[i]).collect();
    lloyd_from_sites(quad, sites, opts)
}

/// Lloyd relaxation from given initial sites.
pub fn lloyd_from_sites(
    quad: &Measure2,
    mut sites: Vec<Vec2>,
    opts: &LloydOptions,
) -> Result<LloydResult> {
    check_sites(&sites)?;
    let k = sites.len();
    let targets = vec![1.0 / k as f64; k];
    let tau = opts.temperature.unwrap_or_else(|| default_temperature(quad, k));
    let mut weights = SemiDiscretePlanWeights::zeros(k);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut cost;
    let mut prev_ok = None;
    loop {
        let sol = smoothed_solve(quad, &sites, &targets, tau, SOFT_TOL, opts.inner_iters, Some(&weights))?;
        weights = sol.weights;
        history.push(sol.cells.dual);
        cost = sol.cells.cost;
        let disp = sol
            .cells
            .barycenter
            .iter()
            .zip(&sites)
            .map(|(b, s)| (b - s).norm())
            .fold(0.0, f64::max);
        let cur = sol.cells.dual;
        let stalled = sol.converged
            && prev_ok.is_some_and(|prev: f64| (0.0..=opts.energy_rtol * cur.abs()).contains(&(prev - cur)));
        prev_ok = sol.converged.then_some(cur);
        if sol.converged && (disp <= opts.site_tol || (opts.energy_rtol > 0.0 && stalled)) {
            converged = true;
            break;
        }
        if iterations == opts.outer_iters {
            break;
        }
        let next = sol.cells.barycenter;
        if check_sites(&next).is_err() {
            break;
        }
        sites = next;
        iterations += 1;
    }
    let hard_opts = SemiDiscreteOptions {
        tol: opts.mass_tol,
        max_iter: opts.final_iters,
        smooth_start: false,
        ..Default::default()
    };
    let hard = semidiscrete_solve(quad, &sites, &targets, &hard_opts, Some(&weights))?;
    Ok(LloydResult {
        sites,
        weights: hard.weights,
        soft_weights: weights,
        w2sq: cost,
        history,
        temperature: tau,
        iterations,
        max_mass_error: hard.max_mass_error,
        converged,
    })
}
