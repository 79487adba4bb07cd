//! Training objective: debiased entropic OT from a predicted block to its
//! target set, minus `α` times the divergence between two noise draws.

use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{backward, block_rows, forward_rows, DropoutMasks, MlpParams, Trace, NUM_BLOCKS};
use crate::geometry::{square_to_triangle, square_to_triangle_jacobian, CanonicalTriangle, Vec2};
use crate::measures::measure_from_points;
use crate::ot::sinkhorn::{
    sinkhorn, sinkhorn_divergence, sinkhorn_grad_x, sinkhorn_self, sinkhorn_self_grad,
    SinkhornOptions,
};
use crate::{Error, Result};

/// Random choices of one training example: block size, the two noise values
/// and the dropout masks of both forward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleDraw {
    pub ell: usize,
    pub p: f64,
    pub p_other: f64,
    pub masks: Option<DropoutMasks>,
    pub masks_other: Option<DropoutMasks>,
}

impl ExampleDraw {
    /// Draws `ell` uniformly in `1..=30` and `p, p' ~ N(0,1)`; masks are drawn
    /// when `dropout > 0`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, hidden: usize, dropout: f64) -> Self {
        let ell = rng.random_range(1..=NUM_BLOCKS);
        Self::with_ell(rng, ell, hidden, dropout)
    }

    pub fn with_ell<R: Rng + ?Sized>(rng: &mut R, ell: usize, hidden: usize, dropout: f64) -> Self {
        let p = rng.sample(StandardNormal);
        let p_other = rng.sample(StandardNormal);
        let (masks, masks_other) = if dropout > 0.0 {
            (
                Some(DropoutMasks::draw(hidden, dropout, rng)),
                Some(DropoutMasks::draw(hidden, dropout, rng)),
            )
        } else {
            (None, None)
        };
        Self {
            ell,
            p,
            p_other,
            masks,
            masks_other,
        }
    }
}

/// Target density for block `ell`: the smallest available density
/// `≥ max(30, 4ℓ)`, or the largest one if none is big enough.
pub fn target_density(densities: &[usize], ell: usize) -> Option<usize> {
    let need = (4 * ell).max(30);
    densities
        .iter()
        .copied()
        .filter(|&d| d >= need)
        .min()
        .or_else(|| densities.iter().copied().max())
}

/// Maps unit-square outputs into the canonical triangle.
pub fn map_to_triangle(ct: &CanonicalTriangle, uv: &[[f64; 2]]) -> Vec<Vec2> {
    uv.iter()
        .map(|&[u, v]| ct.point(square_to_triangle(u, v)))
        .collect()
}

/// Pulls a gradient w.r.t. triangle points back to the unit-square outputs.
pub fn pull_back(ct: &CanonicalTriangle, uv: &[[f64; 2]], grad: &[Vec2]) -> Vec<[f64; 2]> {
    let (ax, ay) = (ct.apex.x, ct.apex.y);
    uv.iter()
        .zip(grad)
        .map(|(&[u, v], g)| {
            let j = square_to_triangle_jacobian(u, v);
            // x = b2·ax, y = b1 + b2·ay
            let dx = [ax * j[1][0], ax * j[1][1]];
            let dy = [j[0][0] + ay * j[1][0], j[0][1] + ay * j[1][1]];
            [g.x * dx[0] + g.y * dy[0], g.x * dx[1] + g.y * dy[1]]
        })
        .collect()
}

/// Loss value and its decomposition on already-mapped point sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PointLoss {
    /// `S_ε(pred, target)`.
    pub fit: f64,
    /// `S_ε(pred, pred')`; zero when `α = 0`.
    pub spread: f64,
    /// `fit − α·spread`.
    pub loss: f64,
    pub grad_pred: Vec<Vec2>,
    pub grad_other: Vec<Vec2>,
    pub converged: bool,
}

/// Evaluates the objective on point sets. `target_self` may supply the
/// cached `OT_ε(target, target)`, which carries no gradient.
pub fn point_loss(
    pred: &[Vec2],
    other: &[Vec2],
    target: &[Vec2],
    alpha: f64,
    opts: &SinkhornOptions,
    target_self: Option<f64>,
) -> Result<PointLoss> {
    let mu = measure_from_points(pred)?;
    let nu = measure_from_points(target)?;
    let xy = sinkhorn(&mu, &nu, opts)?;
    let xx = sinkhorn_self(&mu, opts)?;
    let (yy, yy_ok) = match target_self {
        Some(v) => (v, true),
        None => {
            let r = sinkhorn_self(&nu, opts)?;
            (r.regularized_cost, r.converged)
        }
    };
    let fit = xy.regularized_cost - 0.5 * (xx.regularized_cost + yy);
    let mut grad_pred: Vec<Vec2> = sinkhorn_grad_x(&mu, &nu, &xy)
        .iter()
        .zip(sinkhorn_self_grad(&mu, &xx))
        .map(|(c, s)| c - s * 0.5)
        .collect();
    let mut converged = xy.converged && xx.converged && yy_ok;
    let mut grad_other = vec![Vec2::zeros(); other.len()];
    let mut spread = 0.0;
    if alpha != 0.0 {
        let mo = measure_from_points(other)?;
        let d = sinkhorn_divergence(&mu, &mo, opts, true)?;
        spread = d.value;
        converged &= d.converged;
        for (g, s) in grad_pred.iter_mut().zip(&d.grad_x) {
            *g -= s * alpha;
        }
        for (g, s) in grad_other.iter_mut().zip(d.grad_y.as_deref().unwrap_or(&[])) {
            *g -= s * alpha;
        }
    }
    Ok(PointLoss {
        fit,
        spread,
        loss: fit - alpha * spread,
        grad_pred,
        grad_other,
        converged,
    })
}

/// Per-example diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub ell: usize,
    pub fit: f64,
    pub spread: f64,
    pub loss: f64,
    pub converged: bool,
}

/// Loss of one example and, when `grad` is given, accumulation of
/// `scale · ∂loss/∂θ` into it.
#[allow(clippy::too_many_arguments)]
pub fn example_loss(
    params: &MlpParams,
    ct: &CanonicalTriangle,
    target: &[Vec2],
    draw: &ExampleDraw,
    alpha: f64,
    opts: &SinkhornOptions,
    target_self: Option<f64>,
    grad: Option<(&mut MlpParams, f64)>,
) -> Result<LossTerms> {
    if target.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let rows = block_rows(draw.ell)?;
    let t1 = forward_rows(params, &ct.apex, draw.p, draw.masks.as_ref(), rows.clone());
    let pred = map_to_triangle(ct, &t1.out);
    let t2: Option<Trace> = (alpha != 0.0).then(|| {
        forward_rows(params, &ct.apex, draw.p_other, draw.masks_other.as_ref(), rows)
    });
    let other = t2.as_ref().map(|t| map_to_triangle(ct, &t.out)).unwrap_or_default();
    let pl = point_loss(&pred, &other, target, alpha, opts, target_self)?;
    if let Some((g, scale)) = grad {
        let scaled = |v: &[Vec2]| v.iter().map(|x| x * scale).collect::<Vec<_>>();
        backward(params, &t1, &pull_back(ct, &t1.out, &scaled(&pl.grad_pred)), g);
        if let Some(t2) = &t2 {
            backward(params, t2, &pull_back(ct, &t2.out, &scaled(&pl.grad_other)), g);
        }
    }
    Ok(LossTerms {
        ell: draw.ell,
        fit: pl.fit,
        spread: pl.spread,
        loss: pl.loss,
        converged: pl.converged,
    })
}
