//! The sampler network: `(apex.x, apex.y, p) → 64 → 64 → 64 → 930`, ReLU
//! hidden units, inverted dropout after every hidden layer and a sigmoid
//! output read as 465 points of the unit square.

use std::ops::Range;

use rand::Rng;

use crate::geometry::Vec2;
use crate::{Error, Result};

pub const NUM_BLOCKS: usize = 30;
pub const OUTPUT_POINTS: usize = NUM_BLOCKS * (NUM_BLOCKS + 1) / 2;
pub const INPUT_DIM: usize = 3;
pub const OUTPUT_DIM: usize = 2 * OUTPUT_POINTS;
pub const HIDDEN_WIDTH: usize = 64;
pub const HIDDEN_LAYERS: usize = 3;

/// Dense layer `y = W x + b` with `W` stored row-major (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.inputs..(r + 1) * self.inputs]
    }
}

/// Network parameters; also used as the gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// Layer dimensions for a given hidden width.
    pub fn dims(hidden: usize) -> Vec<(usize, usize)> {
        let mut d = vec![(INPUT_DIM, hidden)];
        d.extend(std::iter::repeat_n((hidden, hidden), HIDDEN_LAYERS - 1));
        d.push((hidden, OUTPUT_DIM));
        d
    }

    pub fn zeros(hidden: usize) -> Self {
        Self {
            layers: Self::dims(hidden)
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
        }
    }

    /// Uniform initialization in `±1/√fan_in` for weights and biases.
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden);
        for layer in &mut p.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| 0.0)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|&x| f(x)).collect(),
                    bias: l.bias.iter().map(|&x| f(x)).collect(),
                })
                .collect(),
        }
    }

    pub fn hidden_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.outputs)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    /// Checks layer chaining, the input/output sizes and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != HIDDEN_LAYERS + 1 {
            return Err(Error::ShapeMismatch(format!(
                "expected {} layers, found {}",
                HIDDEN_LAYERS + 1,
                self.layers.len()
            )));
        }
        let expect = Self::dims(self.hidden_width());
        for (i, (l, &(ni, no))) in self.layers.iter().zip(&expect).enumerate() {
            if (l.inputs, l.outputs) != (ni, no)
                || l.weights.len() != ni * no
                || l.bias.len() != no
            {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: expected {ni}→{no}, found {}→{}",
                    l.inputs, l.outputs
                )));
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFiniteParams);
        }
        Ok(())
    }

    /// All parameters in file order: per layer, weights row-major then bias.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += scale * b;
        }
    }
}

/// Inverted-dropout masks, one per hidden layer; entries are 0 or `1/(1−p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub layers: Vec<Vec<f64>>,
}

impl DropoutMasks {
    pub fn draw<R: Rng + ?Sized>(hidden: usize, prob: f64, rng: &mut R) -> Self {
        let keep = 1.0 / (1.0 - prob);
        Self {
            layers: (0..HIDDEN_LAYERS)
                .map(|_| {
                    (0..hidden)
                        .map(|_| if prob > 0.0 && rng.random::<f64>() < prob { 0.0 } else { keep })
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Train { dropout: f64 },
    Eval,
}

pub fn features(apex: &Vec2, p: f64) -> [f64; INPUT_DIM] {
    [apex.x, apex.y, p]
}

/// Output rows (points) of block `ell`: `j(j−1)/2 + i − 1` for `j = ell`.
pub fn block_rows(ell: usize) -> Result<Range<usize>> {
    if !(1..=NUM_BLOCKS).contains(&ell) {
        return Err(Error::EllOutOfRange(ell));
    }
    let start = ell * (ell - 1) / 2;
    Ok(start..start + ell)
}

pub fn select_block(out: &[[f64; 2]], ell: usize) -> Result<&[[f64; 2]]> {
    let rows = block_rows(ell)?;
    if out.len() < rows.end {
        return Err(Error::ShapeMismatch(format!(
            "output has {} rows, block {ell} needs {}",
            out.len(),
            rows.end
        )));
    }
    Ok(&out[rows])
}

/// Activations of one forward pass, restricted to a range of output rows.
#[derive(Debug, Clone)]
pub struct Trace {
    pub input: [f64; INPUT_DIM],
    /// Hidden pre-activations.
    pub pre: Vec<Vec<f64>>,
    /// Hidden outputs after ReLU and dropout.
    pub post: Vec<Vec<f64>>,
    pub masks: Option<DropoutMasks>,
    pub rows: Range<usize>,
    /// Sigmoid outputs of `rows`.
    pub out: Vec<[f64; 2]>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Forward pass computing only the output rows in `rows`.
pub fn forward_rows(
    params: &MlpParams,
    apex: &Vec2,
    p: f64,
    masks: Option<&DropoutMasks>,
    rows: Range<usize>,
) -> Trace {
    let input = features(apex, p);
    let mut pre = Vec::with_capacity(HIDDEN_LAYERS);
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(HIDDEN_LAYERS);
    for (li, layer) in params.layers[..HIDDEN_LAYERS].iter().enumerate() {
        let x: &[f64] = if li == 0 { &input } else { &post[li - 1] };
        let z: Vec<f64> = (0..layer.outputs)
            .map(|r| dot(layer.row(r), x) + layer.bias[r])
            .collect();
        let mut h: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
        if let Some(m) = masks {
            h.iter_mut().zip(&m.layers[li]).for_each(|(a, s)| *a *= s);
        }
        pre.push(z);
        post.push(h);
    }
    let last = &params.layers[HIDDEN_LAYERS];
    let h = &post[HIDDEN_LAYERS - 1];
    let out = rows
        .clone()
        .map(|r| {
            let a = sigmoid(dot(last.row(2 * r), h) + last.bias[2 * r]);
            let b = sigmoid(dot(last.row(2 * r + 1), h) + last.bias[2 * r + 1]);
            [a, b]
        })
        .collect();
    Trace {
        input,
        pre,
        post,
        masks: masks.cloned(),
        rows,
        out,
    }
}

/// Full 465-row forward pass. `Train` mode draws fresh dropout masks.
pub fn forward<R: Rng + ?Sized>(
    params: &MlpParams,
    apex: &Vec2,
    p: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<[f64; 2]>> {
    params.validate()?;
    let masks = match mode {
        Mode::Train { dropout } => Some(DropoutMasks::draw(params.hidden_width(), dropout, rng)),
        Mode::Eval => None,
    };
    Ok(forward_rows(params, apex, p, masks.as_ref(), 0..OUTPUT_POINTS).out)
}

/// Eval-mode points of block `ell` on the unit square.
pub fn predict_block(params: &MlpParams, apex: &Vec2, p: f64, ell: usize) -> Result<Vec<[f64; 2]>> {
    let rows = block_rows(ell)?;
    Ok(forward_rows(params, apex, p, None, rows).out)
}

/// Accumulates into `grad` the parameter gradient given `d_out`, the
/// derivative of the objective w.r.t. the sigmoid outputs of `trace.rows`.
pub fn backward(params: &MlpParams, trace: &Trace, d_out: &[[f64; 2]], grad: &mut MlpParams) {
    let hidden = params.hidden_width();
    let last = &params.layers[HIDDEN_LAYERS];
    let h = &trace.post[HIDDEN_LAYERS - 1];
    let mut dh = vec![0.0; hidden];
    {
        let g = &mut grad.layers[HIDDEN_LAYERS];
        for (k, r) in trace.rows.clone().enumerate() {
            for c in 0..2 {
                let s = trace.out[k][c];
                let dz = d_out[k][c] * s * (1.0 - s);
                if dz == 0.0 {
                    continue;
                }
                let o = 2 * r + c;
                g.bias[o] += dz;
                let gw = &mut g.weights[o * hidden..(o + 1) * hidden];
                for (gwj, hj) in gw.iter_mut().zip(h) {
                    *gwj += dz * hj;
                }
                for (d, w) in dh.iter_mut().zip(last.row(o)) {
                    *d += dz * w;
                }
            }
        }
    }
    for li in (0..HIDDEN_LAYERS).rev() {
        let layer = &params.layers[li];
        let mut dz = dh;
        for (j, d) in dz.iter_mut().enumerate() {
            let mask = trace.masks.as_ref().map_or(1.0, |m| m.layers[li][j]);
            if trace.pre[li][j] <= 0.0 {
                *d = 0.0;
            } else {
                *d *= mask;
            }
        }
        let x: &[f64] = if li == 0 { &trace.input } else { &trace.post[li - 1] };
        let g = &mut grad.layers[li];
        let mut dx = vec![0.0; layer.inputs];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g.bias[r] += d;
            let gw = &mut g.weights[r * layer.inputs..(r + 1) * layer.inputs];
            for (gwj, xj) in gw.iter_mut().zip(x) {
                *gwj += d * xj;
            }
            for (dxj, w) in dx.iter_mut().zip(layer.row(r)) {
                *dxj += d * w;
            }
        }
        dh = dx;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
