//! Mini-batch training loop with ε annealing and best-validation checkpoints.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::dataset::{Dataset, TrainingExample};
use super::loss::{example_loss, target_density, ExampleDraw, LossTerms};
use super::mlp::{MlpParams, HIDDEN_WIDTH};
use crate::measures::measure_from_points;
use crate::ot::sinkhorn::{sinkhorn_self, SinkhornOptions};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub adam: AdamConfig,
    pub dropout: f64,
    pub alpha: f64,
    /// Final entropic regularization.
    pub epsilon: f64,
    /// Regularization before the anneal starts.
    pub train_epsilon: f64,
    /// Trailing fraction of iterations over which ε decays to `epsilon`.
    pub anneal_fraction: f64,
    /// Number of geometric ε stages of the anneal.
    pub anneal_stages: usize,
    pub hidden: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Validation cadence in iterations.
    pub eval_every: usize,
    /// Cap on validation examples.
    pub validation_max: usize,
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iter: usize,
    pub validation_max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            iterations: 15_000,
            adam: AdamConfig::default(),
            dropout: 0.1,
            alpha: 0.01,
            epsilon: 5e-5,
            train_epsilon: 1e-3,
            anneal_fraction: 0.1,
            anneal_stages: 8,
            hidden: HIDDEN_WIDTH,
            seed: 0,
            validation_fraction: 0.1,
            eval_every: 500,
            validation_max: 128,
            sinkhorn_tol: 1e-4,
            sinkhorn_max_iter: 300,
            validation_max_iter: 2000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.alpha >= 0.0) {
            return bad("alpha must be nonnegative");
        }
        if !(self.epsilon > 0.0) || !(self.train_epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return bad("batch size and hidden width must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) || !(0.0..=1.0).contains(&self.anneal_fraction) {
            return bad("fractions must lie in [0, 1)");
        }
        Ok(())
    }

    /// Anneal stage at `iter`: 0 before the anneal, then `1..=anneal_stages`.
    pub fn stage(&self, iter: usize) -> usize {
        let n = self.iterations as f64;
        let start = n * (1.0 - self.anneal_fraction);
        if (iter as f64) < start || self.anneal_stages == 0 {
            return 0;
        }
        let span = (n - start).max(1.0);
        let s = (((iter as f64 - start) / span) * self.anneal_stages as f64).floor() as usize + 1;
        s.min(self.anneal_stages)
    }

    pub fn stage_epsilon(&self, stage: usize) -> f64 {
        if stage == 0 || self.anneal_stages == 0 {
            return if self.anneal_stages == 0 { self.epsilon } else { self.train_epsilon };
        }
        let t = stage as f64 / self.anneal_stages as f64;
        self.train_epsilon * (self.epsilon / self.train_epsilon).powf(t)
    }

    pub fn epsilon_at(&self, iter: usize) -> f64 {
        self.stage_epsilon(self.stage(iter))
    }

    fn sinkhorn(&self, epsilon: f64, max_iter: usize) -> SinkhornOptions {
        SinkhornOptions::new(epsilon)
            .with_tol(self.sinkhorn_tol)
            .with_max_iter(max_iter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    pub epsilon: f64,
    pub loss: f64,
    pub fit: f64,
    pub spread: f64,
    pub valid_loss: Option<f64>,
    /// Batch examples whose Sinkhorn solves hit the iteration cap.
    pub unconverged: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation parameters.
    pub params: MlpParams,
    pub final_params: MlpParams,
    pub initial_params: MlpParams,
    pub history: Vec<TrainRecord>,
    pub best_iteration: usize,
    pub best_valid_loss: f64,
    pub train_indices: Vec<usize>,
    pub valid_indices: Vec<usize>,
}

/// Seeded 90/10-style split of `0..n`; validation gets at least one example
/// when `n ≥ 2` and the fraction is positive.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, Purpose::Validation, 0, 0));
    let mut nv = (n as f64 * fraction).round() as usize;
    if fraction > 0.0 && n >= 2 {
        nv = nv.max(1);
    }
    let nv = nv.min(n.saturating_sub(1));
    let valid = idx[..nv].to_vec();
    (idx[nv..].to_vec(), valid)
}

pub fn init_params(cfg: &TrainConfig) -> MlpParams {
    MlpParams::init(cfg.hidden, &mut stream(cfg.seed, Purpose::Init, 0, 0))
}

fn target<'a>(ex: &'a TrainingExample, densities: &[usize], ell: usize) -> Result<(usize, &'a [crate::Vec2])> {
    let d = target_density(densities, ell).ok_or(Error::EmptyMeasure)?;
    let pts = ex.targets.get(&d).ok_or(Error::EmptyMeasure)?;
    Ok((d, pts))
}

type SelfCache = HashMap<(usize, usize, usize), f64>;

fn fill_cache(
    cache: &mut SelfCache,
    ds: &Dataset,
    keys: &[(usize, usize, usize)],
    opts_for: &(dyn Fn(usize) -> SinkhornOptions + Sync),
) -> Result<()> {
    let mut missing: Vec<_> = keys.iter().copied().filter(|k| !cache.contains_key(k)).collect();
    missing.sort_unstable();
    missing.dedup();
    let vals: Vec<Result<f64>> = missing
        .par_iter()
        .map(|&(ex, d, stage)| {
            let m = measure_from_points(&ds.examples[ex].targets[&d])?;
            Ok(sinkhorn_self(&m, &opts_for(stage))?.regularized_cost)
        })
        .collect();
    for (k, v) in missing.into_iter().zip(vals) {
        cache.insert(k, v?);
    }
    Ok(())
}

/// Fixed validation draws: eval mode, one block size and noise pair per example.
fn validation_draws(cfg: &TrainConfig, valid: &[usize]) -> Vec<(usize, ExampleDraw)> {
    valid
        .iter()
        .take(cfg.validation_max)
        .map(|&i| {
            let mut rng = stream(cfg.seed, Purpose::Validation, i as u64, 1);
            (i, ExampleDraw::sample(&mut rng, cfg.hidden, 0.0))
        })
        .collect()
}

/// Mean eval-mode loss at the final ε over the fixed validation draws.
pub fn validation_loss(
    params: &MlpParams,
    ds: &Dataset,
    draws: &[(usize, ExampleDraw)],
    cfg: &TrainConfig,
    cache: &mut SelfCache,
) -> Result<f64> {
    if draws.is_empty() {
        return Ok(f64::NAN);
    }
    let stage = usize::MAX;
    let opts = cfg.sinkhorn(cfg.epsilon, cfg.validation_max_iter);
    let keys: Vec<_> = draws
        .iter()
        .map(|(i, d)| Ok((*i, target(&ds.examples[*i], &ds.densities, d.ell)?.0, stage)))
        .collect::<Result<_>>()?;
    fill_cache(cache, ds, &keys, &|_| opts)?;
    let losses: Vec<Result<f64>> = draws
        .par_iter()
        .zip(&keys)
        .map(|((i, d), key)| {
            let ex = &ds.examples[*i];
            let (_, pts) = target(ex, &ds.densities, d.ell)?;
            let t = example_loss(params, &ex.triangle(), pts, d, cfg.alpha, &opts, cache.get(key).copied(), None)?;
            Ok(t.loss)
        })
        .collect();
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / draws.len() as f64)
}

/// Trains from the seeded initialization; `observer` sees every record.
pub fn train(ds: &Dataset, cfg: &TrainConfig, observer: &mut dyn FnMut(&TrainRecord)) -> Result<TrainOutcome> {
    train_from(ds, cfg, init_params(cfg), observer)
}

pub fn train_from(
    ds: &Dataset,
    cfg: &TrainConfig,
    initial: MlpParams,
    observer: &mut dyn FnMut(&TrainRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    initial.validate()?;
    if ds.examples.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let (train_idx, valid_idx) = split_indices(ds.examples.len(), cfg.validation_fraction, cfg.seed);
    let draws = validation_draws(cfg, &valid_idx);
    let mut cache = SelfCache::new();
    let mut params = initial.clone();
    let mut adam = AdamState::new(&params);
    let mut history = Vec::new();

    let mut best = params.clone();
    let mut best_iter = 0;
    let mut best_valid = validation_loss(&params, ds, &draws, cfg, &mut cache)?;
    let first = TrainRecord {
        iteration: 0,
        epsilon: cfg.epsilon_at(0),
        loss: f64::NAN,
        fit: f64::NAN,
        spread: f64::NAN,
        valid_loss: Some(best_valid),
        unconverged: 0,
    };
    observer(&first);
    history.push(first);

    let opts_for = |stage: usize| cfg.sinkhorn(cfg.stage_epsilon(stage), cfg.sinkhorn_max_iter);
    for iter in 0..cfg.iterations {
        let stage = cfg.stage(iter);
        let opts = opts_for(stage);
        let mut rng = stream(cfg.seed, Purpose::Batch, iter as u64, 0);
        let batch: Vec<(usize, ExampleDraw)> = (0..cfg.batch_size)
            .map(|slot| {
                let ex = train_idx[rng.random_range(0..train_idx.len())];
                let mut r = stream(cfg.seed, Purpose::Batch, iter as u64, slot as u64 + 1);
                (ex, ExampleDraw::sample(&mut r, cfg.hidden, cfg.dropout))
            })
            .collect();
        let keys: Vec<_> = batch
            .iter()
            .map(|(i, d)| Ok((*i, target(&ds.examples[*i], &ds.densities, d.ell)?.0, stage)))
            .collect::<Result<_>>()?;
        fill_cache(&mut cache, ds, &keys, &opts_for)?;
        let scale = 1.0 / cfg.batch_size as f64;
        let results: Vec<Result<(LossTerms, MlpParams)>> = batch
            .par_iter()
            .zip(&keys)
            .map(|((i, d), key)| {
                let ex = &ds.examples[*i];
                let (_, pts) = target(ex, &ds.densities, d.ell)?;
                let mut g = params.zeros_like();
                let t = example_loss(&params, &ex.triangle(), pts, d, cfg.alpha, &opts, cache.get(key).copied(), Some((&mut g, scale)))?;
                Ok((t, g))
            })
            .collect();
        let mut grad = params.zeros_like();
        let (mut loss, mut fit, mut spread, mut unconverged) = (0.0, 0.0, 0.0, 0);
        for r in results {
            let (t, g) = r?;
            grad.add_scaled(&g, 1.0);
            loss += t.loss * scale;
            fit += t.fit * scale;
            spread += t.spread * scale;
            unconverged += usize::from(!t.converged);
        }
        if grad.is_finite() {
            adam_step(&mut params, &grad, &mut adam, &cfg.adam)?;
        }
        let done = iter + 1;
        let valid_loss = if done % cfg.eval_every.max(1) == 0 || done == cfg.iterations {
            let v = validation_loss(&params, ds, &draws, cfg, &mut cache)?;
            if v < best_valid || best_valid.is_nan() {
                best_valid = v;
                best = params.clone();
                best_iter = done;
            }
            Some(v)
        } else {
            None
        };
        let rec = TrainRecord {
            iteration: done,
            epsilon: opts.epsilon,
            loss,
            fit,
            spread,
            valid_loss,
            unconverged,
        };
        observer(&rec);
        history.push(rec);
    }
    if draws.is_empty() {
        best = params.clone();
        best_iter = cfg.iterations;
    }
    Ok(TrainOutcome {
        params: best,
        final_params: params,
        initial_params: initial,
        history,
        best_iteration: best_iter,
        best_valid_loss: best_valid,
        train_indices: train_idx,
        valid_indices: valid_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anneal_schedule() {
        let cfg = TrainConfig {
            iterations: 100,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.epsilon_at(0), 1e-3);
        assert_eq!(cfg.epsilon_at(89), 1e-3);
        assert!(cfg.epsilon_at(90) < 1e-3);
        assert!((cfg.epsilon_at(99) - 5e-5).abs() < 1e-15);
        let eps: Vec<f64> = (0..100).map(|i| cfg.epsilon_at(i)).collect();
        assert!(eps.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn documented_defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.batch_size, c.iterations, c.alpha, c.epsilon), (32, 15_000, 0.01, 5e-5));
        assert!(TrainConfig { alpha: -1.0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { dropout: 1.0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { epsilon: 0.0, ..c }.validate().is_err());
    }

    #[test]
    fn split_is_seeded_partition() {
        let (t, v) = split_indices(200, 0.1, 4);
        assert_eq!(v.len(), 20);
        let mut all: Vec<usize> = t.iter().chain(&v).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
        assert_eq!(split_indices(200, 0.1, 4), (t, v));
        assert_ne!(split_indices(200, 0.1, 5).1, split_indices(200, 0.1, 4).1);
    }
}
