//! End-to-end model pipeline: dataset generation, training and sampling.

use otsample_core::model::dataset::{generate_dataset, DatasetConfig};
use otsample_core::model::io::{dataset_from_bytes, dataset_to_bytes};
use otsample_core::model::train::{train, TrainConfig, TrainRecord};

fn small_dataset(n: usize, densities: Vec<usize>) -> otsample_core::model::Dataset {
    let cfg = DatasetConfig {
        n_triangles: n,
        densities,
        resolution: 40,
        atoms_per_site: 8,
        ..DatasetConfig::desk()
    };
    let rep = generate_dataset(&cfg, &|_| {}).unwrap();
    assert!(rep.dropped.len() * 10 <= n, "{} dropped", rep.dropped.len());
    rep.dataset
}

#[test]
fn desk_scale_dataset_targets_are_inside() {
    let ds = small_dataset(200, vec![30, 100]);
    assert!(ds.examples.iter().all(|e| e.targets_inside(1e-6)));
    assert!(ds.examples.iter().all(|e| e.targets[&30].len() == 30 && e.targets[&100].len() == 100));
    assert_eq!(dataset_from_bytes(&dataset_to_bytes(&ds).unwrap()).unwrap(), ds);
}

#[test]
fn zero_iterations_return_initialization() {
    let ds = small_dataset(4, vec![30]);
    let cfg = TrainConfig {
        iterations: 0,
        hidden: 8,
        ..TrainConfig::default()
    };
    let out = train(&ds, &cfg, &mut |_| {}).unwrap();
    assert_eq!(out.params, out.initial_params);
    assert_eq!(out.params, otsample_core::model::train::init_params(&cfg));
}

#[test]
fn smoke_training_reduces_losses() {
    let ds = small_dataset(40, vec![30, 60, 120]);
    let cfg = TrainConfig {
        iterations: 300,
        batch_size: 8,
        eval_every: 100,
        validation_fraction: 0.2,
        // the smoke run tests optimization, not the anneal
        epsilon: 1e-3,
        anneal_fraction: 0.0,
        ..TrainConfig::default()
    };
    let mut seen = Vec::new();
    let out = train(&ds, &cfg, &mut |r| seen.push(r.loss)).unwrap();
    let valid: Vec<f64> = out.history.iter().filter_map(|r| r.valid_loss).collect();
    assert!(valid.last().unwrap() < &valid[0], "{valid:?}");
    assert!(out.best_valid_loss <= valid[0]);
    let train_loss: Vec<f64> = out.history.iter().skip(1).map(|r| r.loss).collect();
    let head: f64 = train_loss[..50].iter().sum::<f64>() / 50.0;
    let tail: f64 = train_loss[train_loss.len() - 50..].iter().sum::<f64>() / 50.0;
    assert!(tail < head, "{head} → {tail}");
    let again = train(&ds, &cfg, &mut |_| {}).unwrap();
    // the iteration-0 record carries NaN training losses, so compare bit patterns
    let bits = |h: &[TrainRecord]| -> Vec<[u64; 6]> {
        h.iter()
            .map(|r| {
                let v = r.valid_loss.map_or(u64::MAX, f64::to_bits);
                [r.iteration as u64, r.epsilon.to_bits(), r.loss.to_bits(), r.fit.to_bits(), r.spread.to_bits(), v]
            })
            .collect()
    };
    assert_eq!(bits(&again.history), bits(&out.history));
    assert_eq!(again.params, out.params);
}
