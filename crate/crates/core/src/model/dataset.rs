//! Oracle training sets: random canonical triangles with Lloyd blue-noise
//! targets at several densities.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::geometry::{CanonicalTriangle, Vec2};
use crate::measures::{resolution_for_support, GridQuadrature};
use crate::ot::{lloyd_cvt, LloydOptions};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Apexes closer than this to the long edge are resampled.
pub const MIN_APEX_X: f64 = 1e-3;

/// Lloyd runs for targets stop once an iteration gains less than this
/// relative energy.
pub const DATASET_ENERGY_RTOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub apex: Vec2,
    /// Density → target points on the canonical triangle.
    pub targets: BTreeMap<usize, Vec<Vec2>>,
}

impl TrainingExample {
    pub fn triangle(&self) -> CanonicalTriangle {
        CanonicalTriangle::from_apex(self.apex)
    }

    /// Every target has nonnegative barycentric coordinates up to `tol`.
    pub fn targets_inside(&self, tol: f64) -> bool {
        let ct = self.triangle();
        self.targets
            .values()
            .flatten()
            .all(|p| ct.barycentric(p).iter().all(|&b| b >= -tol))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub densities: Vec<usize>,
    pub examples: Vec<TrainingExample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub n_triangles: usize,
    pub densities: Vec<usize>,
    /// Base grid resolution; raised per triangle to reach
    /// `atoms_per_site × max density` quadrature atoms.
    pub resolution: usize,
    pub atoms_per_site: usize,
    pub lloyd: LloydOptions,
    /// Keep examples whose Lloyd run hit its iteration cap.
    pub keep_unconverged: bool,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_triangles: 19_663,
            densities: vec![30, 50, 100, 200, 300, 500, 1000, 2000],
            resolution: 250,
            atoms_per_site: 30,
            lloyd: LloydOptions {
                outer_iters: 150,
                energy_rtol: DATASET_ENERGY_RTOL,
                ..LloydOptions::default()
            },
            keep_unconverged: false,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    /// Single-machine configuration used by the acceptance run.
    pub fn desk() -> Self {
        Self {
            n_triangles: 2000,
            densities: vec![30, 60, 120],
            resolution: 100,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_triangles == 0 {
            return Err(Error::InvalidArgument("n_triangles must be at least 1".into()));
        }
        if self.densities.is_empty() || self.densities.iter().any(|&d| !(1..=4000).contains(&d)) {
            return Err(Error::InvalidArgument("densities must lie in 1..=4000".into()));
        }
        Ok(())
    }
}

/// Uniform apex in the canonical half-lens `{x ≥ MIN_APEX_X, y ≤ ½, |a − (0,1)| ≤ 1}`.
pub fn sample_apex<R: Rng + ?Sized>(rng: &mut R) -> Vec2 {
    loop {
        let a = Vec2::new(rng.random::<f64>(), 0.5 * rng.random::<f64>());
        if a.x >= MIN_APEX_X && (a - Vec2::new(0.0, 1.0)).norm() <= 1.0 {
            return a;
        }
    }
}

/// Apex of triangle `index` of the dataset with this seed.
pub fn dataset_apex(seed: u64, index: usize) -> Vec2 {
    sample_apex(&mut stream(seed, Purpose::Dataset, index as u64, 0))
}

/// Builds the targets of one triangle; `Ok(None)` when a Lloyd run did not
/// converge and `keep_unconverged` is off.
pub fn generate_example(apex: Vec2, index: usize, cfg: &DatasetConfig) -> Result<Option<TrainingExample>> {
    let ct = CanonicalTriangle::from_apex(apex);
    let kmax = cfg.densities.iter().copied().max().unwrap_or(1);
    let res = resolution_for_support(&ct, cfg.resolution, cfg.atoms_per_site * kmax);
    let quad = GridQuadrature::new(&ct, res)?.to_measure();
    let mut targets = BTreeMap::new();
    for &k in &cfg.densities {
        let mut rng = stream(cfg.seed, Purpose::Dataset, index as u64, k as u64);
        let r = lloyd_cvt(&quad, k, &mut rng, &cfg.lloyd)?;
        if !r.converged && !cfg.keep_unconverged {
            return Ok(None);
        }
        targets.insert(k, r.sites);
    }
    Ok(Some(TrainingExample { apex, targets }))
}

#[derive(Debug, Clone)]
pub struct DatasetReport {
    pub dataset: Dataset,
    /// Indices of dropped triangles with the reason.
    pub dropped: Vec<(usize, String)>,
}

/// Generates the dataset in parallel; results do not depend on the thread
/// count. `progress` is called after each finished triangle.
pub fn generate_dataset(cfg: &DatasetConfig, progress: &(dyn Fn(usize) + Sync)) -> Result<DatasetReport> {
    cfg.validate()?;
    let mut densities = cfg.densities.clone();
    densities.sort_unstable();
    densities.dedup();
    let cfg = DatasetConfig {
        densities: densities.clone(),
        ..cfg.clone()
    };
    let outcomes: Vec<(usize, Result<Option<TrainingExample>>)> = (0..cfg.n_triangles)
        .into_par_iter()
        .map(|i| {
            let out = generate_example(dataset_apex(cfg.seed, i), i, &cfg);
            progress(i);
            (i, out)
        })
        .collect();
    let mut examples = Vec::new();
    let mut dropped = Vec::new();
    for (i, out) in outcomes {
        match out {
            Ok(Some(ex)) => examples.push(ex),
            Ok(None) => dropped.push((i, "lloyd did not converge".to_string())),
            Err(e) => dropped.push((i, e.to_string())),
        }
    }
    Ok(DatasetReport {
        dataset: Dataset { densities, examples },
        dropped,
    })
}
