//! Experiment harnesses: per-triangle approximation quality, remeshing
//! invariance and sampling-time scaling, all emitting [`ExperimentRow`]s.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use rand::Rng;
use rayon::prelude::*;

use otsample_core::geometry::{CanonicalTriangle, Mesh, Vec2, Vec3};
use otsample_core::measures::{measure_from_points, GridQuadrature, Measure2};
use otsample_core::metrics::{chamfer, emd, fscore, hausdorff, EmdMode, DEFAULT_FSCORE_TAU};
use otsample_core::model::dataset::sample_apex;
use otsample_core::model::{
    generate_dataset, load_dataset, load_weights, save_dataset, save_weights, train, Dataset, DatasetConfig, MlpParams, TrainConfig,
    TrainRecord,
};
use otsample_core::ot::sinkhorn::{sinkhorn, SinkhornOptions};
use otsample_core::rng::{stream, Purpose};
use otsample_core::sampler::{sample_canonical, sample_mesh, sample_mesh_timed, SamplerMethod};

pub const ROW_SCHEMA: &str = "v1";
pub const ROW_HEADER: [&str; 8] = ["schema", "experiment", "item", "method", "n", "repetition", "metric", "value"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub experiment: String,
    pub item: String,
    pub method: String,
    pub n: usize,
    pub repetition: usize,
    pub metric: String,
    pub value: f64,
}

impl ExperimentRow {
    fn key(&self) -> (&str, &str, &str, usize, usize, &str) {
        (&self.experiment, &self.item, &self.method, self.n, self.repetition, &self.metric)
    }
}

pub fn sort_rows(rows: &mut [ExperimentRow]) {
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
}

/// Writes rows (sorted) with the fixed versioned header.
pub fn write_rows(rows: &[ExperimentRow], out: impl Write) -> Result<()> {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROW_HEADER)?;
    for r in &rows {
        w.write_record([
            ROW_SCHEMA,
            &r.experiment,
            &r.item,
            &r.method,
            &r.n.to_string(),
            &r.repetition.to_string(),
            &r.metric,
            &format!("{:.17e}", r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_rows(rows: &[ExperimentRow], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_rows(rows, std::io::BufWriter::new(f))
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Held-out triangle shapes, disjoint from dataset streams.
pub fn evaluation_apexes(seed: u64, count: usize) -> Vec<Vec2> {
    (0..count)
        .map(|i| sample_apex(&mut stream(seed, Purpose::Bench, i as u64, 0)))
        .collect()
}

/// Entropic `W2²` (primal plan cost) between uniform points and a grid measure.
pub fn w2_to_measure(points: &[Vec2], grid: &Measure2, epsilon: f64) -> Result<f64> {
    let mu = measure_from_points(points)?;
    let opts = SinkhornOptions::new(epsilon).with_tol(1e-6).with_max_iter(20_000);
    Ok(sinkhorn(&mu, grid, &opts)?.cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleBenchConfig {
    pub triangles: usize,
    pub ells: Vec<usize>,
    pub repetitions: usize,
    pub resolution: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TriangleBenchConfig {
    fn default() -> Self {
        Self {
            triangles: 500,
            ells: vec![5, 10, 25],
            repetitions: 3,
            resolution: 60,
            epsilon: 1e-3,
            seed: crate::config::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleSummary {
    pub method: String,
    pub ell: usize,
    /// Mean over triangles of the per-triangle mean `W2²`.
    pub mean: f64,
    /// Std over triangles of the per-triangle mean `W2²`.
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct TriangleBench {
    pub rows: Vec<ExperimentRow>,
    pub summary: Vec<TriangleSummary>,
    /// `ℓ → mean_uniform / mean_learned`.
    pub ratio_uniform_over_learned: BTreeMap<usize, f64>,
}

impl TriangleBench {
    pub fn get(&self, method: &str, ell: usize) -> Option<&TriangleSummary> {
        self.summary.iter().find(|s| s.method == method && s.ell == ell)
    }

    pub fn summary_rows(&self) -> Vec<ExperimentRow> {
        let mut out = Vec::new();
        for s in &self.summary {
            for (metric, value) in [("mean_w2sq", s.mean), ("std_w2sq", s.std)] {
                out.push(ExperimentRow {
                    experiment: "bench-triangle-summary".into(),
                    item: "all".into(),
                    method: s.method.clone(),
                    n: s.ell,
                    repetition: 0,
                    metric: metric.into(),
                    value,
                });
            }
        }
        for (&ell, &r) in &self.ratio_uniform_over_learned {
            out.push(ExperimentRow {
                experiment: "bench-triangle-summary".into(),
                item: "all".into(),
                method: "uniform/learned".into(),
                n: ell,
                repetition: 0,
                metric: "ratio_uniform_over_learned".into(),
                value: r,
            });
        }
        out
    }
}

/// `W2²` to the grid measure of random canonical triangles for each method.
pub fn bench_triangle(cfg: &TriangleBenchConfig, methods: &[SamplerMethod], progress: &(dyn Fn(usize) + Sync)) -> Result<TriangleBench> {
    let apexes = evaluation_apexes(cfg.seed, cfg.triangles);
    let per_tri: Vec<Result<Vec<ExperimentRow>>> = apexes
        .par_iter()
        .enumerate()
        .map(|(t, apex)| {
            let ct = CanonicalTriangle::from_apex(*apex);
            let grid = GridQuadrature::new(&ct, cfg.resolution)?.to_measure();
            let mut rows = Vec::new();
            for &ell in &cfg.ells {
                for rep in 0..cfg.repetitions {
                    for m in methods {
                        let path = (ell * 1000 + rep) as u64;
                        let mut rng = stream(cfg.seed, Purpose::Bench, t as u64, path + 1);
                        let pts = sample_canonical(&ct, ell, m, &mut rng)?;
                        rows.push(ExperimentRow {
                            experiment: "bench-triangle".into(),
                            item: format!("tri{t:04}"),
                            method: m.name().into(),
                            n: ell,
                            repetition: rep,
                            metric: "w2sq".into(),
                            value: w2_to_measure(&pts, &grid, cfg.epsilon)?,
                        });
                    }
                }
            }
            progress(t);
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_tri {
        rows.extend(r?);
    }
    sort_rows(&mut rows);
    let mut per: BTreeMap<(String, usize), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in &rows {
        per.entry((r.method.clone(), r.n)).or_default().entry(r.item.clone()).or_default().push(r.value);
    }
    let summary: Vec<TriangleSummary> = per
        .into_iter()
        .map(|((method, ell), by_tri)| {
            let means: Vec<f64> = by_tri.values().map(|v| mean_std(v).0).collect();
            let (mean, std) = mean_std(&means);
            TriangleSummary { method, ell, mean, std }
        })
        .collect();
    let mut ratio = BTreeMap::new();
    for &ell in &cfg.ells {
        let find = |m: &str| summary.iter().find(|s| s.method == m && s.ell == ell).map(|s| s.mean);
        if let (Some(u), Some(l)) = (find("uniform"), find("learned")) {
            ratio.insert(ell, u / l);
        }
    }
    Ok(TriangleBench {
        rows,
        summary,
        ratio_uniform_over_learned: ratio,
    })
}

/// Splits each face with probability `fraction` into four congruent
/// triangles at its edge midpoints. The surface is unchanged.
pub fn remesh(mesh: &Mesh, fraction: f64, seed: u64, repetition: u64) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut faces = Vec::with_capacity(mesh.faces.len() * 2);
    let mut mids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        let hit = stream(seed, Purpose::Remesh, repetition, f as u64).random::<f64>() < fraction;
        if !hit {
            faces.push(*face);
            continue;
        }
        let mut m = [0; 3];
        for e in 0..3 {
            let (a, b) = (face[e], face[(e + 1) % 3]);
            m[e] = *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push((mesh.vertices[a] + mesh.vertices[b]) * 0.5);
                vertices.len() - 1
            });
        }
        faces.push([face[0], m[0], m[2]]);
        faces.push([m[0], face[1], m[1]]);
        faces.push([m[2], m[1], face[2]]);
        faces.push([m[0], m[1], m[2]]);
    }
    Mesh::new(vertices, faces).expect("remesh keeps indices valid")
}

/// Uniform scale and offset mapping the mesh bounding box into `[0,1]³`
/// (longest side to 1, aspect preserved).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCube {
    pub offset: Vec3,
    pub scale: f64,
}

impl UnitCube {
    pub fn of_points(points: &[Vec3]) -> Self {
        let (mut lo, mut hi) = (Vec3::repeat(f64::MAX), Vec3::repeat(f64::MIN));
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let ext = (hi - lo).max();
        Self {
            offset: lo,
            scale: if ext > 0.0 { 1.0 / ext } else { 1.0 },
        }
    }

    pub fn of_mesh(mesh: &Mesh) -> Self {
        Self::of_points(&mesh.vertices)
    }

    pub fn apply(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|p| (p - self.offset) * self.scale).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemeshBenchConfig {
    pub reference_points: usize,
    pub sample_points: usize,
    pub repetitions: usize,
    pub fraction: f64,
    /// Cap on the reference size used for EMD; `None` skips EMD.
    pub emd_reference: Option<usize>,
    pub seed: u64,
}

impl Default for RemeshBenchConfig {
    fn default() -> Self {
        Self {
            reference_points: 100_000,
            sample_points: 10_000,
            repetitions: 10,
            fraction: 0.3,
            emd_reference: None,
            seed: crate::config::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemeshSummary {
    pub mesh: String,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct RemeshBench {
    pub rows: Vec<ExperimentRow>,
    pub summary: Vec<RemeshSummary>,
}

impl RemeshBench {
    pub fn get(&self, mesh: &str, method: &str, metric: &str) -> Option<&RemeshSummary> {
        self.summary.iter().find(|s| s.mesh == mesh && s.method == method && s.metric == metric)
    }

    pub fn summary_rows(&self) -> Vec<ExperimentRow> {
        self.summary
            .iter()
            .flat_map(|s| {
                [("mean", s.mean), ("std", s.std)].map(|(k, v)| ExperimentRow {
                    experiment: "bench-remesh-summary".into(),
                    item: s.mesh.clone(),
                    method: s.method.clone(),
                    n: 0,
                    repetition: 0,
                    metric: format!("{}_{k}", s.metric),
                    value: v,
                })
            })
            .collect()
    }
}

/// Samples a remeshed copy of every mesh with each method and compares it
/// with a dense uniform reference of the original, in unit-cube coordinates.
pub fn bench_remesh(
    meshes: &[(String, Mesh)],
    methods: &[SamplerMethod],
    cfg: &RemeshBenchConfig,
    progress: &dyn Fn(&str, usize),
) -> Result<RemeshBench> {
    let mut rows = Vec::new();
    for (mi, (name, mesh)) in meshes.iter().enumerate() {
        let unit = UnitCube::of_mesh(mesh);
        for rep in 0..cfg.repetitions {
            let rseed = otsample_core::rng::mix_key(cfg.seed, Purpose::Remesh, mi as u64, rep as u64);
            let reference = unit.apply(&sample_mesh(mesh, cfg.reference_points, &SamplerMethod::Uniform, rseed, false)?.points);
            let copy = remesh(mesh, cfg.fraction, cfg.seed, (mi * 1_000_003 + rep) as u64);
            for m in methods {
                let sseed = rseed.wrapping_add(1);
                let sample = unit.apply(&sample_mesh(&copy, cfg.sample_points, m, sseed, false)?.points);
                let mut push = |metric: &str, value: f64| {
                    rows.push(ExperimentRow {
                        experiment: "bench-remesh".into(),
                        item: name.clone(),
                        method: m.name().into(),
                        n: cfg.sample_points,
                        repetition: rep,
                        metric: metric.into(),
                        value,
                    })
                };
                push("chd", chamfer(&sample, &reference)?);
                push("hd", hausdorff(&sample, &reference)?);
                push("fs@0.01", fscore(&sample, &reference, DEFAULT_FSCORE_TAU)?);
                if let Some(cap) = cfg.emd_reference {
                    let r = &reference[..cap.min(reference.len())];
                    push("emd", emd(&sample, r, EmdMode::entropic())?);
                }
            }
            progress(name, rep);
        }
    }
    sort_rows(&mut rows);
    let mut per: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        per.entry((r.item.clone(), r.method.clone(), r.metric.clone())).or_default().push(r.value);
    }
    let summary = per
        .into_iter()
        .map(|((mesh, method, metric), v)| {
            let (mean, std) = mean_std(&v);
            RemeshSummary { mesh, method, metric, mean, std }
        })
        .collect();
    Ok(RemeshBench { rows, summary })
}

/// Wall time of sampling `n` points on each mesh (best of `repeats`).
pub fn timing_sweep(meshes: &[Mesh], n: usize, method: &SamplerMethod, seed: u64, repeats: usize) -> Result<Vec<(usize, Duration)>> {
    meshes
        .iter()
        .map(|m| {
            let mut best = Duration::MAX;
            for r in 0..repeats.max(1) {
                let (_, t) = sample_mesh_timed(m, n, method, seed + r as u64, false)?;
                best = best.min(t);
            }
            Ok((m.faces.len(), best))
        })
        .collect()
}

/// Least-squares line `t = a + b·x` and the largest relative deviation.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let dev = points
        .iter()
        .map(|&(x, y)| {
            let f = a + b * x;
            ((y - f) / f).abs()
        })
        .fold(0.0, f64::max);
    (a, b, dev)
}

pub fn write_history(history: &[TrainRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "epsilon", "loss", "fit", "spread", "valid_loss", "unconverged"])?;
    for r in history {
        let v = r.valid_loss.map(|v| format!("{v:.17e}")).unwrap_or_default();
        w.write_record([
            r.iteration.to_string(),
            format!("{:.17e}", r.epsilon),
            format!("{:.17e}", r.loss),
            format!("{:.17e}", r.fit),
            format!("{:.17e}", r.spread),
            v,
            r.unconverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_history(history: &[TrainRecord], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_history(history, std::io::BufWriter::new(f))
}

pub const DESK_DATASET_FILE: &str = "desk-dataset.mgd";
pub const DESK_WEIGHTS_FILE: &str = "desk-weights.mgn";
pub const DESK_HISTORY_FILE: &str = "desk-history.csv";

/// Loads the desk-scale dataset and trained weights from `dir`, generating
/// and training (seed 0, default hyperparameters) whatever is missing.
pub fn desk_artifacts(dir: &Path, log: &(dyn Fn(&str) + Sync)) -> Result<(Dataset, MlpParams)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let ds_path = dir.join(DESK_DATASET_FILE);
    let dataset = if ds_path.exists() {
        load_dataset(&ds_path)?
    } else {
        log(&format!("generating desk dataset into {}", ds_path.display()));
        let cfg = DatasetConfig::desk();
        let report = generate_dataset(&cfg, &|i| {
            if (i + 1) % 100 == 0 {
                log(&format!("  {} / {} triangles", i + 1, cfg.n_triangles));
            }
        })?;
        log(&format!("  dropped {} unconverged triangles", report.dropped.len()));
        save_dataset(&report.dataset, &ds_path)?;
        report.dataset
    };
    let w_path = dir.join(DESK_WEIGHTS_FILE);
    let params = if w_path.exists() {
        load_weights(&w_path)?
    } else {
        log(&format!("training desk model into {}", w_path.display()));
        let cfg = TrainConfig::default();
        let outcome = train(&dataset, &cfg, &mut |r| {
            if let Some(v) = r.valid_loss {
                log(&format!("  iter {:>6}  eps {:.1e}  valid {:.6e}", r.iteration, r.epsilon, v));
            }
        })?;
        save_history(&outcome.history, &dir.join(DESK_HISTORY_FILE))?;
        save_weights(&outcome.params, &w_path)?;
        outcome.params
    };
    Ok((dataset, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    #[test]
    fn remesh_preserves_surface() {
        let m = assets::icosahedron();
        let r = remesh(&m, 0.3, 1, 0);
        assert!(r.faces.len() > m.faces.len());
        assert!((r.total_area() - m.total_area()).abs() < 1e-12 * m.total_area());
        for v in &r.vertices[m.vertices.len()..] {
            let d = m.triangles().map(|t| t.plane_distance(v)).fold(f64::MAX, f64::min);
            assert!(d <= 1e-12);
        }
        assert_eq!(remesh(&m, 0.0, 1, 0).faces, m.faces);
        assert_eq!(remesh(&m, 0.3, 1, 0).faces, r.faces);
    }

    #[test]
    fn rows_sorted_with_header() {
        let row = |item: &str, rep| ExperimentRow {
            experiment: "e".into(),
            item: item.into(),
            method: "uniform".into(),
            n: 5,
            repetition: rep,
            metric: "w2sq".into(),
            value: 0.5,
        };
        let mut buf = Vec::new();
        write_rows(&[row("b", 0), row("a", 1), row("a", 0)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "schema,experiment,item,method,n,repetition,metric,value");
        assert!(lines[1].contains(",a,") && lines[1].contains(",0,w2sq"));
        assert!(lines[3].contains(",b,"));
    }

    #[test]
    fn linear_fit_exact_line() {
        let (a, b, dev) = linear_fit(&[(1.0, 3.0), (2.0, 5.0), (4.0, 9.0)]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && dev < 1e-12);
    }

    #[test]
    fn unit_cube_normalization() {
        let u = UnitCube::of_mesh(&assets::cube(1));
        let p = u.apply(&[Vec3::new(1.0, 1.0, 1.0)]);
        assert!((p[0] - Vec3::new(1.0, 1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn tiny_triangle_bench_orders_uniform_above_oracle() {
        let cfg = TriangleBenchConfig {
            triangles: 4,
            ells: vec![10],
            repetitions: 1,
            resolution: 40,
            ..TriangleBenchConfig::default()
        };
        let b = bench_triangle(&cfg, &[SamplerMethod::Uniform, SamplerMethod::oracle()], &|_| {}).unwrap();
        assert_eq!(b.rows.len(), 8);
        assert!(b.get("oracle", 10).unwrap().mean < b.get("uniform", 10).unwrap().mean);
    }
}
