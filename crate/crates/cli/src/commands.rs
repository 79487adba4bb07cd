//! Subcommands of the `otsample` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};

use otsample_core::metrics::{metric_report, EmdMode, ReportOptions, DEFAULT_FSCORE_TAU};
use otsample_core::model::mlp::{HIDDEN_LAYERS, INPUT_DIM, OUTPUT_DIM};
use otsample_core::model::{
    generate_dataset, load_dataset, load_weights, save_dataset, save_weights, train, DatasetConfig, MlpParams, TrainConfig,
};
use otsample_core::ot::semidiscrete::LloydOptions;
use otsample_core::sampler::{sample_mesh_timed, SamplerMethod};
use otsample_core::Mesh;

use crate::assets;
use crate::config::{parse_list, ConfigFile, DEFAULT_SEED};
use crate::experiments::{
    bench_remesh, bench_triangle, save_history, save_rows, RemeshBenchConfig, TriangleBenchConfig, UnitCube,
};
use crate::io::{load_mesh, read_point_cloud, write_point_cloud, CloudFormat, IoError};

/// Wrong or missing arguments; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

const CONVENTIONS: &str = "\
Conventions:
  chamfer       squared distances, mean P->Q plus mean Q->P
  hausdorff     max of the two directed maxima, unsquared
  fscore@tau    absolute tau (default 0.01) on unit-cube coordinates
  NC            mean |cos| between nearest-neighbour normals, both directions averaged
  normalization uniform scale and shift of the reference bounding box into [0,1]^3
  seeds         default 42; identical seeds give byte-identical files";

#[derive(Debug, Parser)]
#[command(name = "otsample", version, about = "Blue-noise point sampling of triangle meshes", after_help = CONVENTIONS)]
pub struct Cli {
    /// key = value file supplying defaults for the subcommand's flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a point cloud from a mesh
    #[command(after_help = CONVENTIONS)]
    Sample(SampleArgs),
    /// Generate a training set of optimal triangle samplings
    #[command(after_help = CONVENTIONS)]
    GenDataset(GenDatasetArgs),
    /// Train the sampler network on a dataset
    #[command(after_help = CONVENTIONS)]
    Train(TrainArgs),
    /// W2^2 to the triangle measure per method on random triangles
    #[command(after_help = CONVENTIONS)]
    BenchTriangle(BenchTriangleArgs),
    /// Distances between clouds sampled from a mesh and a remeshed copy
    #[command(after_help = CONVENTIONS)]
    BenchRemesh(BenchRemeshArgs),
    /// Compare two point-cloud files
    #[command(after_help = CONVENTIONS)]
    Metrics(MetricsArgs),
    /// Print network layout, bundled meshes and defaults
    #[command(after_help = CONVENTIONS)]
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Uniform,
    Learned,
    Oracle,
}

impl std::str::FromStr for MethodArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Mesh file (.obj/.off) or bundled mesh name
    #[arg(long)]
    pub mesh: Option<String>,
    /// Number of points
    #[arg(long)]
    pub n: Option<usize>,
    /// Sampler [default: uniform]
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Network weights (required by --method learned)
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Grid resolution of the oracle [default: 100]
    #[arg(long)]
    pub oracle_resolution: Option<usize>,
    /// Random seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (.xyz or .ply)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write face normals with every point
    #[arg(long)]
    pub normals: bool,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Number of triangles [default: 19663]
    #[arg(long)]
    pub triangles: Option<usize>,
    /// Comma-separated point counts [default: 30,50,100,200,300,500,1000,2000]
    #[arg(long)]
    pub densities: Option<String>,
    /// Base grid resolution [default: 250]
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Minimum quadrature atoms per site [default: 30]
    #[arg(long)]
    pub atoms_per_site: Option<usize>,
    /// Lloyd iteration cap [default: 150]
    #[arg(long)]
    pub lloyd_iters: Option<usize>,
    /// Keep triangles whose Lloyd run did not converge
    #[arg(long)]
    pub keep_unconverged: bool,
    /// Desk-scale preset: 2000 triangles, densities 30,60,120, resolution 100
    #[arg(long)]
    pub desk: bool,
    /// Random seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output dataset file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file from gen-dataset
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output weights file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss-history CSV [default: <out>.history.csv]
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Triangles per batch [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam iterations [default: 15000]
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight alpha of the spread term [default: 0.01]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Final entropic epsilon of the loss [default: 5e-5]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Epsilon before the final anneal [default: 1e-3]
    #[arg(long)]
    pub train_epsilon: Option<f64>,
    /// Fraction of iterations spent annealing to --epsilon [default: 0.1]
    #[arg(long)]
    pub anneal_fraction: Option<f64>,
    /// Dropout probability [default: 0.1]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Hidden-layer width [default: 64]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Validation interval in iterations [default: 500]
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Held-out fraction of the dataset [default: 0.1]
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Random seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchTriangleArgs {
    /// Comma-separated methods [default: uniform,learned,oracle]
    #[arg(long)]
    pub methods: Option<String>,
    /// Network weights (required by the learned method)
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Random triangles [default: 500]
    #[arg(long)]
    pub triangles: Option<usize>,
    /// Comma-separated point counts [default: 5,10,25]
    #[arg(long)]
    pub ells: Option<String>,
    /// Repetitions per triangle [default: 3]
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Grid resolution of the reference measure [default: 60]
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Entropic epsilon of the W2^2 estimate [default: 1e-3]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Random seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-sample CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary CSV (mean, std, ratio_uniform_over_learned)
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchRemeshArgs {
    /// Mesh files or bundled names [default: every bundled mesh]
    #[arg(long, num_args = 1..)]
    pub mesh: Vec<String>,
    /// Comma-separated methods [default: uniform,learned]
    #[arg(long)]
    pub methods: Option<String>,
    /// Network weights (required by the learned method)
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Reference points [default: 100000]
    #[arg(long)]
    pub reference: Option<usize>,
    /// Points per sampled cloud [default: 10000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Repetitions [default: 10]
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Fraction of faces subdivided [default: 0.3]
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Also report entropic EMD against this many reference points (e.g. 25000)
    #[arg(long)]
    pub emd_reference: Option<usize>,
    /// Random seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-repetition CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary CSV (means and stds)
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EmdArg {
    None,
    Auto,
    Exact,
    Entropic,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Sampled cloud (.xyz or .ply)
    pub cloud: PathBuf,
    /// Reference cloud (.xyz or .ply)
    pub reference: PathBuf,
    /// EMD computation [default: none]
    #[arg(long, value_enum)]
    pub emd: Option<EmdArg>,
    /// Epsilon of the entropic EMD [default: 1e-3]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// F-score threshold [default: 0.01]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Map both clouds with the reference's unit-cube normalization
    #[arg(long)]
    pub normalize: bool,
    /// Require normals and report NC
    #[arg(long)]
    pub nc: bool,
    /// Also write the report as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    /// Describe a weights file
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    }
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    let core = err
        .downcast_ref::<otsample_core::Error>()
        .or_else(|| match err.downcast_ref::<IoError>() {
            Some(IoError::Core(e)) => Some(e),
            _ => None,
        });
    match core {
        Some(otsample_core::Error::MissingNormals) => 2,
        _ => 1,
    }
}

/// Long help of the top-level command or of one subcommand.
pub fn help_text(sub: Option<&str>) -> String {
    let mut cmd = Cli::command();
    match sub {
        None => cmd.render_long_help().to_string(),
        Some(name) => cmd
            .find_subcommand_mut(name)
            .map(|c| c.render_long_help().to_string())
            .unwrap_or_default(),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = |keys: &[&str]| ConfigFile::load(cli.config.as_deref(), keys).map_err(|e| UsageError(format!("{e:#}")));
    match &cli.command {
        Command::Sample(a) => cmd_sample(a, &cfg(SAMPLE_KEYS)?),
        Command::GenDataset(a) => cmd_gen_dataset(a, &cfg(GEN_KEYS)?),
        Command::Train(a) => cmd_train(a, &cfg(TRAIN_KEYS)?),
        Command::BenchTriangle(a) => cmd_bench_triangle(a, &cfg(BENCH_TRIANGLE_KEYS)?),
        Command::BenchRemesh(a) => cmd_bench_remesh(a, &cfg(BENCH_REMESH_KEYS)?),
        Command::Metrics(a) => cmd_metrics(a, &cfg(METRICS_KEYS)?),
        Command::Info(a) => cmd_info(a),
    }
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    match v {
        Some(v) => Ok(v),
        None => usage(format!("missing required flag --{flag}")),
    }
}

/// Config lookups report bad values as usage errors.
fn pick<T: std::str::FromStr>(c: &ConfigFile, flag: Option<T>, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    c.pick(flag, key, default).map_err(|e| UsageError(format!("{e:#}")).into())
}

fn pick_opt<T: std::str::FromStr>(c: &ConfigFile, flag: Option<T>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => c.get(key).map_err(|e| UsageError(format!("{e:#}")).into()),
    }
}

fn list<T: std::str::FromStr>(s: &str, flag: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    match parse_list(s) {
        Ok(v) if !v.is_empty() => Ok(v),
        Ok(_) => usage(format!("--{flag} is empty")),
        Err(e) => usage(format!("--{flag}: {e:#}")),
    }
}

/// Bundled mesh name or mesh file.
pub fn resolve_mesh(name: &str) -> Result<Mesh> {
    if let Some(m) = assets::bundled(name) {
        return Ok(m);
    }
    let p = Path::new(name);
    if !p.exists() {
        return usage(format!(
            "mesh {name:?} is neither a file nor a bundled mesh ({})",
            assets::BUNDLED.join(", ")
        ));
    }
    Ok(load_mesh(p)?)
}

fn make_method(m: MethodArg, weights: Option<&Path>, oracle_resolution: usize) -> Result<SamplerMethod> {
    Ok(match m {
        MethodArg::Uniform => SamplerMethod::Uniform,
        MethodArg::Oracle => match SamplerMethod::oracle() {
            SamplerMethod::Oracle { lloyd, .. } => SamplerMethod::Oracle {
                resolution: oracle_resolution,
                lloyd,
            },
            other => other,
        },
        MethodArg::Learned => {
            let Some(w) = weights else {
                return usage("the learned method needs --weights <file>");
            };
            let params = load_weights(w).with_context(|| format!("loading weights {}", w.display()))?;
            SamplerMethod::learned(params)?
        }
    })
}

fn methods(list_arg: &str, weights: Option<&Path>) -> Result<Vec<SamplerMethod>> {
    list::<MethodArg>(list_arg, "methods")?
        .into_iter()
        .map(|m| make_method(m, weights, 100))
        .collect()
}

const SAMPLE_KEYS: &[&str] = &["mesh", "n", "method", "weights", "oracle-resolution", "seed", "out"];

fn cmd_sample(a: &SampleArgs, c: &ConfigFile) -> Result<()> {
    let mesh_name = required(pick_opt(c, a.mesh.clone(), "mesh")?, "mesh")?;
    let n = required(pick_opt(c, a.n, "n")?, "n")?;
    let out = required(pick_opt(c, a.out.clone(), "out")?, "out")?;
    let method = pick(c, a.method, "method", MethodArg::Uniform)?;
    let weights = pick_opt(c, a.weights.clone(), "weights")?;
    let seed = pick(c, a.seed, "seed", DEFAULT_SEED)?;
    let res = pick(c, a.oracle_resolution, "oracle-resolution", 100)?;
    let format = CloudFormat::from_path(&out).map_err(|e| UsageError(e.to_string()))?;
    let method = make_method(method, weights.as_deref(), res)?;
    let mesh = resolve_mesh(&mesh_name)?;
    let (cloud, time) = sample_mesh_timed(&mesh, n, &method, seed, a.normals)?;
    write_point_cloud(&cloud, &out, format)?;
    println!(
        "wrote {} points ({}) to {} in {:.3} ms",
        cloud.len(),
        method.name(),
        out.display(),
        time.as_secs_f64() * 1e3
    );
    Ok(())
}

const GEN_KEYS: &[&str] = &[
    "triangles",
    "densities",
    "resolution",
    "atoms-per-site",
    "lloyd-iters",
    "seed",
    "out",
];

pub fn dataset_config(a: &GenDatasetArgs, c: &ConfigFile) -> Result<DatasetConfig> {
    let base = if a.desk { DatasetConfig::desk() } else { DatasetConfig::default() };
    let densities = match pick_opt::<String>(c, a.densities.clone(), "densities")? {
        Some(s) => list(&s, "densities")?,
        None => base.densities.clone(),
    };
    Ok(DatasetConfig {
        n_triangles: pick(c, a.triangles, "triangles", base.n_triangles)?,
        densities,
        resolution: pick(c, a.resolution, "resolution", base.resolution)?,
        atoms_per_site: pick(c, a.atoms_per_site, "atoms-per-site", base.atoms_per_site)?,
        lloyd: LloydOptions {
            outer_iters: pick(c, a.lloyd_iters, "lloyd-iters", base.lloyd.outer_iters)?,
            ..base.lloyd
        },
        keep_unconverged: a.keep_unconverged,
        seed: pick(c, a.seed, "seed", DEFAULT_SEED)?,
    })
}

fn cmd_gen_dataset(a: &GenDatasetArgs, c: &ConfigFile) -> Result<()> {
    let out = required(pick_opt(c, a.out.clone(), "out")?, "out")?;
    let cfg = dataset_config(a, c)?;
    if cfg.n_triangles == 0 {
        return usage("--triangles must be positive");
    }
    let done = AtomicUsize::new(0);
    let step = (cfg.n_triangles / 20).max(1);
    let report = generate_dataset(&cfg, &|_| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if k % step == 0 {
            eprintln!("  {k} / {}", cfg.n_triangles);
        }
    })?;
    save_dataset(&report.dataset, &out)?;
    for (i, why) in &report.dropped {
        eprintln!("  dropped triangle {i}: {why}");
    }
    println!(
        "wrote {} examples (densities {:?}, {} dropped) to {}",
        report.dataset.examples.len(),
        report.dataset.densities,
        report.dropped.len(),
        out.display()
    );
    Ok(())
}

const TRAIN_KEYS: &[&str] = &[
    "dataset",
    "out",
    "history",
    "batch-size",
    "iterations",
    "lr",
    "alpha",
    "epsilon",
    "train-epsilon",
    "anneal-fraction",
    "dropout",
    "hidden",
    "eval-every",
    "validation-fraction",
    "seed",
];

pub fn train_config(a: &TrainArgs, c: &ConfigFile) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        batch_size: pick(c, a.batch_size, "batch-size", d.batch_size)?,
        iterations: pick(c, a.iterations, "iterations", d.iterations)?,
        adam: otsample_core::model::AdamConfig {
            learning_rate: pick(c, a.lr, "lr", d.adam.learning_rate)?,
            ..d.adam
        },
        dropout: pick(c, a.dropout, "dropout", d.dropout)?,
        alpha: pick(c, a.alpha, "alpha", d.alpha)?,
        epsilon: pick(c, a.epsilon, "epsilon", d.epsilon)?,
        train_epsilon: pick(c, a.train_epsilon, "train-epsilon", d.train_epsilon)?,
        anneal_fraction: pick(c, a.anneal_fraction, "anneal-fraction", d.anneal_fraction)?,
        hidden: pick(c, a.hidden, "hidden", d.hidden)?,
        eval_every: pick(c, a.eval_every, "eval-every", d.eval_every)?,
        validation_fraction: pick(c, a.validation_fraction, "validation-fraction", d.validation_fraction)?,
        seed: pick(c, a.seed, "seed", DEFAULT_SEED)?,
        ..d
    };
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    Ok(cfg)
}

fn cmd_train(a: &TrainArgs, c: &ConfigFile) -> Result<()> {
    let ds_path = required(pick_opt(c, a.dataset.clone(), "dataset")?, "dataset")?;
    let out = required(pick_opt(c, a.out.clone(), "out")?, "out")?;
    let history = pick_opt(c, a.history.clone(), "history")?.unwrap_or_else(|| {
        let mut s = out.clone().into_os_string();
        s.push(".history.csv");
        PathBuf::from(s)
    });
    let cfg = train_config(a, c)?;
    let ds = load_dataset(&ds_path).with_context(|| format!("loading dataset {}", ds_path.display()))?;
    eprintln!(
        "training on {} examples: batch {}, {} iterations, alpha {}, epsilon {:e}",
        ds.examples.len(),
        cfg.batch_size,
        cfg.iterations,
        cfg.alpha,
        cfg.epsilon
    );
    let outcome = train(&ds, &cfg, &mut |r| {
        if let Some(v) = r.valid_loss {
            eprintln!("  iter {:>6}  eps {:.1e}  valid {:.6e}", r.iteration, r.epsilon, v);
        }
    })?;
    save_weights(&outcome.params, &out)?;
    save_history(&outcome.history, &history)?;
    println!(
        "wrote weights (best validation {:.6e} at iteration {}) to {}; history to {}",
        outcome.best_valid_loss,
        outcome.best_iteration,
        out.display(),
        history.display()
    );
    Ok(())
}

const BENCH_TRIANGLE_KEYS: &[&str] = &[
    "methods",
    "weights",
    "triangles",
    "ells",
    "repetitions",
    "resolution",
    "epsilon",
    "seed",
    "out",
    "summary",
];

fn cmd_bench_triangle(a: &BenchTriangleArgs, c: &ConfigFile) -> Result<()> {
    let d = TriangleBenchConfig::default();
    let weights = pick_opt(c, a.weights.clone(), "weights")?;
    let methods = methods(&pick(c, a.methods.clone(), "methods", "uniform,learned,oracle".into())?, weights.as_deref())?;
    let ells = match pick_opt::<String>(c, a.ells.clone(), "ells")? {
        Some(s) => list(&s, "ells")?,
        None => d.ells.clone(),
    };
    if ells.iter().any(|&l| l == 0 || l > otsample_core::sampler::MAX_FACE_POINTS) {
        return usage("--ells must lie in 1..=30");
    }
    let cfg = TriangleBenchConfig {
        triangles: pick(c, a.triangles, "triangles", d.triangles)?,
        ells,
        repetitions: pick(c, a.repetitions, "repetitions", d.repetitions)?,
        resolution: pick(c, a.resolution, "resolution", d.resolution)?,
        epsilon: pick(c, a.epsilon, "epsilon", d.epsilon)?,
        seed: pick(c, a.seed, "seed", DEFAULT_SEED)?,
    };
    let out = pick_opt(c, a.out.clone(), "out")?;
    let summary_path = pick_opt(c, a.summary.clone(), "summary")?;
    let bench = bench_triangle(&cfg, &methods, &|_| {})?;
    if let Some(p) = out {
        save_rows(&bench.rows, &p)?;
    }
    let summary = bench.summary_rows();
    if let Some(p) = summary_path {
        save_rows(&summary, &p)?;
    }
    println!("{:<10} {:>4} {:>14} {:>14}", "method", "ell", "mean W2^2", "std");
    for s in &bench.summary {
        println!("{:<10} {:>4} {:>14.6e} {:>14.6e}", s.method, s.ell, s.mean, s.std);
    }
    for (ell, r) in &bench.ratio_uniform_over_learned {
        println!("ratio_uniform_over_learned ell={ell}: {r:.4}");
    }
    Ok(())
}

const BENCH_REMESH_KEYS: &[&str] = &[
    "methods",
    "weights",
    "reference",
    "samples",
    "repetitions",
    "fraction",
    "emd-reference",
    "seed",
    "out",
    "summary",
];

fn cmd_bench_remesh(a: &BenchRemeshArgs, c: &ConfigFile) -> Result<()> {
    let d = RemeshBenchConfig::default();
    let weights = pick_opt(c, a.weights.clone(), "weights")?;
    let methods = methods(&pick(c, a.methods.clone(), "methods", "uniform,learned".into())?, weights.as_deref())?;
    let names: Vec<String> = if a.mesh.is_empty() {
        assets::BUNDLED.iter().map(|s| s.to_string()).collect()
    } else {
        a.mesh.clone()
    };
    let meshes = names
        .iter()
        .map(|n| Ok((n.clone(), resolve_mesh(n)?)))
        .collect::<Result<Vec<_>>>()?;
    let cfg = RemeshBenchConfig {
        reference_points: pick(c, a.reference, "reference", d.reference_points)?,
        sample_points: pick(c, a.samples, "samples", d.sample_points)?,
        repetitions: pick(c, a.repetitions, "repetitions", d.repetitions)?,
        fraction: pick(c, a.fraction, "fraction", d.fraction)?,
        emd_reference: pick_opt(c, a.emd_reference, "emd-reference")?,
        seed: pick(c, a.seed, "seed", DEFAULT_SEED)?,
    };
    if !(0.0..=1.0).contains(&cfg.fraction) {
        return usage("--fraction must lie in [0, 1]");
    }
    let out = pick_opt(c, a.out.clone(), "out")?;
    let summary_path = pick_opt(c, a.summary.clone(), "summary")?;
    let bench = bench_remesh(&meshes, &methods, &cfg, &|m, r| eprintln!("  {m}: repetition {} done", r + 1))?;
    if let Some(p) = out {
        save_rows(&bench.rows, &p)?;
    }
    if let Some(p) = summary_path {
        save_rows(&bench.summary_rows(), &p)?;
    }
    println!("{:<14} {:<10} {:<8} {:>14} {:>14}", "mesh", "method", "metric", "mean", "std");
    for s in &bench.summary {
        println!("{:<14} {:<10} {:<8} {:>14.6e} {:>14.6e}", s.mesh, s.method, s.metric, s.mean, s.std);
    }
    Ok(())
}

const METRICS_KEYS: &[&str] = &["emd", "epsilon", "tau", "csv"];

impl std::str::FromStr for EmdArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

fn cmd_metrics(a: &MetricsArgs, c: &ConfigFile) -> Result<()> {
    let p = read_point_cloud(&a.cloud)?;
    let q = read_point_cloud(&a.reference)?;
    let (pp, qp) = if a.normalize {
        let u = UnitCube::of_points(&q.points);
        (u.apply(&p.points), u.apply(&q.points))
    } else {
        (p.points.clone(), q.points.clone())
    };
    let eps = pick(c, a.epsilon, "epsilon", EmdMode::DEFAULT_EPSILON)?;
    let emd = match pick(c, a.emd, "emd", EmdArg::None)? {
        EmdArg::None => None,
        EmdArg::Auto => Some(otsample_core::metrics::auto_emd_mode(pp.len(), qp.len())),
        EmdArg::Exact => {
            if pp.len() != qp.len() {
                return usage(format!(
                    "{}; exact EMD needs equal-size clouds, use --emd entropic",
                    otsample_core::Error::SizeMismatch(pp.len(), qp.len())
                ));
            }
            Some(EmdMode::Exact)
        }
        EmdArg::Entropic => Some(EmdMode::Entropic { epsilon: eps }),
    };
    let opts = ReportOptions {
        emd,
        fscore_tau: pick(c, a.tau, "tau", DEFAULT_FSCORE_TAU)?,
        require_normals: a.nc,
    };
    let report = match metric_report(&pp, p.normals.as_deref(), &qp, q.normals.as_deref(), &opts) {
        Err(otsample_core::Error::TooLarge { size, limit }) => {
            return usage(format!(
                "exact EMD is limited to {limit} points (got {size}), use --emd entropic"
            ))
        }
        r => r?,
    };
    println!("{report}");
    if let Some(path) = pick_opt(c, a.csv.clone(), "csv")? {
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["metric", "value"])?;
        let mut row = |k: &str, v: f64| w.write_record([k.to_string(), format!("{v:.17e}")]);
        row("chamfer", report.chamfer)?;
        if let (Some(e), Some(m)) = (report.emd, report.emd_mode) {
            row(&format!("emd[{m}]"), e)?;
        }
        row("hausdorff", report.hausdorff)?;
        row(&format!("fscore@{}", report.fscore_tau), report.fscore)?;
        if let Some(nc) = report.normal_consistency {
            row("normal_consistency", nc)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_info(a: &InfoArgs) -> Result<()> {
    let t = TrainConfig::default();
    let hidden = MlpParams::zeros(t.hidden);
    println!("otsample {}", env!("CARGO_PKG_VERSION"));
    println!(
        "network: {INPUT_DIM} -> {HIDDEN_LAYERS}x{} -> {OUTPUT_DIM} (ReLU, sigmoid output), {} parameters",
        t.hidden,
        hidden.num_params()
    );
    println!(
        "training defaults: batch {}, iterations {}, lr {}, alpha {}, epsilon {:e} (anneal from {:e}), dropout {}",
        t.batch_size, t.iterations, t.adam.learning_rate, t.alpha, t.epsilon, t.train_epsilon, t.dropout
    );
    println!("default seed: {DEFAULT_SEED}");
    println!("bundled meshes:");
    for name in assets::BUNDLED {
        let m = assets::bundled(name).expect("bundled");
        println!(
            "  {name:<12} {:>6} vertices {:>6} faces  area {:.6}",
            m.vertices.len(),
            m.faces.len(),
            m.total_area()
        );
    }
    if let Some(w) = &a.weights {
        let p = load_weights(w).with_context(|| format!("loading weights {}", w.display()))?;
        let dims: Vec<(usize, usize)> = p.layers.iter().map(|l| (l.inputs, l.outputs)).collect();
        if dims.first().map(|d| d.0) != Some(INPUT_DIM) || dims.last().map(|d| d.1) != Some(OUTPUT_DIM) {
            bail!("{}: not a sampler network (layers {:?})", w.display(), dims);
        }
        println!("weights {}: layers {:?}, {} parameters", w.display(), dims, p.num_params());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_lists_defaults_and_conventions() {
        let h = help_text(Some("train"));
        for s in ["32", "15000", "0.01", "5e-5"] {
            assert!(h.contains(s), "missing {s} in\n{h}");
        }
        let d = TrainConfig::default();
        assert_eq!((d.batch_size, d.iterations, d.alpha, d.epsilon), (32, 15000, 0.01, 5e-5));
        for sub in ["sample", "gen-dataset", "train", "bench-triangle", "bench-remesh", "metrics", "info"] {
            let h = help_text(Some(sub));
            assert!(h.contains("chamfer") && h.contains("NC") && h.contains("normalization"), "{sub}");
        }
    }

    #[test]
    fn config_file_feeds_flags_and_rejects_unknown_keys() {
        let c = ConfigFile::parse("iterations = 7\nalpha = 0.5", TRAIN_KEYS).unwrap();
        let cli = Cli::try_parse_from(["otsample", "train", "--alpha", "0.25"]).unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        let cfg = train_config(&a, &c).unwrap();
        assert_eq!((cfg.iterations, cfg.alpha, cfg.seed), (7, 0.25, DEFAULT_SEED));
        assert!(ConfigFile::parse("bogus = 1", TRAIN_KEYS).is_err());
    }
}
