//! Command line front end: `check`, `spectrum`, `decompose`, `simulate`
//! and `visibility` over JSON topologies and configurations, with
//! deterministic CSV/JSON outputs.
//!
//! Exit codes: 0 on success, 2 when `check` classifies a protocol as not
//! gathering, 1 on any error. Output files are written atomically (temp
//! file + rename). Floats in CSV output carry 17 significant digits so a
//! round-trip through the file is lossless.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::classify;
use crate::decompose::{decompose, Configuration};
use crate::dynamics::{
    integrate_linear, integrate_normalized, visibility_monitor, Normalizer, Trajectory,
};
use crate::error::{Error, Result};
use crate::spectral::closed_form_spectrum;
use crate::topology::{CirculantTopology, WeightMatrix};

/// Environment variable capping ensemble worker threads.
pub const THREADS_ENV: &str = "SWARM_SPECTRAL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "swarm-spectral",
    version,
    about = "Gathering protocols on circulant topologies: classification, spectra, decomposition, simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a protocol; exit 0 if it gathers, 2 otherwise
    Check(CheckArgs),
    /// Closed-form eigenvalues, rates and subspace dimensions as CSV
    Spectrum(SpectrumArgs),
    /// Decompose an initial configuration into subspace components
    Decompose(DecomposeArgs),
    /// Integrate the protocol and write the trajectory as CSV
    Simulate(SimulateArgs),
    /// Integrate and track pairwise distances against a viewing radius
    Visibility(VisibilityArgs),
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Circulant topology JSON: {"n": 7, "w": [...], "name": "..."}
    #[arg(long, conflicts_with = "general", required_unless_present = "general")]
    pub topology: Option<PathBuf>,
    /// General weight matrix JSON: {"entries": [[...], ...]}
    #[arg(long)]
    pub general: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub topology: PathBuf,
    /// Write the spectrum CSV here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the generating configurations (j, agent, x, y) to this CSV
    #[arg(long)]
    pub generating_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub topology: PathBuf,
    /// Initial configuration JSON: {"positions": [[x, y], ...]}
    #[arg(long, conflicts_with = "random_seed", required_unless_present = "random_seed")]
    pub init: Option<PathBuf>,
    /// Draw the initial cloud uniformly from [-1,1]^2 with this seed
    #[arg(long)]
    pub random_seed: Option<u64>,
    /// Write the decomposition JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a CSV time series of alpha_j(t) and ||beta_j(t)|| here
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 20.0)]
    pub t_end: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub topology: PathBuf,
    /// Initial configuration JSON: {"positions": [[x, y], ...]}
    #[arg(long, conflicts_with = "random_seed", required_unless_present = "random_seed")]
    pub init: Option<PathBuf>,
    /// Draw the initial cloud uniformly from [-1,1]^2 with this seed
    #[arg(long)]
    pub random_seed: Option<u64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 20.0)]
    pub t_end: f64,
    /// Velocity normalizer: "identity" or "smooth:EPS"
    #[arg(long, default_value = "identity", value_parser = parse_normalizer)]
    pub normalizer: Normalizer,
    /// Keep every k-th integration step in the output
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Trajectory CSV: t, x_0, y_0, ..., x_{N-1}, y_{N-1}
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also check pairwise visibility against this radius and print the
    /// report
    #[arg(long)]
    pub radius: Option<f64>,
    /// Run this many trajectories from seeds S, S+1, ... concurrently
    /// (requires --random-seed and --out)
    #[arg(long)]
    pub ensemble: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VisibilityArgs {
    #[arg(long)]
    pub topology: PathBuf,
    #[arg(long, conflicts_with = "random_seed", required_unless_present = "random_seed")]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub random_seed: Option<u64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 20.0)]
    pub t_end: f64,
    #[arg(long, default_value = "identity", value_parser = parse_normalizer)]
    pub normalizer: Normalizer,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Viewing radius C
    #[arg(long)]
    pub radius: f64,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write per-edge distances over time to this CSV
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

fn nonpositive(x: f64) -> bool {
    !x.is_finite() || x <= 0.0
}

fn parse_normalizer(text: &str) -> std::result::Result<Normalizer, String> {
    if text == "identity" {
        return Ok(Normalizer::Identity);
    }
    if let Some(eps) = text.strip_prefix("smooth:") {
        let eps: f64 = eps
            .parse()
            .map_err(|e| format!("bad epsilon in normalizer: {e}"))?;
        return Normalizer::smooth(eps).map_err(|e| e.to_string());
    }
    Err(format!(
        "unknown normalizer '{text}': expected 'identity' or 'smooth:EPS'"
    ))
}

/// Execute a parsed command line. Returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Check(args) => run_check(args),
        Command::Spectrum(args) => run_spectrum(args),
        Command::Decompose(args) => run_decompose(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Visibility(args) => run_visibility(args),
    }
}

// ---------------------------------------------------------------------------
// file plumbing

#[derive(Debug, Deserialize)]
struct MatrixFile {
    entries: Vec<Vec<f64>>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

fn load_topology(path: &Path) -> Result<CirculantTopology> {
    read_json(path)
}

fn load_matrix(path: &Path) -> Result<WeightMatrix> {
    let file: MatrixFile = read_json(path)?;
    WeightMatrix::from_rows(&file.entries)
}

fn load_init(
    n: usize,
    init: &Option<PathBuf>,
    random_seed: Option<u64>,
) -> Result<Configuration> {
    let cfg = match (init, random_seed) {
        (Some(path), None) => read_json::<Configuration>(path)?,
        (None, Some(seed)) => Configuration::random(n, seed),
        _ => {
            return Err(Error::InvalidConfig(
                "exactly one of --init and --random-seed must be given".into(),
            ))
        }
    };
    if cfg.n() != n {
        return Err(Error::SizeMismatch {
            left: cfg.n(),
            right: n,
        });
    }
    Ok(cfg)
}

/// Full-precision decimal float: 17 significant digits round-trip any f64.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write through a temp file in the same directory, then rename into
/// place, so readers never observe partial output.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::write(&tmp, contents).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

fn emit(out: &Option<PathBuf>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            std::io::stdout().flush().map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// subcommands

fn run_check(args: CheckArgs) -> Result<i32> {
    let report = match (&args.topology, &args.general) {
        (Some(path), None) => classify::report_circulant(&load_topology(path)?)?,
        (None, Some(path)) => classify::report_general(&load_matrix(path)?)?,
        _ => {
            return Err(Error::InvalidConfig(
                "exactly one of --topology and --general must be given".into(),
            ))
        }
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(&args.out, &text)?;
    Ok(if report.gathering_spectral { 0 } else { 2 })
}

fn run_spectrum(args: SpectrumArgs) -> Result<i32> {
    let top = load_topology(&args.topology)?;
    let spec = closed_form_spectrum(&top);

    let mut csv = String::from("j,re_lambda,im_lambda,rate,dim,strong_stable\n");
    for s in &spec.subspaces {
        let lambda = spec.pairs[s.index].value;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.index,
            fmt_float(lambda.re),
            fmt_float(lambda.im),
            fmt_float(s.rate),
            s.dim,
            spec.strong_stable == Some(s.index)
        ));
    }
    emit(&args.out, &csv)?;

    if let Some(path) = &args.generating_config {
        let mut csv = String::from("j,agent,x,y\n");
        for s in &spec.subspaces {
            for (agent, p) in s.generating.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    s.index,
                    agent,
                    fmt_float(p[0]),
                    fmt_float(p[1])
                ));
            }
        }
        write_atomic(path, &csv)?;
    }
    Ok(0)
}

fn run_decompose(args: DecomposeArgs) -> Result<i32> {
    let top = load_topology(&args.topology)?;
    let spec = closed_form_spectrum(&top);
    let z0 = load_init(top.n(), &args.init, args.random_seed)?;
    let dec = decompose(&z0, &spec)?;

    let components: Vec<serde_json::Value> = dec
        .components()
        .iter()
        .map(|c| {
            json!({
                "j": c.index,
                "rate": c.rate,
                "decay_exponent": c.decay_exponent,
                "rotation": c.rotation,
                "dim": c.beta0.len(),
                "beta0": c.beta0.as_slice(),
                "norm_beta0": c.beta0.norm(),
            })
        })
        .collect();
    let report = json!({
        "zstar": [dec.zstar().x, dec.zstar().y],
        "components": components,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("decomposition serializes");
    text.push('\n');
    emit(&args.out, &text)?;

    if let Some(path) = &args.series {
        if nonpositive(args.dt) || nonpositive(args.t_end) {
            return Err(Error::InvalidIntegration(format!(
                "dt and T must be positive (dt = {}, T = {})",
                args.dt, args.t_end
            )));
        }
        let mut header = String::from("t");
        for c in dec.components() {
            header.push_str(&format!(",alpha_{0},norm_beta_{0}", c.index));
        }
        let mut csv = header;
        csv.push('\n');
        let steps = (args.t_end / args.dt).round() as usize;
        for step in 0..=steps {
            let t = step as f64 * args.dt;
            csv.push_str(&fmt_float(t));
            for state in dec.evolve(t) {
                csv.push_str(&format!(
                    ",{},{}",
                    fmt_float(state.alpha),
                    fmt_float(state.beta.norm())
                ));
            }
            csv.push('\n');
        }
        write_atomic(path, &csv)?;
    }
    Ok(0)
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states[0].n();
    let mut csv = String::from("t");
    for i in 0..n {
        csv.push_str(&format!(",x_{i},y_{i}"));
    }
    csv.push('\n');
    for (t, state) in traj.times.iter().zip(&traj.states) {
        csv.push_str(&fmt_float(*t));
        for p in state.positions() {
            csv.push_str(&format!(",{},{}", fmt_float(p.x), fmt_float(p.y)));
        }
        csv.push('\n');
    }
    csv
}

fn integrate_cli(
    top: &CirculantTopology,
    normalizer: &Normalizer,
    z0: &Configuration,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<Trajectory> {
    let matrix = top.dense_matrix();
    let mut traj = match normalizer {
        Normalizer::Identity => integrate_linear(&matrix, z0, dt, t_end, stride)?,
        nrm => integrate_normalized(&matrix, nrm, z0, dt, t_end, stride)?,
    };
    traj.meta.topology = top.name().map(str::to_owned);
    Ok(traj)
}

fn thread_cap() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        })
}

fn ensemble_path(base: &Path, seed: u64) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let mut name = format!("{stem}-seed{seed}");
    if let Some(ext) = base.extension().and_then(|s| s.to_str()) {
        name.push('.');
        name.push_str(ext);
    }
    base.with_file_name(name)
}

fn run_simulate(args: SimulateArgs) -> Result<i32> {
    let top = load_topology(&args.topology)?;

    if let Some(count) = args.ensemble {
        let (Some(base_seed), Some(out)) = (args.random_seed, &args.out) else {
            return Err(Error::InvalidConfig(
                "--ensemble needs --random-seed and --out".into(),
            ));
        };
        if count == 0 {
            return Err(Error::InvalidConfig("--ensemble must be at least 1".into()));
        }
        let seeds: Vec<u64> = (0..count as u64).map(|i| base_seed + i).collect();
        let workers = thread_cap().min(seeds.len()).max(1);
        let chunk_size = seeds.len().div_ceil(workers);
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::new();
            for chunk in seeds.chunks(chunk_size) {
                let top = &top;
                let normalizer = &args.normalizer;
                handles.push(scope.spawn(move || -> Result<()> {
                    for &seed in chunk {
                        let z0 = Configuration::random(top.n(), seed);
                        let traj =
                            integrate_cli(top, normalizer, &z0, args.dt, args.t_end, args.stride)?;
                        write_atomic(&ensemble_path(out, seed), &trajectory_csv(&traj))?;
                    }
                    Ok(())
                }));
            }
            for handle in handles {
                handle
                    .join()
                    .map_err(|_| Error::InvalidConfig("ensemble worker panicked".into()))??;
            }
            Ok(())
        })?;
        return Ok(0);
    }

    let z0 = load_init(top.n(), &args.init, args.random_seed)?;
    let traj = integrate_cli(&top, &args.normalizer, &z0, args.dt, args.t_end, args.stride)?;
    emit(&args.out, &trajectory_csv(&traj))?;

    if let Some(radius) = args.radius {
        let report = visibility_monitor(&traj, &top, radius)?;
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        print!("{text}");
    }
    Ok(0)
}

fn run_visibility(args: VisibilityArgs) -> Result<i32> {
    let top = load_topology(&args.topology)?;
    let z0 = load_init(top.n(), &args.init, args.random_seed)?;
    let traj = integrate_cli(&top, &args.normalizer, &z0, args.dt, args.t_end, args.stride)?;
    let report = visibility_monitor(&traj, &top, args.radius)?;

    if let Some(path) = &args.edges {
        let mut csv = String::from("t");
        for (i, j) in &report.edges {
            csv.push_str(&format!(",d_{i}_{j}"));
        }
        csv.push('\n');
        for (t, state) in traj.times.iter().zip(&traj.states) {
            csv.push_str(&fmt_float(*t));
            for &(i, j) in &report.edges {
                let d = (state.position(i) - state.position(j)).norm();
                csv.push_str(&format!(",{}", fmt_float(d)));
            }
            csv.push('\n');
        }
        write_atomic(path, &csv)?;
    }

    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    emit(&args.report, &text)?;
    Ok(0)
}
