//! Command-line front end: `mvgrf <subcommand> --config c.json --out dir/`.
//!
//! Every subcommand computes all of its outputs in memory, then writes them
//! together with `manifest.json` and prints a one-line JSON summary. Exit
//! codes: 0 success, 2 configuration or usage error, 3 numerical failure.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "MVGRF_THREADS";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Library(mvgrf::Error),
}

impl From<mvgrf::Error> for CliError {
    fn from(e: mvgrf::Error) -> Self {
        CliError::Library(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Library(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mvgrf", version, about = "Multivariate random fields: simulate, estimate covariances, benchmark, profile likelihoods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the configuration)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides the configuration)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 = one per core; falls back to MVGRF_THREADS
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral simulation of replicate fields
    Simulate(Common),
    /// Kernel-convolution simulation of replicate fields
    Convolve(Common),
    /// Markov precision sampling of replicate fields
    SpdeSample(Common),
    /// Exact cross-covariance of a spectral model or kernel
    Covariance(Common),
    /// Empirical cross-covariance of simulated or stored fields
    Empirical(Common),
    /// Cross-covariance asymmetry index
    Asymmetry(Common),
    /// Dense versus sparse factorization timings
    Bench(BenchArgs),
    /// Log-likelihood surface over (log σ², log κ)
    Profile(Common),
    /// Curvature of the likelihood at the maximum
    Ridge(Common),
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated site counts
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Number of components
    #[arg(long)]
    p: Option<usize>,
    /// Timed repetitions per size (median reported)
    #[arg(long)]
    repetitions: Option<usize>,
}

/// Result of a subcommand before anything touches the disk.
pub(crate) struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
    pub sqrt_method: String,
    pub seed: u64,
    pub config_raw: Option<String>,
    pub out: Option<PathBuf>,
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        _ => Ok(0),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_outputs(name: &str, outcome: &Outcome, threads: usize) -> Result<Vec<String>, CliError> {
    let out = outcome
        .out
        .as_deref()
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set \"out\" in the configuration".into()))?;
    std::fs::create_dir_all(out).map_err(mvgrf::Error::from)?;
    let mut written = Vec::new();
    for (file, bytes) in &outcome.files {
        std::fs::write(out.join(file), bytes).map_err(mvgrf::Error::from)?;
        written.push(file.clone());
    }
    let config_value = match &outcome.config_raw {
        Some(raw) => serde_json::from_str::<Value>(raw).unwrap_or(Value::Null),
        None => Value::Null,
    };
    let manifest = json!({
        "subcommand": name,
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": mvgrf_version(),
        "config_sha256": outcome.config_raw.as_deref().map(|r| sha256_hex(r.as_bytes())),
        "config": config_value,
        "seed": outcome.seed,
        "threads": threads,
        "sqrt_method": outcome.sqrt_method,
        "outputs": written,
        "summary": outcome.summary,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out.join("manifest.json"), text + "\n").map_err(mvgrf::Error::from)?;
    written.push("manifest.json".into());
    Ok(written)
}

fn mvgrf_version() -> &'static str {
    mvgrf::VERSION
}

fn dispatch(command: Command) -> (&'static str, Option<usize>, Box<dyn FnOnce() -> Result<Outcome, CliError> + Send>) {
    match command {
        Command::Simulate(c) => ("simulate", c.threads, Box::new(move || commands::simulate(&c))),
        Command::Convolve(c) => ("convolve", c.threads, Box::new(move || commands::convolve(&c))),
        Command::SpdeSample(c) => ("spde-sample", c.threads, Box::new(move || commands::spde_sample(&c))),
        Command::Covariance(c) => ("covariance", c.threads, Box::new(move || commands::covariance(&c))),
        Command::Empirical(c) => ("empirical", c.threads, Box::new(move || commands::empirical(&c))),
        Command::Asymmetry(c) => ("asymmetry", c.threads, Box::new(move || commands::asymmetry(&c))),
        Command::Bench(b) => {
            let threads = b.common.threads;
            ("bench", threads, Box::new(move || commands::bench(&b.common, b.sizes, b.p, b.repetitions)))
        }
        Command::Profile(c) => ("profile", c.threads, Box::new(move || commands::profile(&c))),
        Command::Ridge(c) => ("ridge", c.threads, Box::new(move || commands::ridge(&c))),
    }
}

/// Runs one subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (name, threads_flag, job) = dispatch(cli.command);
    let result = resolve_threads(threads_flag).and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
        let used = pool.current_num_threads();
        let outcome = pool.install(job)?;
        let written = write_outputs(name, &outcome, used)?;
        Ok((outcome, written))
    });
    match result {
        Ok((outcome, written)) => {
            let line = json!({ "subcommand": name, "status": "ok", "outputs": written, "summary": outcome.summary });
            println!("{line}");
            EXIT_OK
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("mvgrf {name}: {e}");
            println!("{}", json!({ "subcommand": name, "status": "error", "exit_code": code, "message": e.to_string() }));
            code
        }
    }
}

pub(crate) fn out_dir(flag: &Option<PathBuf>, config: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| config.clone())
}

pub(crate) fn seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config).unwrap_or(0)
}
