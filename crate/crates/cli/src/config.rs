//! Strict JSON run configurations, one per subcommand.

use std::path::{Path, PathBuf};

use mvgrf::convolution::{KernelSpec, NoiseMeasureSpec};
use mvgrf::likelihood::ModelFamily;
use mvgrf::markov::MarkovParams;
use mvgrf::{GridSpec, SpectrumModel, SqrtMethod};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

/// A parsed configuration together with its raw text.
pub struct Loaded<T> {
    pub config: T,
    pub raw: String,
}

pub fn load<T: DeserializeOwned>(path: Option<&Path>) -> Result<Loaded<T>, CliError> {
    let path = path.ok_or_else(|| CliError::Config("--config is required for this subcommand".into()))?;
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(raw)
}

pub fn parse<T: DeserializeOwned>(raw: String) -> Result<Loaded<T>, CliError> {
    let config = serde_json::from_str(&raw).map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    Ok(Loaded { config, raw })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub grid: GridSpec,
    pub model: SpectrumModel,
    pub replicates: usize,
    #[serde(default)]
    pub sqrt_method: SqrtMethod,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolveConfig {
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    pub noise: NoiseMeasureSpec,
    pub replicates: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdeConfig {
    pub markov: MarkovParams,
    pub replicates: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Exact covariance of a spectral model (all torus lags) or of a kernel
/// (lags up to `max_lag` per axis).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub grid: GridSpec,
    pub model: Option<SpectrumModel>,
    pub kernel: Option<KernelSpec>,
    pub max_lag: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Empirical covariance of simulated fields (spectral, convolution or
/// Markov) or of field files.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalConfig {
    pub grid: Option<GridSpec>,
    pub model: Option<SpectrumModel>,
    pub kernel: Option<KernelSpec>,
    pub noise: Option<NoiseMeasureSpec>,
    pub markov: Option<MarkovParams>,
    pub fields: Option<Vec<PathBuf>>,
    pub replicates: Option<usize>,
    pub max_lag: usize,
    #[serde(default)]
    pub sqrt_method: SqrtMethod,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymmetryConfig {
    pub grid: GridSpec,
    pub model: SpectrumModel,
    #[serde(default = "default_pair")]
    pub pair: [usize; 2],
    /// Replicates for an empirical index next to the exact one.
    #[serde(default)]
    pub replicates: usize,
    pub max_lag: Option<usize>,
    #[serde(default)]
    pub sqrt_method: SqrtMethod,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn default_pair() -> [usize; 2] {
    [0, 1]
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Option<Vec<usize>>,
    pub p: Option<usize>,
    pub repetitions: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationSource {
    /// Draw from the family at the given parameters.
    Simulate { sigma2: f64, kappa: f64 },
    Values(Vec<f64>),
    /// Component 0 of a field file.
    Field(PathBuf),
}

/// `[first, last, count]`, evenly spaced and inclusive.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceAxes {
    pub log_sigma2: (f64, f64, usize),
    pub log_kappa: (f64, f64, usize),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodConfig {
    pub grid: GridSpec,
    pub family: ModelFamily,
    pub observations: ObservationSource,
    pub surface: Option<SurfaceAxes>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn linspace(first: f64, last: f64, count: usize) -> Result<Vec<f64>, CliError> {
    if count < 2 || !first.is_finite() || !last.is_finite() || first >= last {
        return Err(CliError::Config(format!("surface axis needs first < last and count ≥ 2, got [{first}, {last}, {count}]")));
    }
    let step = (last - first) / (count - 1) as f64;
    Ok((0..count).map(|k| if k == count - 1 { last } else { first + step * k as f64 }).collect())
}
