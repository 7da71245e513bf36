//! Subcommand bodies. Each returns its outputs as bytes.

use std::path::PathBuf;

use mvgrf::convolution::{implied_cross_cov, sample_convolution_batch};
use mvgrf::covariance::{analytic_cross_cov, asymmetry_index, empirical_cross_cov, CrossCovariance};
use mvgrf::io::{encode_field, read_field};
use mvgrf::likelihood::{maximize, profile_surface, ridge_report, simulate_observations, LikelihoodProblem};
use mvgrf::markov::{bench_scaling, precision_batch, PrecisionModel};
use mvgrf::simulate::sample_batch;
use mvgrf::{Lag, Realization};
use serde_json::json;

use crate::config::{self, LikelihoodConfig, ObservationSource};
use crate::{out_dir, seed, CliError, Common, Outcome};

const NOT_APPLICABLE: &str = "not-applicable";
const MARKOV_ROOT: &str = "sparse-cholesky";
const DEFAULT_BENCH_SIZES: [usize; 4] = [1024, 4096, 16384, 65536];

fn field_files(realizations: &[Realization]) -> Vec<(String, Vec<u8>)> {
    realizations.iter().map(|r| (format!("field_{:04}.mgrf", r.replicate), encode_field(r))).collect()
}

fn need_replicates(count: usize) -> Result<usize, CliError> {
    if count == 0 {
        Err(CliError::Config("replicates must be at least 1".into()))
    } else if count > u32::MAX as usize {
        Err(CliError::Config(format!("replicates {count} exceeds the replicate index range")))
    } else {
        Ok(count)
    }
}

fn csv_bytes(cov: &CrossCovariance) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    cov.write_csv(&mut buf)?;
    Ok(buf)
}

pub fn simulate(c: &Common) -> Result<Outcome, CliError> {
    let loaded = config::load::<config::SimulateConfig>(c.config.as_deref())?;
    let cfg = &loaded.config;
    let count = need_replicates(cfg.replicates)?;
    let seed = seed(c.seed, cfg.seed);
    let fields = sample_batch(&cfg.model, &cfg.grid, seed, count, cfg.sqrt_method)?;
    Ok(Outcome {
        files: field_files(&fields),
        summary: json!({ "replicates": count, "p": cfg.model.p(), "model": cfg.model.fingerprint() }),
        sqrt_method: cfg.sqrt_method.name().into(),
        seed,
        out: out_dir(&c.out, &cfg.out),
        config_raw: Some(loaded.raw),
    })
}

pub fn convolve(c: &Common) -> Result<Outcome, CliError> {
    let loaded = config::load::<config::ConvolveConfig>(c.config.as_deref())?;
    let cfg = &loaded.config;
    let count = need_replicates(cfg.replicates)?;
    let seed = seed(c.seed, cfg.seed);
    let fields = sample_convolution_batch(&cfg.kernel, &cfg.noise, &cfg.grid, seed, count)?;
    Ok(Outcome {
        files: field_files(&fields),
        summary: json!({
            "replicates": count,
            "p": cfg.kernel.p(),
            "noise": cfg.noise.name(),
            "dropped_tail_mass": cfg.kernel.dropped_tail_mass(&cfg.grid),
        }),
        sqrt_method: NOT_APPLICABLE.into(),
        seed,
        out: out_dir(&c.out, &cfg.out),
        config_raw: Some(loaded.raw),
    })
}

pub fn spde_sample(c: &Common) -> Result<Outcome, CliError> {
    let loaded = config::load::<config::SpdeConfig>(c.config.as_deref())?;
    let cfg = &loaded.config;
    let count = need_replicates(cfg.replicates)?;
    let seed = seed(c.seed, cfg.seed);
    let model = PrecisionModel::from_params(&cfg.markov)?;
    let fields = precision_batch(&model, seed, count)?;
    Ok(Outcome {
        files: field_files(&fields),
        summary: json!({
            "replicates": count,
            "p": model.p(),
            "margin": model.margin(),
            "taus": model.taus(),
            "precision_nonzeros": model.q().nnz(),
            "factor_nonzeros": model.factor().nnz(),
        }),
        sqrt_method: MARKOV_ROOT.into(),
        seed,
        out: out_dir(&c.out, &cfg.out),
        config_raw: Some(loaded.raw),
    })
}

fn lag_box(d: usize, max_lag: usize) -> Vec<Lag> {
    let r = max_lag as i64;
    let second = if d == 2 { -r..=r } else { 0..=0 };
    (-r..=r).flat_map(|a| second.clone().map(move |b| [a, b])).collect()
}

pub fn covariance(c: &Common) -> Result<Outcome, CliError> {
    let loaded = config::load::<config::CovarianceConfig>(c.config.as_deref())?;
    let cfg = &loaded.config;
    let (cov, method) = match (&cfg.model, &cfg.kernel) {
        (Some(model), None) => (analytic_cross_cov(model, &cfg.grid)?, "spectral"),
        (None, Some(kernel)) => {
            let max_lag = cfg.max_lag.ok_or_else(|| CliError::Config("kernel covariance needs \"max_lag\"".into()))?;
            (implied_cross_cov(kernel, &cfg.grid, &lag_box(cfg.grid.d(), max_lag))?, "kernel")
        }
        _ => return Err(CliError::Config("give exactly one of \"model\" and \"kernel\"".into())),
    };
    Ok(Outcome {
        files: vec![("covariance.csv".into(), csv_bytes(&cov)?)],
        summary: json!({ "source": method, "lags": cov.lags().len(), "p": cov.p(), "symmetry_residual": cov.symmetry_residual() }),
        sqrt_method: NOT_APPLICABLE.into(),
        seed: seed(c.seed, cfg.seed),
        out: out_dir(&c.out, &cfg.out),
        config_raw: Some(loaded.raw),
    })
}

pub fn empirical(c: &Common) -> Result<Outcome, CliError> {
    let loaded = config::load::<config::EmpiricalConfig>(c.config.as_deref())?;
    let cfg = &loaded.config;
    let seed = seed(c.seed, cfg.seed);
    let sources = [cfg.model.is_some(), cfg.kernel.is_some(), cfg.markov.is_some(), cfg.fields.is_some()];
    if sources.iter().filter(|s| **s).count() != 1 {
        return Err(CliError::Config("give exactly one of \"model\", \"kernel\", \"markov\" and \"fields\"".into()));
    }
    let replicates = || cfg.replicates.ok_or_else(|| CliError::Config("simulated input needs \"replicates\"".into())).and_then(need_replicates);
    let grid = || cfg.grid.ok_or_else(|| CliError::Config("simulated input needs \"grid\"".into()));
    let mut sqrt_method = NOT_APPLICABLE.to_string();
    let fields = if let Some(model) = &cfg.model {
        sqrt_method = cfg.sqrt_method.name().into();
        sample_batch(model, &grid()?, seed, replicates()?, cfg.sqrt_method)?
    } else if let Some(kernel) = &cfg.kernel {
        let noise = cfg.noise.as_ref().ok_or_else(|| CliError::Config("kernel input needs \"noise\"".into()))?;
        sample_convolution_batch(kernel, noise, &grid()?, seed, replicates()?)?
    } else if let Some(params) = &cfg.markov {
        sqrt_method = MARKOV_ROOT.into();
        precision_batch(&PrecisionModel::from_params(params)?, seed, replicates()?)?
    } else {
        let paths: &Vec<PathBuf> = cfg.fields.as_ref().expect("one source");
        paths.iter().map(|p| read_field(p)).collect::<mvgrf::Result<Vec<_>>>()?
    };
    let cov = empirical_cross_cov(&fields, cfg.max_lag)?;
    Ok(Outcome {
        files: vec![("empirical.csv".into(), csv_bytes(&cov)?)],
        summary: json!({ "replicates": fields.len(), "lags": cov.lags().len(), "p": cov.p(), "symmetry_residual": cov.symmetry_residual() }),
        sqrt_method,
        seed,
        out: out_dir(&c.out, &cfg.out),
        config_raw: Some(loaded.raw),
    })
}

pub fn asymmetry(c: &Common) -> Result<Outcome, CliError> {
    let loaded = config::load::<config::AsymmetryConfig>(c.config.as_deref())?;
    let cfg = &loaded.config;
    let seed = seed(c.seed, cfg.seed);
    let [i, j] = cfg.pair;
    if i >= cfg.model.p() || j >= cfg.model.p() {
        return Err(CliError::Config(format!("pair {:?} out of range for p = {}", cfg.pair, cfg.model.p())));
    }
    let exact = asymmetry_index(&analytic_cross_cov(&cfg.model, &cfg.grid)?, i, j)?;
    let empirical = if cfg.replicates > 0 {
        let max_lag = cfg.max_lag.unwrap_or_else(|| {
            let [m0, m1] = cfg.grid.sizes();
            let m = if cfg.grid.d() == 2 { m0.min(m1) } else { m0 };
            m / 4
        });
        let fields = sample_batch(&cfg.model, &cfg.grid, seed, need_replicates(cfg.replicates)?, cfg.sqrt_method)?;
        Some(asymmetry_index(&empirical_cross_cov(&fields, max_lag)?, i, j)?)
    } else {
        None
    };
    let report = json!({ "pair": cfg.pair, "analytic": exact, "empirical": empirical, "replicates": cfg.replicates });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    Ok(Outcome {
        files: vec![("asymmetry.json".into(), text.into_bytes())],
        summary: report,
        sqrt_method: cfg.sqrt_method.name().into(),
        seed,
        out: out_dir(&c.out, &cfg.out),
        config_raw: Some(loaded.raw),
    })
}

pub fn bench(c: &Common, sizes: Option<Vec<usize>>, p: Option<usize>, repetitions: Option<usize>) -> Result<Outcome, CliError> {
    let (cfg, raw) = match c.config.as_deref() {
        Some(path) => {
            let loaded = config::load::<config::BenchConfig>(Some(path))?;
            (loaded.config, Some(loaded.raw))
        }
        None => (config::BenchConfig::default(), None),
    };
    let sizes = sizes.or(cfg.sizes).unwrap_or_else(|| DEFAULT_BENCH_SIZES.to_vec());
    let p = p.or(cfg.p).unwrap_or(1);
    let repetitions = repetitions.or(cfg.repetitions).unwrap_or(3);
    if sizes.is_empty() || sizes.contains(&0) || p == 0 || repetitions == 0 {
        return Err(CliError::Config("sizes, p and repetitions must be positive".into()));
    }
    let report = bench_scaling(&sizes, p, repetitions)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    Ok(Outcome {
        files: vec![("bench.csv".into(), csv)],
        summary: json!({
            "rows": report.rows.len(),
            "sizes": sizes,
            "p": p,
            "dense_slope": report.dense_slope,
            "sparse_slope": report.sparse_slope,
        }),
        sqrt_method: NOT_APPLICABLE.into(),
        seed: seed(c.seed, cfg.seed),
        out: out_dir(&c.out, &cfg.out),
        config_raw: raw,
    })
}

fn likelihood_problem(cfg: &LikelihoodConfig, seed: u64) -> Result<LikelihoodProblem, CliError> {
    let y = match &cfg.observations {
        ObservationSource::Simulate { sigma2, kappa } => {
            if !(*sigma2 > 0.0 && *kappa > 0.0) {
                return Err(CliError::Config(format!("simulation needs sigma2 > 0 and kappa > 0, got {sigma2}, {kappa}")));
            }
            simulate_observations(cfg.grid, cfg.family, [sigma2.ln(), kappa.ln()], seed, 0)?
        }
        ObservationSource::Values(v) => v.clone(),
        ObservationSource::Field(path) => {
            let r = read_field(path)?;
            if r.grid.sizes() != cfg.grid.sizes() || r.grid.spacing() != cfg.grid.spacing() {
                return Err(CliError::Config(format!("field {} does not lie on the configured grid", path.display())));
            }
            r.component(0).to_vec()
        }
    };
    Ok(LikelihoodProblem::new(cfg.grid, y, cfg.family)?)
}

pub fn profile(c: &Common) -> Result<Outcome, CliError> {
    let loaded = config::load::<LikelihoodConfig>(c.config.as_deref())?;
    let cfg = &loaded.config;
    let seed = seed(c.seed, cfg.seed);
    let problem = likelihood_problem(cfg, seed)?;
    let (s, k, centre) = match &cfg.surface {
        Some(axes) => (
            config::linspace(axes.log_sigma2.0, axes.log_sigma2.1, axes.log_sigma2.2)?,
            config::linspace(axes.log_kappa.0, axes.log_kappa.1, axes.log_kappa.2)?,
            None,
        ),
        None => {
            let fit = maximize(&problem)?;
            let t = fit.theta;
            (config::linspace(t[0] - 2.0, t[0] + 2.0, 21)?, config::linspace(t[1] - 2.0, t[1] + 2.0, 21)?, Some(t))
        }
    };
    let surface = profile_surface(&problem, &s, &k);
    let best = surface.argmax().map(|(i, j)| [s[i], k[j]]);
    Ok(Outcome {
        files: vec![("profile.csv".into(), surface.to_csv().into_bytes())],
        summary: json!({ "nodes": surface.values.len(), "n": problem.n(), "grid_argmax": best, "mle": centre }),
        sqrt_method: NOT_APPLICABLE.into(),
        seed,
        out: out_dir(&c.out, &cfg.out),
        config_raw: Some(loaded.raw),
    })
}

pub fn ridge(c: &Common) -> Result<Outcome, CliError> {
    let loaded = config::load::<LikelihoodConfig>(c.config.as_deref())?;
    let cfg = &loaded.config;
    if cfg.surface.is_some() {
        return Err(CliError::Config("\"surface\" applies to the profile subcommand only".into()));
    }
    let seed = seed(c.seed, cfg.seed);
    let report = ridge_report(&likelihood_problem(cfg, seed)?)?;
    Ok(Outcome {
        files: vec![("ridge.json".into(), (report.to_json() + "\n").into_bytes())],
        summary: json!({
            "theta_hat": report.theta_hat,
            "eigenvalues": report.eigenvalues,
            "ratio": report.ratio,
            "angle_degrees": report.angle_degrees,
        }),
        sqrt_method: NOT_APPLICABLE.into(),
        seed,
        out: out_dir(&c.out, &cfg.out),
        config_raw: Some(loaded.raw),
    })
}
