//! Stationary multivariate random fields.
//!
//! Three interchangeable constructions of a p-variate field on a regular grid:
//!
//! * [`simulate`]: spectral filtering of conjugate-symmetric white noise by a
//!   square root `L(ω)` of a cross-spectral density ([`spectra`]);
//! * [`convolution`]: kernel convolution of Gaussian or non-Gaussian
//!   independently scattered noise;
//! * [`markov`]: sparse precision operators built from a discretized
//!   `(κ² - Δ)` operator, sampled through a nested-dissection Cholesky factor.
//!
//! [`covariance`] computes exact and empirical cross-covariances and their
//! asymmetry, and [`likelihood`] evaluates Gaussian log-likelihoods by dense
//! and sparse routes and profiles the variance/range ridge.

pub mod convolution;
pub mod covariance;
pub mod error;
pub mod grid;
pub mod io;
pub mod likelihood;
pub mod markov;
mod fft;
mod quadrature;
pub mod rng;
pub mod simulate;
pub mod spectra;

pub use error::{Error, Result};
pub use grid::{build_frequency_grid, Construction, FrequencyGrid, GridSpec, Lag, Realization};
pub use spectra::{ComponentSpec, CrossSpec, MaternParams, SpectrumModel, SqrtMethod};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
