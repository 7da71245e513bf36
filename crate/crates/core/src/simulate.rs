//! Spectral simulation of real p-variate fields on periodic grids.
//!
//! The continuum representation `x(s) = ∫ L(ω) exp(i s·ω) dW̃(ω)` is replaced
//! by the finite sum over the grid's dual frequencies
//!
//! ```text
//! x(s) = Σ_k L(ω_k) Z_k exp(i s·ω_k) · sqrt(Δω),   Δω = Π_a 2π / (m_a h)
//! ```
//!
//! with `Z_{-k} = conj(Z_k)`, so the sum is an unnormalized inverse FFT and
//! the result is real up to roundoff. The cell measure `Δω` makes the field
//! variance a Riemann sum of the spectral density, which converges to `σ²`
//! as the grid refines; the exact covariance on a given grid is the one
//! returned by [`crate::covariance::analytic_cross_cov`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::GridFft;
use crate::grid::{build_frequency_grid, Construction, FreqClass, FrequencyGrid, GridSpec, Realization};
use crate::rng::{stream, StreamKind};
use crate::spectra::{build_filter, SpectralFilter, SpectrumModel, SqrtMethod};

/// Residual imaginary part allowed before discarding, relative to the field
/// standard deviation.
pub const IMAG_RESIDUAL_REL: f64 = 1e-8;

/// Human-readable form of the frequency scaling applied by the sampler.
pub const SCALE_FORMULA: &str = "x = Re IFFT[L(w_k) Z_k sqrt(dw)], dw = prod_a 2*pi/(m_a*h)";

/// Conjugate-symmetric complex white noise, component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralNoise {
    pub p: usize,
    pub values: Vec<Complex64>,
}

impl SpectralNoise {
    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.values.len() / self.p;
        &self.values[c * n..(c + 1) * n]
    }
}

/// Draws `Z` with `E[Z_k Z_k*] = I`, `E[Z_k Z_k^T] = 0` off the self-conjugate
/// set, and `Z_{-k} = conj(Z_k)` exactly.
pub fn draw_spectral_noise(freqs: &FrequencyGrid, p: usize, seed: u64, replicate: u32) -> SpectralNoise {
    let n = freqs.len();
    let mut values = vec![Complex64::new(0.0, 0.0); p * n];
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for c in 0..p {
        let mut rng = stream(StreamKind::Spectral, seed, replicate as u64, c as u64);
        let out = &mut values[c * n..(c + 1) * n];
        for (k, pt) in freqs.points().iter().enumerate() {
            match pt.class {
                FreqClass::SelfConjugate => {
                    let a: f64 = rng.sample(StandardNormal);
                    out[k] = Complex64::new(a, 0.0);
                }
                FreqClass::Representative => {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    out[k] = Complex64::new(a * half, b * half);
                }
                FreqClass::Reflected => {}
            }
        }
        for (k, pt) in freqs.points().iter().enumerate() {
            if pt.class == FreqClass::Reflected {
                out[k] = out[pt.partner].conj();
            }
        }
    }
    SpectralNoise { p, values }
}

/// A model prepared for repeated sampling on one grid.
pub struct SpectralSampler {
    grid: GridSpec,
    freqs: FrequencyGrid,
    filter: SpectralFilter,
    fft: GridFft,
    scale: f64,
}

impl SpectralSampler {
    pub fn new(model: &SpectrumModel, grid: &GridSpec, method: SqrtMethod) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(Error::InvalidParameter("spectral sampling needs a periodic grid".into()));
        }
        if model.d() != grid.d() {
            return Err(Error::Inconsistent(format!(
                "model has d = {} but grid has d = {}",
                model.d(),
                grid.d()
            )));
        }
        let freqs = build_frequency_grid(grid);
        let filter = build_filter(model, &freqs, method)?;
        let scale = freqs.cell_measure().sqrt();
        Ok(SpectralSampler { grid: *grid, fft: GridFft::new(grid), freqs, filter, scale })
    }

    pub fn filter(&self) -> &SpectralFilter {
        &self.filter
    }

    pub fn frequencies(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn method(&self) -> SqrtMethod {
        self.filter.method
    }

    pub fn sample(&self, seed: u64, replicate: u32) -> Result<Realization> {
        let noise = draw_spectral_noise(&self.freqs, self.filter.p, seed, replicate);
        self.filter_noise(&noise, seed, replicate)
    }

    /// Applies the filter to given noise and transforms to the spatial domain.
    pub fn filter_noise(&self, noise: &SpectralNoise, seed: u64, replicate: u32) -> Result<Realization> {
        let p = self.filter.p;
        let n = self.freqs.len();
        let mut values = Vec::with_capacity(p * n);
        let mut max_imag = 0.0f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..p {
            for (k, slot) in buf.iter_mut().enumerate() {
                let l = &self.filter.factors[k];
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..p {
                    acc += l[(i, j)] * noise.values[j * n + k];
                }
                *slot = acc * self.scale;
            }
            self.fft.inverse(&mut buf);
            for v in &buf {
                max_imag = max_imag.max(v.im.abs());
                values.push(v.re);
            }
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
        let tolerance = IMAG_RESIDUAL_REL * var.sqrt();
        if max_imag > tolerance {
            return Err(Error::SymmetryViolation { residual: max_imag, tolerance });
        }
        Realization::new(self.grid, p, values, seed, replicate, Construction::Spectral)
    }
}

/// One realization for `(seed, replicate)`.
pub fn sample_field(
    model: &SpectrumModel,
    grid: &GridSpec,
    seed: u64,
    replicate: u32,
    method: SqrtMethod,
) -> Result<Realization> {
    SpectralSampler::new(model, grid, method)?.sample(seed, replicate)
}

/// Realizations for replicates `0..count`; replicate `r` depends only on
/// `(seed, r)`, so the output is identical for any thread count.
pub fn sample_batch(
    model: &SpectrumModel,
    grid: &GridSpec,
    seed: u64,
    count: usize,
    method: SqrtMethod,
) -> Result<Vec<Realization>> {
    if count == 0 {
        return Err(Error::InvalidParameter("batch count must be at least 1".into()));
    }
    let sampler = SpectralSampler::new(model, grid, method)?;
    (0..count as u32).into_par_iter().map(|r| sampler.sample(seed, r)).collect()
}
