//! Kernel convolution of independently scattered noise:
//! `x(s) = Σ_u K(s, u) W(u)`, with noise sites on the field grid.
//!
//! `K(s, u) = k(s, u) B` for a scalar kernel `k` from a small catalog and a
//! real `p × p` mixing matrix `B`. The noise increments have mean zero and
//! variance equal to the cell volume for every family, so the second-order
//! structure depends on the kernel alone while higher moments do not.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{CovKind, CovMeta, CrossCovariance};
use crate::error::{Error, Result};
use crate::grid::{Construction, GridSpec, Lag, Realization};
use crate::rng::{stream, StreamKind};

/// Scalar kernel profiles. Distances are physical (`|lag| · h`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelShape {
    /// `1/sqrt(cell volume)` at `u = s`; the field is the rescaled noise.
    Delta,
    /// `exp(-r² / 2w²)`, cut at `support` (default `4w`).
    GaussianBump {
        width: f64,
        #[serde(default)]
        support: Option<f64>,
    },
    /// Gaussian bump whose width is `width_low` for sites with axis-0
    /// position below `boundary` (default: the middle of the grid) and
    /// `width_high` elsewhere.
    VaryingWidthBump {
        width_low: f64,
        width_high: f64,
        #[serde(default)]
        boundary: Option<f64>,
        #[serde(default)]
        support: Option<f64>,
    },
    /// `max(0, 1 - r/a)`.
    Triangular { half_width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRaw", into = "KernelSpecRaw")]
pub struct KernelSpec {
    d: usize,
    shape: KernelShape,
    mixing: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSpecRaw {
    d: usize,
    shape: KernelShape,
    /// Rows of `B`; defaults to the 1×1 identity.
    #[serde(default)]
    mixing: Option<Vec<Vec<f64>>>,
}

impl TryFrom<KernelSpecRaw> for KernelSpec {
    type Error = Error;

    fn try_from(raw: KernelSpecRaw) -> Result<Self> {
        let mixing = match raw.mixing {
            None => DMatrix::identity(1, 1),
            Some(rows) => {
                let p = rows.len();
                if p == 0 || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::Shape("mixing matrix must be square and non-empty".into()));
                }
                DMatrix::from_fn(p, p, |i, j| rows[i][j])
            }
        };
        KernelSpec::new(raw.d, raw.shape, mixing)
    }
}

impl From<KernelSpec> for KernelSpecRaw {
    fn from(k: KernelSpec) -> Self {
        let p = k.p();
        KernelSpecRaw {
            d: k.d,
            shape: k.shape,
            mixing: Some((0..p).map(|i| (0..p).map(|j| k.mixing[(i, j)]).collect()).collect()),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl KernelSpec {
    pub fn new(d: usize, shape: KernelShape, mixing: DMatrix<f64>) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {d}")));
        }
        if !mixing.is_square() || mixing.nrows() == 0 {
            return Err(Error::Shape("mixing matrix must be square and non-empty".into()));
        }
        if mixing.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("mixing matrix has non-finite entries".into()));
        }
        match &shape {
            KernelShape::Delta => {}
            KernelShape::GaussianBump { width, support } => {
                positive("width", *width)?;
                if let Some(s) = support {
                    positive("support", *s)?;
                }
            }
            KernelShape::VaryingWidthBump { width_low, width_high, boundary, support } => {
                positive("width_low", *width_low)?;
                positive("width_high", *width_high)?;
                if let Some(b) = boundary {
                    if !b.is_finite() {
                        return Err(Error::InvalidParameter("boundary must be finite".into()));
                    }
                }
                if let Some(s) = support {
                    positive("support", *s)?;
                }
            }
            KernelShape::Triangular { half_width } => positive("half_width", *half_width)?,
        }
        Ok(KernelSpec { d, shape, mixing })
    }

    /// Scalar kernel with identity mixing.
    pub fn scalar(d: usize, shape: KernelShape) -> Result<Self> {
        Self::new(d, shape, DMatrix::identity(1, 1))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.mixing.nrows()
    }

    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self.shape, KernelShape::VaryingWidthBump { .. })
    }

    /// Physical radius beyond which `K` is zero; the delta kernel occupies
    /// one cell.
    pub fn support_radius(&self, grid: &GridSpec) -> f64 {
        match self.shape {
            KernelShape::Delta => grid.spacing(),
            KernelShape::GaussianBump { width, support } => support.unwrap_or(4.0 * width),
            KernelShape::VaryingWidthBump { width_low, width_high, support, .. } => {
                support.unwrap_or(4.0 * width_low.max(width_high))
            }
            KernelShape::Triangular { half_width } => half_width,
        }
    }

    /// Same kernel with `B` scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        KernelSpec { d: self.d, shape: self.shape.clone(), mixing: &self.mixing * c }
    }

    fn profile(&self, grid: &GridSpec, s: usize, lag: Lag) -> f64 {
        let h = grid.spacing();
        let r2 = ((lag[0] * lag[0] + lag[1] * lag[1]) as f64) * h * h;
        match self.shape {
            KernelShape::Delta => {
                if lag == [0, 0] {
                    1.0 / grid.cell_volume().sqrt()
                } else {
                    0.0
                }
            }
            KernelShape::GaussianBump { width, .. } => (-r2 / (2.0 * width * width)).exp(),
            KernelShape::VaryingWidthBump { width_low, width_high, boundary, .. } => {
                let x0 = grid.position(s)[0];
                let b = boundary.unwrap_or(0.5 * grid.sizes()[0] as f64 * h);
                let w = if x0 < b { width_low } else { width_high };
                (-r2 / (2.0 * w * w)).exp()
            }
            KernelShape::Triangular { half_width } => (1.0 - r2.sqrt() / half_width).max(0.0),
        }
    }

    /// Scalar part `k(s, u)`, zero beyond the support radius.
    pub fn eval_scalar(&self, grid: &GridSpec, s: usize, u: usize) -> f64 {
        let lag = grid.displacement(s, u);
        let h = grid.spacing();
        let r = (((lag[0] * lag[0] + lag[1] * lag[1]) as f64).sqrt()) * h;
        if r > self.support_radius(grid) {
            return 0.0;
        }
        self.profile(grid, s, lag)
    }

    /// `K(s, u) = k(s, u) B`.
    pub fn eval(&self, grid: &GridSpec, s: usize, u: usize) -> DMatrix<f64> {
        &self.mixing * self.eval_scalar(grid, s, u)
    }

    fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.d != grid.d() {
            return Err(Error::Inconsistent(format!("kernel has d = {} but grid has d = {}", self.d, grid.d())));
        }
        let radius = self.support_radius(grid);
        if radius < grid.spacing() {
            return Err(Error::DegenerateKernel { radius, spacing: grid.spacing() });
        }
        Ok(())
    }

    /// Largest `Σ_{u outside support} ‖K(s, u)‖²_F · cellvol` over sites `s`
    /// (one site for stationary kernels): the squared mass that truncation drops.
    pub fn dropped_tail_mass(&self, grid: &GridSpec) -> f64 {
        let radius = self.support_radius(grid);
        let h = grid.spacing();
        let b2 = self.mixing.norm_squared();
        let sites: Vec<usize> = if self.is_stationary() { vec![0] } else { (0..grid.num_sites()).collect() };
        sites
            .into_iter()
            .map(|s| {
                (0..grid.num_sites())
                    .map(|u| {
                        let lag = grid.displacement(s, u);
                        let r = ((lag[0] * lag[0] + lag[1] * lag[1]) as f64).sqrt() * h;
                        if r > radius {
                            let k = self.profile(grid, s, lag);
                            k * k * b2
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
                    * grid.cell_volume()
            })
            .fold(0.0, f64::max)
    }
}

/// Lags `u - s` inside the support, each distinct site visited once.
fn support_offsets(grid: &GridSpec, radius: f64) -> Vec<Lag> {
    let h = grid.spacing();
    let reach = (radius / h).floor() as i64;
    let [m0, m1] = grid.sizes();
    let axis_range = |m: usize, used: bool| -> (i64, i64) {
        if !used {
            (0, 0)
        } else if grid.is_periodic() {
            let half = m as i64 / 2;
            ((-reach).max(-half + 1), reach.min(half))
        } else {
            (-reach.min(m as i64 - 1), reach.min(m as i64 - 1))
        }
    };
    let (lo0, hi0) = axis_range(m0, true);
    let (lo1, hi1) = axis_range(m1, grid.d() == 2);
    let mut out = Vec::new();
    for a in lo0..=hi0 {
        for b in lo1..=hi1 {
            if (((a * a + b * b) as f64).sqrt()) * h <= radius {
                out.push([a, b]);
            }
        }
    }
    out
}

fn neighbor(grid: &GridSpec, s: usize, lag: Lag) -> Option<usize> {
    if grid.is_periodic() {
        return Some(grid.shifted(s, lag));
    }
    let [m0, m1] = grid.sizes();
    let [a, b] = grid.site_coords(s);
    let (x, y) = (a as i64 + lag[0], b as i64 + lag[1]);
    (x >= 0 && y >= 0 && x < m0 as i64 && y < m1 as i64).then(|| grid.site_index(x as usize, y as usize))
}

/// Independently scattered noise families, standardized to mean zero and
/// variance equal to the cell volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseMeasureSpec {
    Gaussian,
    CenteredGamma { shape: f64, scale: f64 },
    Laplace { scale: f64 },
}

impl NoiseMeasureSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseMeasureSpec::Gaussian => Ok(()),
            NoiseMeasureSpec::CenteredGamma { shape, scale } => {
                positive("gamma shape", shape)?;
                positive("gamma scale", scale)
            }
            NoiseMeasureSpec::Laplace { scale } => positive("laplace scale", scale),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseMeasureSpec::Gaussian => "gaussian",
            NoiseMeasureSpec::CenteredGamma { .. } => "centered-gamma",
            NoiseMeasureSpec::Laplace { .. } => "laplace",
        }
    }

    /// Third standardized moment of one increment.
    pub fn skewness(&self) -> f64 {
        match *self {
            NoiseMeasureSpec::CenteredGamma { shape, .. } => 2.0 / shape.sqrt(),
            _ => 0.0,
        }
    }
}

/// Increments `W_c(u)`, component-major, deterministic in `(seed, replicate)`.
pub fn sample_noise_increments(spec: &NoiseMeasureSpec, grid: &GridSpec, p: usize, seed: u64, replicate: u32) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = grid.num_sites();
    let sd = grid.cell_volume().sqrt();
    let mut out = Vec::with_capacity(p * n);
    for c in 0..p {
        let mut rng = stream(StreamKind::Convolution, seed, replicate as u64, c as u64);
        match *spec {
            NoiseMeasureSpec::Gaussian => {
                out.extend((0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)));
            }
            NoiseMeasureSpec::CenteredGamma { shape, scale } => {
                let dist = Gamma::new(shape, scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let (mean, std) = (shape * scale, shape.sqrt() * scale);
                out.extend((0..n).map(|_| sd * (dist.sample(&mut rng) - mean) / std));
            }
            NoiseMeasureSpec::Laplace { scale } => {
                let std = std::f64::consts::SQRT_2 * scale;
                out.extend((0..n).map(|_| {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    let x = -scale * u.signum() * (-2.0 * u.abs()).ln_1p();
                    sd * x / std
                }));
            }
        }
    }
    Ok(out)
}

/// One convolution realization.
pub fn sample_convolution_field(
    kernel: &KernelSpec,
    noise: &NoiseMeasureSpec,
    grid: &GridSpec,
    seed: u64,
    replicate: u32,
) -> Result<Realization> {
    kernel.check(grid)?;
    let p = kernel.p();
    let n = grid.num_sites();
    let w = sample_noise_increments(noise, grid, p, seed, replicate)?;
    let offsets = support_offsets(grid, kernel.support_radius(grid));
    // y_c(s) = Σ_u k(s, u) W_c(u), then x(s) = B y(s)
    let mut y = vec![0.0; p * n];
    for s in 0..n {
        let weights: Vec<(usize, f64)> = offsets
            .iter()
            .filter_map(|&lag| neighbor(grid, s, lag).map(|u| (u, kernel.profile(grid, s, lag))))
            .collect();
        for c in 0..p {
            let wc = &w[c * n..(c + 1) * n];
            y[c * n + s] = weights.iter().map(|&(u, k)| k * wc[u]).sum();
        }
    }
    let b = kernel.mixing();
    let mut values = vec![0.0; p * n];
    for i in 0..p {
        for j in 0..p {
            let bij = b[(i, j)];
            if bij != 0.0 {
                for s in 0..n {
                    values[i * n + s] += bij * y[j * n + s];
                }
            }
        }
    }
    Realization::new(*grid, p, values, seed, replicate, Construction::Convolution)
}

/// Realizations for replicates `0..count`, identical for any thread count.
pub fn sample_convolution_batch(
    kernel: &KernelSpec,
    noise: &NoiseMeasureSpec,
    grid: &GridSpec,
    seed: u64,
    count: usize,
) -> Result<Vec<Realization>> {
    if count == 0 {
        return Err(Error::InvalidParameter("batch count must be at least 1".into()));
    }
    (0..count as u32)
        .into_par_iter()
        .map(|r| sample_convolution_field(kernel, noise, grid, seed, r))
        .collect()
}

/// `Cov(x(s), x(t)) = Σ_u K(s, u) K(t, u)ᵀ · cellvol`.
pub fn implied_cov_pair(kernel: &KernelSpec, grid: &GridSpec, s: usize, t: usize) -> Result<DMatrix<f64>> {
    if kernel.d() != grid.d() {
        return Err(Error::Inconsistent("kernel and grid dimensions differ".into()));
    }
    let offsets = support_offsets(grid, kernel.support_radius(grid));
    let mut acc = 0.0;
    for &lag in &offsets {
        if let Some(u) = neighbor(grid, s, lag) {
            acc += kernel.profile(grid, s, lag) * kernel.eval_scalar(grid, t, u);
        }
    }
    let b = kernel.mixing();
    Ok(b * b.transpose() * (acc * grid.cell_volume()))
}

/// `C(h) = Cov(x(s + h), x(s))` of a stationary kernel on a periodic grid.
pub fn implied_cross_cov(kernel: &KernelSpec, grid: &GridSpec, lags: &[Lag]) -> Result<CrossCovariance> {
    if !kernel.is_stationary() {
        return Err(Error::WrongOperation(
            "kernel is nonstationary; use implied_cov_pair for site pairs".into(),
        ));
    }
    if !grid.is_periodic() {
        return Err(Error::WrongOperation("implied_cross_cov needs a periodic grid; use implied_cov_pair".into()));
    }
    let p = kernel.p();
    let mut values = Vec::with_capacity(lags.len() * p * p);
    for &h in lags {
        let c = implied_cov_pair(kernel, grid, grid.shifted(0, h), 0)?;
        for i in 0..p {
            for j in 0..p {
                values.push(c[(i, j)]);
            }
        }
    }
    let meta = CovMeta { grid: *grid, model_hash: None, replicates: 0 };
    Ok(CrossCovariance::from_parts(p, lags.to_vec(), values, None, CovKind::Analytic, meta))
}
