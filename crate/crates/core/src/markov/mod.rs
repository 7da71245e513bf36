//! Markov (SPDE-type) construction: sparse precision operators from a
//! discretized `(κ² - Δ)` on a lattice, coupled across components by a
//! unit lower-triangular system, and sampled through a sparse Cholesky
//! factor in nested-dissection order.
//!
//! For one component, `A = κ² I + (-Δ_h)` with the `2d + 1`-point Laplacian
//! and reflecting (Neumann) boundary, and `Q = τ² h^d Aᵀ A`. The lattice is
//! extended by a margin on every side and samples are cropped back to the
//! requested interior, which keeps the boundary variance inflation out of
//! the output.

pub mod bench;
mod order;
mod sparse;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Construction, GridSpec, Realization};
use crate::rng::{stream, StreamKind};

pub use bench::{bench_scaling, fit_loglog_slope, BenchPath, BenchReport, BenchRow};
pub use order::nested_dissection_order;
pub use sparse::{SparseCholesky, SparseOperator};

/// `-Δ_h` with reflecting boundary: each existing axis neighbour contributes
/// `-1/h²` off the diagonal and `+1/h²` on it.
pub fn negative_laplacian(grid: &GridSpec) -> Result<SparseOperator> {
    let [m0, m1] = grid.sizes();
    let w = 1.0 / (grid.spacing() * grid.spacing());
    let mut t = Vec::with_capacity(grid.num_sites() * (2 * grid.d() + 1));
    for i in 0..m0 {
        for j in 0..m1 {
            let s = grid.site_index(i, j);
            let mut diag = 0.0;
            let mut link = |u: usize| {
                t.push((s, u, -w));
                diag += w;
            };
            if i > 0 {
                link(grid.site_index(i - 1, j));
            }
            if i + 1 < m0 {
                link(grid.site_index(i + 1, j));
            }
            if j > 0 {
                link(grid.site_index(i, j - 1));
            }
            if j + 1 < m1 {
                link(grid.site_index(i, j + 1));
            }
            t.push((s, s, diag));
        }
    }
    SparseOperator::from_triplets(grid.num_sites(), t)
}

/// `Q = τ² h^d (κ² I - Δ_h)²`.
pub fn assemble_component_precision(kappa: f64, tau: f64, grid: &GridSpec) -> Result<SparseOperator> {
    if !(kappa > 0.0 && kappa.is_finite()) || !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("need κ > 0 and τ > 0, got κ={kappa}, τ={tau}")));
    }
    let lap = negative_laplacian(grid)?;
    let n = grid.num_sites();
    let mut t: Vec<(usize, usize, f64)> = lap.triplets().collect();
    t.extend((0..n).map(|s| (s, s, kappa * kappa)));
    let a = SparseOperator::from_triplets(n, t)?;
    let scale = tau * tau * grid.spacing().powi(grid.d() as i32);
    Ok(a.matmul(&a)?.scaled(scale))
}

/// Factorization of `P Q Pᵀ`.
pub fn sparse_factorize(q: &SparseOperator, perm: &[usize]) -> Result<SparseCholesky> {
    SparseCholesky::factorize(q, perm)
}

/// Sites whose coordinates lie in the middle third of every used axis.
fn middle_third(grid: &GridSpec) -> Result<Vec<usize>> {
    let [m0, m1] = grid.sizes();
    let range = |m: usize| (m / 3, m - m / 3);
    if m0 < 3 || (grid.d() == 2 && m1 < 3) {
        return Err(Error::Domain(format!("grid {:?} too small for an interior third", &grid.sizes()[..grid.d()])));
    }
    let (a0, b0) = range(m0);
    let (a1, b1) = if grid.d() == 2 { range(m1) } else { (0, 1) };
    Ok((a0..b0).flat_map(|i| (a1..b1).map(move |j| grid.site_index(i, j))).collect())
}

/// `τ` such that the mean of `diag Q⁻¹` over the middle third of `grid` is
/// `target_variance`: one factorization at `τ = 1`, then `τ² = m / target`.
pub fn calibrate_tau(kappa: f64, grid: &GridSpec, target_variance: f64) -> Result<f64> {
    if !(target_variance > 0.0 && target_variance.is_finite()) {
        return Err(Error::InvalidParameter(format!("target variance must be positive, got {target_variance}")));
    }
    let sites = middle_third(grid)?;
    let q = assemble_component_precision(kappa, 1.0, grid)?;
    let factor = SparseCholesky::factorize(&q, &nested_dissection_order(grid, 1))?;
    let diag = factor.inverse_diagonal();
    let mean = sites.iter().map(|&s| diag[s]).sum::<f64>() / sites.len() as f64;
    Ok((mean / target_variance).sqrt())
}

/// Per-component parameters of a Markov model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovComponent {
    pub kappa: f64,
    /// Calibrated marginal variance of the independent latent component.
    pub variance: f64,
}

/// Configuration of a [`PrecisionModel`] on an interior lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovParams {
    pub sizes: Vec<usize>,
    pub spacing: f64,
    pub components: Vec<MarkovComponent>,
    /// Rows of the unit lower-triangular `T`; identity when absent.
    #[serde(default)]
    pub coupling: Option<Vec<Vec<f64>>>,
    /// Extension in cells on each side; default `ceil(2 / (κ_min h))`.
    #[serde(default)]
    pub margin: Option<usize>,
}

/// Assembled, factorized precision of `x = (T ⊗ I) z` on an extended lattice.
#[derive(Clone, Debug)]
pub struct PrecisionModel {
    grid: GridSpec,
    interior: GridSpec,
    margin: usize,
    p: usize,
    coupling: DMatrix<f64>,
    kappas: Vec<f64>,
    taus: Vec<f64>,
    q: SparseOperator,
    factor: SparseCholesky,
}

fn check_coupling(t: &DMatrix<f64>, p: usize) -> Result<()> {
    if t.nrows() != p || t.ncols() != p {
        return Err(Error::Shape(format!("coupling must be {p}×{p}, got {}×{}", t.nrows(), t.ncols())));
    }
    for i in 0..p {
        if t[(i, i)] != 1.0 {
            return Err(Error::InvalidParameter(format!("coupling diagonal must be 1, got T[{i}][{i}] = {}", t[(i, i)])));
        }
        for j in i + 1..p {
            if t[(i, j)] != 0.0 {
                return Err(Error::InvalidParameter("coupling must be lower triangular".into()));
            }
        }
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("coupling has non-finite entries".into()));
    }
    Ok(())
}

/// `Q_x = (T⁻ᵀ ⊗ I) blockdiag(Q_c) (T⁻¹ ⊗ I)`, i.e. block `(a, b)` is
/// `Σ_c M_ca M_cb Q_c` with `M = T⁻¹`; unknowns are component-major.
pub fn couple_components(grid: &GridSpec, components: &[SparseOperator], t: &DMatrix<f64>) -> Result<PrecisionModel> {
    let p = components.len();
    if p == 0 {
        return Err(Error::InvalidParameter("need at least one component".into()));
    }
    check_coupling(t, p)?;
    let n = grid.num_sites();
    if let Some(bad) = components.iter().find(|c| c.dim() != n) {
        return Err(Error::Inconsistent(format!("component of dimension {} on a grid of {n} sites", bad.dim())));
    }
    let m = t.clone().try_inverse().expect("unit triangular");
    let mut trip = Vec::new();
    for (c, qc) in components.iter().enumerate() {
        for a in 0..p {
            for b in 0..p {
                let w = m[(c, a)] * m[(c, b)];
                if w != 0.0 {
                    trip.extend(qc.triplets().map(|(r, col, v)| (a * n + r, b * n + col, w * v)));
                }
            }
        }
    }
    let q = SparseOperator::from_triplets(p * n, trip)?;
    let factor = SparseCholesky::factorize(&q, &nested_dissection_order(grid, p))?;
    Ok(PrecisionModel {
        grid: *grid,
        interior: *grid,
        margin: 0,
        p,
        coupling: t.clone(),
        kappas: Vec::new(),
        taus: Vec::new(),
        q,
        factor,
    })
}

impl PrecisionModel {
    /// Extends the interior lattice by the margin, calibrates each `τ_c` to
    /// its variance, assembles, couples and factorizes.
    pub fn from_params(params: &MarkovParams) -> Result<Self> {
        let interior = GridSpec::lattice(&params.sizes, params.spacing)?;
        let p = params.components.len();
        if p == 0 {
            return Err(Error::InvalidParameter("need at least one component".into()));
        }
        for c in &params.components {
            if !(c.kappa > 0.0 && c.kappa.is_finite() && c.variance > 0.0 && c.variance.is_finite()) {
                return Err(Error::InvalidParameter(format!("invalid component {c:?}")));
            }
        }
        let t = match &params.coupling {
            None => DMatrix::identity(p, p),
            Some(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::Shape(format!("coupling must be {p}×{p}")));
                }
                DMatrix::from_fn(p, p, |i, j| rows[i][j])
            }
        };
        check_coupling(&t, p)?;
        let kappa_min = params.components.iter().map(|c| c.kappa).fold(f64::INFINITY, f64::min);
        let margin = params.margin.unwrap_or_else(|| (2.0 / (kappa_min * params.spacing)).ceil() as usize);
        let ext_sizes: Vec<usize> = params.sizes.iter().map(|m| m + 2 * margin).collect();
        let grid = GridSpec::lattice(&ext_sizes, params.spacing)?;
        let mut taus = Vec::with_capacity(p);
        let mut comps = Vec::with_capacity(p);
        for c in &params.components {
            let tau = calibrate_tau(c.kappa, &grid, c.variance)?;
            comps.push(assemble_component_precision(c.kappa, tau, &grid)?);
            taus.push(tau);
        }
        let mut model = couple_components(&grid, &comps, &t)?;
        model.interior = interior;
        model.margin = margin;
        model.kappas = params.components.iter().map(|c| c.kappa).collect();
        model.taus = taus;
        Ok(model)
    }

    /// The extended lattice carrying `Q`.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn interior(&self) -> &GridSpec {
        &self.interior
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn q(&self) -> &SparseOperator {
        &self.q
    }

    pub fn factor(&self) -> &SparseCholesky {
        &self.factor
    }

    /// Same field with components listed in the order `order[new] = old`;
    /// `Q` is permuted blockwise and refactorized.
    pub fn relabel(&self, order: &[usize]) -> Result<Self> {
        let p = self.p;
        let mut sorted = order.to_vec();
        sorted.sort();
        if sorted != (0..p).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter("component order is not a permutation".into()));
        }
        let n = self.grid.num_sites();
        let mut new_of = vec![0; p];
        for (new, &old) in order.iter().enumerate() {
            new_of[old] = new;
        }
        let trip = self
            .q
            .triplets()
            .map(|(r, c, v)| (new_of[r / n] * n + r % n, new_of[c / n] * n + c % n, v))
            .collect();
        let q = SparseOperator::from_triplets(p * n, trip)?;
        let factor = SparseCholesky::factorize(&q, &nested_dissection_order(&self.grid, p))?;
        let pick = |v: &[f64]| if v.is_empty() { Vec::new() } else { order.iter().map(|&o| v[o]).collect() };
        Ok(PrecisionModel {
            coupling: DMatrix::from_fn(p, p, |i, j| self.coupling[(order[i], order[j])]),
            kappas: pick(&self.kappas),
            taus: pick(&self.taus),
            q,
            factor,
            ..self.clone()
        })
    }

    /// Interior values of a full-lattice vector, component-major.
    pub fn crop(&self, full: &[f64]) -> Vec<f64> {
        let n = self.grid.num_sites();
        let [i0, i1] = self.interior.sizes();
        let off1 = if self.grid.d() == 2 { self.margin } else { 0 };
        let mut out = Vec::with_capacity(self.p * self.interior.num_sites());
        for c in 0..self.p {
            for a in 0..i0 {
                for b in 0..i1 {
                    out.push(full[c * n + self.grid.site_index(a + self.margin, b + off1)]);
                }
            }
        }
        out
    }
}

/// `x = Pᵀ L⁻ᵀ z` for standard normal `z`, cropped to the interior.
pub fn precision_sample(model: &PrecisionModel, seed: u64, replicate: u32) -> Result<Realization> {
    let mut rng = stream(StreamKind::Markov, seed, replicate as u64, 0);
    let z: Vec<f64> = (0..model.q.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let full = model.factor.sample_from(z);
    Realization::new(model.interior, model.p, model.crop(&full), seed, replicate, Construction::Markov)
}

/// Realizations for replicates `0..count`, identical for any thread count.
pub fn precision_batch(model: &PrecisionModel, seed: u64, count: usize) -> Result<Vec<Realization>> {
    if count == 0 {
        return Err(Error::InvalidParameter("batch count must be at least 1".into()));
    }
    (0..count as u32).into_par_iter().map(|r| precision_sample(model, seed, r)).collect()
}
