//! Gaussian log-likelihood of a single field observed on a grid, by a dense
//! covariance route and a sparse precision route, and diagnostics of the
//! variance/range ridge.
//!
//! Parameters are `θ = (log σ², log κ)` with the smoothness `ν` held fixed.
//! Two model families are supported:
//!
//! * `matern`: `C_ij = σ² M_ν(κ r_ij) + 10⁻⁸σ² δ_ij` with
//!   `M_ν(z) = 2^{1-ν}/Γ(ν) z^ν K_ν(z)` and Euclidean site distances;
//! * `markov`: precision `Q = Q₁(κ)/σ²` where `Q₁ = h^d (κ² I - Δ_h)²` is
//!   the reflecting-boundary operator of the Markov construction on the
//!   observation lattice. Here `ν = 2 - d/2` and `σ²` scales `Q₁⁻¹` rather
//!   than being the marginal variance.
//!
//! Only univariate fields are handled. A `p`-variate model would add one
//! `(σ², κ)` pair per component and `O(p²)` coupling parameters to the same
//! data; the ridge analysis below extends blockwise but is not implemented.

pub mod bessel;
mod optimize;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, Dyn, Matrix2, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::format_f64;
use crate::markov::{assemble_component_precision, nested_dissection_order, negative_laplacian, SparseCholesky, SparseOperator};
use crate::rng::{stream, StreamKind};

use optimize::{bfgs_maximize, Settings};

/// Diagonal jitter of the Matérn covariance, relative to `σ²`.
pub const JITTER_REL: f64 = 1e-8;

/// Step of the central-difference Hessian in `(log σ², log κ)`.
pub const HESSIAN_STEP: f64 = 1e-4;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelFamily {
    Matern { nu: f64 },
    Markov,
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Matern { .. } => "matern",
            ModelFamily::Markov => "markov",
        }
    }
}

/// `(M_ν(z), z M_ν'(z))`, using `d/dz[z^ν K_ν(z)] = -z^ν K_{ν-1}(z)`.
pub fn matern_correlation(nu: f64, z: f64) -> (f64, f64) {
    if z == 0.0 {
        return (1.0, 0.0);
    }
    let (k, k1) = bessel::bessel_k_pair(nu, z);
    let km1 = k1 - 2.0 * nu / z * k;
    let c = ((1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * z.ln()).exp();
    (c * k, -c * z * km1)
}

/// Distinct inter-site distances and, for each ordered pair, its index.
#[derive(Clone, Debug)]
struct DistanceTable {
    unique: Vec<f64>,
    index: Vec<u32>,
}

impl DistanceTable {
    fn new(grid: &GridSpec) -> Self {
        let n = grid.num_sites();
        let coords: Vec<[i64; 2]> = (0..n).map(|s| grid.site_coords(s).map(|c| c as i64)).collect();
        let key = |a: [i64; 2], b: [i64; 2]| {
            let (d0, d1) = (a[0] - b[0], a[1] - b[1]);
            (d0 * d0 + d1 * d1) as u64
        };
        let mut keys: Vec<u64> = Vec::new();
        for a in &coords {
            for b in &coords {
                keys.push(key(*a, *b));
            }
        }
        let mut distinct = keys.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let index = keys.iter().map(|k| distinct.binary_search(k).unwrap() as u32).collect();
        let unique = distinct.iter().map(|&k| grid.spacing() * (k as f64).sqrt()).collect();
        DistanceTable { unique, index }
    }
}

/// Observations `y` on the sites of `grid` with a model family.
#[derive(Clone, Debug)]
pub struct LikelihoodProblem {
    grid: GridSpec,
    y: Vec<f64>,
    family: ModelFamily,
    distances: Option<DistanceTable>,
    laplacian: Option<SparseOperator>,
    order: Option<Vec<usize>>,
}

impl LikelihoodProblem {
    pub fn new(grid: GridSpec, y: Vec<f64>, family: ModelFamily) -> Result<Self> {
        let n = grid.num_sites();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 observations, got {n}")));
        }
        if y.len() != n {
            return Err(Error::Shape(format!("{} observations for {n} grid sites", y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("observations must be finite".into()));
        }
        let mut problem = LikelihoodProblem { grid, y, family, distances: None, laplacian: None, order: None };
        match family {
            ModelFamily::Matern { nu } => {
                if !(nu > 0.0 && nu.is_finite()) {
                    return Err(Error::InvalidParameter(format!("smoothness must be positive, got {nu}")));
                }
                problem.distances = Some(DistanceTable::new(&grid));
            }
            ModelFamily::Markov => {
                if grid.is_periodic() {
                    return Err(Error::InvalidParameter("the markov family needs a non-periodic lattice".into()));
                }
                problem.laplacian = Some(negative_laplacian(&grid)?);
                problem.order = Some(nested_dissection_order(&grid, 1));
            }
        }
        Ok(problem)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn nu(&self) -> f64 {
        match self.family {
            ModelFamily::Matern { nu } => nu,
            ModelFamily::Markov => 2.0 - self.grid.d() as f64 / 2.0,
        }
    }

    /// Diagonal jitter at `θ`; zero for the markov family, whose covariance
    /// is the inverse of a well-conditioned precision.
    pub fn jitter(&self, theta: [f64; 2]) -> f64 {
        match self.family {
            ModelFamily::Matern { .. } => JITTER_REL * theta[0].exp(),
            ModelFamily::Markov => 0.0,
        }
    }

    /// Largest inter-site distance.
    pub fn domain_extent(&self) -> f64 {
        let [m0, m1] = self.grid.sizes();
        let (a, b) = ((m0 - 1) as f64, (m1 - 1) as f64);
        self.grid.spacing() * (a * a + b * b).sqrt()
    }

    fn check_theta(theta: [f64; 2]) -> Result<()> {
        if theta.iter().all(|t| t.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("θ must be finite, got {theta:?}")))
        }
    }

    /// Markov precision `Q₁(κ)/σ²`.
    pub fn precision(&self, theta: [f64; 2]) -> Result<SparseOperator> {
        Self::check_theta(theta)?;
        if self.family != ModelFamily::Markov {
            return Err(Error::WrongOperation("a precision operator exists only for the markov family".into()));
        }
        assemble_component_precision(theta[1].exp(), (-0.5 * theta[0]).exp(), &self.grid)
    }

    /// `∂Q/∂log κ = 4κ² h^d (κ² I - Δ_h) / σ²`.
    fn precision_dlogkappa(&self, theta: [f64; 2]) -> Result<SparseOperator> {
        let lap = self.laplacian.as_ref().expect("markov family");
        let kappa2 = (2.0 * theta[1]).exp();
        let n = self.n();
        let mut t: Vec<(usize, usize, f64)> = lap.triplets().collect();
        t.extend((0..n).map(|s| (s, s, kappa2)));
        let a = SparseOperator::from_triplets(n, t)?;
        let h_d = self.grid.spacing().powi(self.grid.d() as i32);
        Ok(a.scaled(4.0 * kappa2 * h_d / theta[0].exp()))
    }

    /// Dense covariance at `θ`, including the jitter.
    pub fn covariance(&self, theta: [f64; 2]) -> Result<DMatrix<f64>> {
        Ok(self.covariance_parts(theta, false)?.0)
    }

    /// Covariance and, for the Matérn family on request, `∂C/∂log κ`.
    fn covariance_parts(&self, theta: [f64; 2], derivative: bool) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
        Self::check_theta(theta)?;
        let n = self.n();
        let sigma2 = theta[0].exp();
        match self.family {
            ModelFamily::Matern { nu } => {
                let table = self.distances.as_ref().expect("matern family");
                let kappa = theta[1].exp();
                let vals: Vec<(f64, f64)> = table.unique.iter().map(|&r| matern_correlation(nu, kappa * r)).collect();
                let jitter = self.jitter(theta);
                let c = DMatrix::from_fn(n, n, |i, j| {
                    let v = sigma2 * vals[table.index[i * n + j] as usize].0;
                    if i == j {
                        v + jitter
                    } else {
                        v
                    }
                });
                let dc = derivative.then(|| DMatrix::from_fn(n, n, |i, j| sigma2 * vals[table.index[i * n + j] as usize].1));
                Ok((c, dc))
            }
            ModelFamily::Markov => {
                let q = self.precision(theta)?.to_dense();
                let chol = dense_cholesky(q, "markov precision")?;
                Ok((chol.inverse(), None))
            }
        }
    }
}

fn dense_cholesky(c: DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    let backup = c.clone();
    Cholesky::new(c).ok_or_else(|| {
        let eig = SymmetricEigen::new(backup);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        Error::Definiteness { eigenvalue: min, context: Some(context.to_string()) }
    })
}

fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// `-½(N log 2π + log det C + yᵀC⁻¹y)` through a dense Cholesky factor.
pub fn gaussian_loglik_dense(c: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    let n = y.len();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::Shape(format!("{}×{} covariance for {n} observations", c.nrows(), c.ncols())));
    }
    let chol = dense_cholesky(c.clone(), "covariance")?;
    let yv = nalgebra::DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    Ok(-0.5 * (n as f64 * LN_2PI + log_det_from_cholesky(&chol) + yv.dot(&alpha)))
}

/// `-½(N log 2π - log det Q + yᵀQy)` through a sparse Cholesky factor of
/// `Q` in the ordering `perm`.
pub fn gaussian_loglik_precision(q: &SparseOperator, perm: &[usize], y: &[f64]) -> Result<f64> {
    let n = y.len();
    if q.dim() != n {
        return Err(Error::Shape(format!("{}×{} precision for {n} observations", q.dim(), q.dim())));
    }
    let factor = SparseCholesky::factorize(q, perm).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot, .. } => Error::Definiteness { eigenvalue: pivot, context: Some("sparse precision factorization".into()) },
        other => other,
    })?;
    let qy = q.matvec(y);
    let quad: f64 = y.iter().zip(&qy).map(|(a, b)| a * b).sum();
    Ok(-0.5 * (n as f64 * LN_2PI - factor.log_det() + quad))
}

/// Log-likelihood through the dense covariance.
pub fn dense_loglik(problem: &LikelihoodProblem, theta: [f64; 2]) -> Result<f64> {
    let c = problem.covariance(theta)?;
    gaussian_loglik_dense(&c, &problem.y)
}

/// Log-likelihood through the sparse precision (markov family only).
pub fn sparse_loglik(problem: &LikelihoodProblem, theta: [f64; 2]) -> Result<f64> {
    if problem.family != ModelFamily::Markov {
        return Err(Error::WrongOperation("sparse log-likelihood needs the markov family".into()));
    }
    let q = problem.precision(theta)?;
    gaussian_loglik_precision(&q, problem.order.as_ref().expect("markov family"), &problem.y)
}

/// Dense log-likelihood and its gradient in `θ` from the trace identity
/// `∂ℓ/∂θ_k = -½ tr(C⁻¹ ∂_k C) + ½ αᵀ ∂_k C α`, `α = C⁻¹y`.
pub fn dense_loglik_gradient(problem: &LikelihoodProblem, theta: [f64; 2]) -> Result<(f64, [f64; 2])> {
    let n = problem.n();
    let nf = n as f64;
    let y = &problem.y;
    match problem.family {
        ModelFamily::Matern { .. } => {
            let (c, dc) = problem.covariance_parts(theta, true)?;
            let dc = dc.expect("derivative requested");
            let chol = dense_cholesky(c, "covariance")?;
            let yv = nalgebra::DVector::from_column_slice(y);
            let alpha = chol.solve(&yv);
            let quad = yv.dot(&alpha);
            let value = -0.5 * (nf * LN_2PI + log_det_from_cholesky(&chol) + quad);
            // ∂C/∂log σ² = C, jitter included
            let g0 = -0.5 * nf + 0.5 * quad;
            let cinv = chol.inverse();
            let trace = cinv.component_mul(&dc).sum();
            let g1 = -0.5 * trace + 0.5 * alpha.dot(&(&dc * &alpha));
            Ok((value, [g0, g1]))
        }
        ModelFamily::Markov => {
            // C = Q⁻¹: ∂ℓ = ½ tr(C ∂Q) - ½ yᵀ ∂Q y, ∂Q/∂log σ² = -Q
            let q = problem.precision(theta)?;
            let chol = dense_cholesky(q.to_dense(), "markov precision")?;
            let c = chol.inverse();
            let qy = q.matvec(y);
            let quad: f64 = y.iter().zip(&qy).map(|(a, b)| a * b).sum();
            let value = -0.5 * (nf * LN_2PI - log_det_from_cholesky(&chol) + quad);
            let g0 = -0.5 * nf + 0.5 * quad;
            let dq = problem.precision_dlogkappa(theta)?;
            let trace: f64 = dq.triplets().map(|(i, j, v)| v * c[(i, j)]).sum();
            let dqy = dq.matvec(y);
            let dquad: f64 = y.iter().zip(&dqy).map(|(a, b)| a * b).sum();
            Ok((value, [g0, 0.5 * trace - 0.5 * dquad]))
        }
    }
}

/// A differentiable scalar function of `θ`.
pub trait Objective {
    fn value(&self, theta: [f64; 2]) -> Result<f64>;
    fn gradient(&self, theta: [f64; 2]) -> Result<[f64; 2]>;
}

impl Objective for LikelihoodProblem {
    fn value(&self, theta: [f64; 2]) -> Result<f64> {
        dense_loglik(self, theta)
    }

    fn gradient(&self, theta: [f64; 2]) -> Result<[f64; 2]> {
        Ok(dense_loglik_gradient(self, theta)?.1)
    }
}

/// `max_k |g_k - ĝ_k| / max(‖g‖_∞, 1)` where `ĝ` is the central difference
/// with the given step.
pub fn fd_gradient_check<O: Objective + ?Sized>(objective: &O, theta: [f64; 2], step: f64) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Step(format!("step must be positive and finite, got {step}")));
    }
    let g = objective.gradient(theta)?;
    let scale = g[0].abs().max(g[1].abs()).max(1.0);
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        let (mut up, mut down) = (theta, theta);
        up[k] += step;
        down[k] -= step;
        if up[k] == theta[k] || down[k] == theta[k] {
            return Err(Error::Step(format!("step {step:e} vanishes against θ_{k} = {}", theta[k])));
        }
        let fd = (objective.value(up)? - objective.value(down)?) / (up[k] - down[k]);
        worst = worst.max((g[k] - fd).abs() / scale);
    }
    Ok(worst)
}

/// Log-likelihood on a rectangular `θ` grid; `values[i * log_kappa.len() + j]`
/// belongs to `(log_sigma2[i], log_kappa[j])`. Nodes where the covariance
/// cannot be factorized hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSurface {
    pub log_sigma2: Vec<f64>,
    pub log_kappa: Vec<f64>,
    pub values: Vec<f64>,
}

impl ProfileSurface {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.log_kappa.len() + j]
    }

    /// Grid indices of the largest finite value.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let nk = self.log_kappa.len();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| (k / nk, k % nk))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("log_sigma2,log_kappa,loglik\n");
        for (i, s) in self.log_sigma2.iter().enumerate() {
            for (j, k) in self.log_kappa.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", format_f64(*s), format_f64(*k), format_f64(self.get(i, j)));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn profile_surface(problem: &LikelihoodProblem, log_sigma2: &[f64], log_kappa: &[f64]) -> ProfileSurface {
    let nk = log_kappa.len();
    let values = (0..log_sigma2.len() * nk)
        .into_par_iter()
        .map(|k| dense_loglik(problem, [log_sigma2[k / nk], log_kappa[k % nk]]).unwrap_or(f64::NAN))
        .collect();
    ProfileSurface { log_sigma2: log_sigma2.to_vec(), log_kappa: log_kappa.to_vec(), values }
}

/// Optimizer starts and box, derived from the data and the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchPlan {
    /// `log` of the mean square of the observations.
    pub log_variance0: f64,
    pub starts: Vec<[f64; 2]>,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

/// Starts `log σ² ∈ {v₀ ± ½}` × `log κ ∈ {log(3/D), log(0.3/h)}` with `D` the
/// domain extent and `h` the spacing; box `log σ² ∈ [v₀ - 10, v₀ + 10]`,
/// `log κ ∈ [log(0.01/D), log(100/h)]`.
pub fn search_plan(problem: &LikelihoodProblem) -> Result<SearchPlan> {
    let ms = problem.y.iter().map(|v| v * v).sum::<f64>() / problem.n() as f64;
    if ms <= 0.0 {
        return Err(Error::InvalidParameter("observations are identically zero".into()));
    }
    let v0 = ms.ln();
    let d = problem.domain_extent();
    let h = problem.grid.spacing();
    let kappas = [(3.0 / d).ln(), (0.3 / h).ln()];
    let starts = [v0 - 0.5, v0 + 0.5].iter().flat_map(|&s| kappas.iter().map(move |&k| [s, k])).collect();
    Ok(SearchPlan { log_variance0: v0, starts, lower: [v0 - 10.0, (0.01 / d).ln()], upper: [v0 + 10.0, (100.0 / h).ln()] })
}

/// Maximum-likelihood estimate in `(log σ², log κ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub theta: [f64; 2],
    pub loglik: f64,
    pub gradient: [f64; 2],
    /// BFGS iterations of the winning start.
    pub iterations: usize,
    pub plan: SearchPlan,
    /// Final log-likelihood from each start; `None` where the start failed.
    pub start_logliks: Vec<Option<f64>>,
}

/// Runs BFGS from each start of [`search_plan`] and keeps the highest
/// log-likelihood, breaking ties (within 1e-9) by the smaller `‖θ‖`.
pub fn maximize(problem: &LikelihoodProblem) -> Result<MleFit> {
    let plan = search_plan(problem)?;
    let settings = Settings::default();
    let mut best: Option<optimize::Optimum> = None;
    let mut start_logliks = Vec::new();
    let mut first_error = None;
    for &start in &plan.starts {
        match bfgs_maximize(|t| dense_loglik_gradient(problem, t), start, plan.lower, plan.upper, &settings) {
            Ok(o) => {
                start_logliks.push(Some(o.value));
                let norm = |t: [f64; 2]| t[0].hypot(t[1]);
                let better = match &best {
                    None => true,
                    Some(b) => o.value > b.value + 1e-9 || ((o.value - b.value).abs() <= 1e-9 && norm(o.theta) < norm(b.theta)),
                };
                if better {
                    best = Some(o);
                }
            }
            Err(e) => {
                start_logliks.push(None);
                first_error.get_or_insert(e);
            }
        }
    }
    let Some(best) = best else {
        return Err(first_error.expect("at least one start"));
    };
    let on_edge = (0..2).any(|k| {
        let tol = 1e-6 * (plan.upper[k] - plan.lower[k]);
        best.theta[k] <= plan.lower[k] + tol || best.theta[k] >= plan.upper[k] - tol
    });
    if on_edge {
        return Err(Error::Boundary { theta: best.theta });
    }
    Ok(MleFit { theta: best.theta, loglik: best.value, gradient: best.gradient, iterations: best.iterations, plan, start_logliks })
}

/// Curvature of the log-likelihood at the MLE, in `(log σ², log κ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeReport {
    pub family: ModelFamily,
    pub n: usize,
    pub nu: f64,
    pub coordinates: [String; 2],
    pub theta_hat: [f64; 2],
    pub sigma2_hat: f64,
    pub kappa_hat: f64,
    pub loglik: f64,
    pub gradient: [f64; 2],
    /// Eigenvalues `λ₁ ≥ λ₂` of the negative Hessian.
    pub eigenvalues: [f64; 2],
    pub ratio: f64,
    /// Unit eigenvector of `λ₂`, oriented with a nonnegative `log κ` entry.
    pub flat_direction: [f64; 2],
    /// Unit tangent `(-2ν, 1)/‖·‖` of the curve `σ²κ^{2ν} = const`.
    pub microergodic_tangent: [f64; 2],
    pub angle_degrees: f64,
    pub jitter_relative: f64,
    pub hessian_step: f64,
    pub fit: MleFit,
}

impl RidgeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Negative Hessian at `theta` by central differences of the gradient.
pub fn negative_hessian(problem: &LikelihoodProblem, theta: [f64; 2], step: f64) -> Result<Matrix2<f64>> {
    let mut h = Matrix2::zeros();
    for k in 0..2 {
        let (mut up, mut down) = (theta, theta);
        up[k] += step;
        down[k] -= step;
        let gu = dense_loglik_gradient(problem, up)?.1;
        let gd = dense_loglik_gradient(problem, down)?.1;
        for i in 0..2 {
            h[(i, k)] = -(gu[i] - gd[i]) / (up[k] - down[k]);
        }
    }
    Ok((h + h.transpose()) * 0.5)
}

pub fn ridge_report(problem: &LikelihoodProblem) -> Result<RidgeReport> {
    let fit = maximize(problem)?;
    let theta = fit.theta;
    let h = negative_hessian(problem, theta, HESSIAN_STEP)?;
    let eig = SymmetricEigen::new(h);
    let (i1, i2) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let (l1, l2) = (eig.eigenvalues[i1], eig.eigenvalues[i2]);
    if l2 <= 0.0 {
        return Err(Error::Definiteness { eigenvalue: l2, context: Some("negative Hessian at the maximum".into()) });
    }
    let v = eig.eigenvectors.column(i2);
    let sign = if v[1] < 0.0 { -1.0 } else { 1.0 };
    let norm = v.norm();
    let flat = [sign * v[0] / norm, sign * v[1] / norm];
    let nu = problem.nu();
    let tn = (4.0 * nu * nu + 1.0).sqrt();
    let tangent = [-2.0 * nu / tn, 1.0 / tn];
    let cos = (flat[0] * tangent[0] + flat[1] * tangent[1]).abs().min(1.0);
    Ok(RidgeReport {
        family: problem.family,
        n: problem.n(),
        nu,
        coordinates: ["log_sigma2".into(), "log_kappa".into()],
        theta_hat: theta,
        sigma2_hat: theta[0].exp(),
        kappa_hat: theta[1].exp(),
        loglik: fit.loglik,
        gradient: fit.gradient,
        eigenvalues: [l1, l2],
        ratio: l1 / l2,
        flat_direction: flat,
        microergodic_tangent: tangent,
        angle_degrees: cos.acos().to_degrees(),
        jitter_relative: if problem.family == ModelFamily::Markov { 0.0 } else { JITTER_REL },
        hessian_step: HESSIAN_STEP,
        fit,
    })
}

/// Gaussian observations with the family's covariance at `theta`, drawn as
/// `L z` with `L` the dense Cholesky factor.
pub fn simulate_observations(grid: GridSpec, family: ModelFamily, theta: [f64; 2], seed: u64, replicate: u32) -> Result<Vec<f64>> {
    let n = grid.num_sites();
    let problem = LikelihoodProblem::new(grid, vec![0.0; n], family)?;
    let chol = dense_cholesky(problem.covariance(theta)?, "covariance")?;
    let mut rng = stream(StreamKind::Likelihood, seed, replicate as u64, 0);
    let z = nalgebra::DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok((chol.l() * z).iter().copied().collect())
}
