//! Parametric cross-spectral densities and their matrix square roots.
//!
//! A [`SpectrumModel`] maps a frequency `ω ∈ ℝ^d` to a Hermitian nonnegative
//! definite `p × p` matrix
//!
//! ```text
//! S_ii(ω) = f_i(ω)
//! S_ij(ω) = ρ_ij · exp(-i ω·δ_ij) · sqrt(f_i(ω) f_j(ω))      (i < j)
//! S_ji(ω) = conj(S_ij(ω))
//! ```
//!
//! where each `f_i` is a Matérn-type density `c (κ² + |ω|²)^-(ν + d/2)` with
//! `c` fixed numerically so that `∫ f_i = σ_i²`. The colocation matrix `R`
//! (`R_ii = 1`, `R_ij = ρ_ij`) must be positive semidefinite; then `S(ω)` is
//! too, for every ω. A nonzero phase lag `δ_ij` makes the cross-covariance
//! asymmetric: `C_ij(h) = C_ji(-h)` still holds but `C_ij(h) ≠ C_ij(-h)`.
//!
//! Covariances follow the convention `C_ij(h) = Cov(x_i(s + h), x_j(s)) =
//! ∫ S_ij(ω) exp(i ω·h) dω`, so with equal components `C_12(h) = ρ C(h - δ)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{FreqClass, FrequencyGrid};
use crate::quadrature::tanh_sinh;

pub type CMatrix = DMatrix<Complex64>;

/// Matérn-type spectral parameters of one component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaternParams {
    pub variance: f64,
    pub kappa: f64,
    pub nu: f64,
}

impl MaternParams {
    pub fn new(variance: f64, kappa: f64, nu: f64) -> Result<Self> {
        let p = MaternParams { variance, kappa, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("variance", self.variance), ("kappa", self.kappa), ("nu", self.nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("Matérn {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// One diagonal entry `f_i` of the cross-spectral matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ComponentSpec {
    Matern(MaternParams),
    /// Flat density `variance / (2·cutoff)^d` on the box `|ω_a| ≤ cutoff`.
    /// With `cutoff = π/h` this is discrete white noise on a grid of spacing `h`.
    BandLimitedWhite { variance: f64, cutoff: f64 },
}

impl ComponentSpec {
    pub fn variance(&self) -> f64 {
        match self {
            ComponentSpec::Matern(m) => m.variance,
            ComponentSpec::BandLimitedWhite { variance, .. } => *variance,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ComponentSpec::Matern(m) => m.validate(),
            ComponentSpec::BandLimitedWhite { variance, cutoff } => {
                if !(*variance > 0.0 && variance.is_finite() && *cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "white component needs positive variance and cutoff, got {variance}, {cutoff}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// A component density with its normalization constant resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentDensity {
    spec: ComponentSpec,
    d: usize,
    scale: f64,
}

/// `∫_{ℝ^d} (κ² + |ω|²)^-(ν + d/2) dω`, by quadrature in polar form with the
/// substitution `|ω| = κ tan θ`.
fn matern_mass(kappa: f64, nu: f64, d: usize) -> f64 {
    let angular = tanh_sinh(
        |_, theta, to_half_pi| theta.sin().powi(d as i32 - 1) * to_half_pi.sin().powf(2.0 * nu - 1.0),
        0.0,
        PI / 2.0,
        1e-14,
    );
    let sphere = if d == 1 { 2.0 } else { 2.0 * PI };
    sphere * kappa.powf(-2.0 * nu) * angular
}

impl ComponentDensity {
    pub fn new(spec: ComponentSpec, d: usize) -> Result<Self> {
        spec.validate()?;
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {d}")));
        }
        let scale = match spec {
            ComponentSpec::Matern(m) => m.variance / matern_mass(m.kappa, m.nu, d),
            ComponentSpec::BandLimitedWhite { variance, cutoff } => variance / (2.0 * cutoff).powi(d as i32),
        };
        Ok(ComponentDensity { spec, d, scale })
    }

    pub fn spec(&self) -> &ComponentSpec {
        &self.spec
    }

    /// Normalization constant `c`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, omega: &[f64]) -> f64 {
        match self.spec {
            ComponentSpec::Matern(m) => {
                let r2: f64 = omega.iter().map(|w| w * w).sum();
                self.scale * (m.kappa * m.kappa + r2).powf(-(m.nu + 0.5 * self.d as f64))
            }
            ComponentSpec::BandLimitedWhite { cutoff, .. } => {
                let edge = cutoff * (1.0 + 1e-12);
                if omega.iter().all(|w| w.abs() <= edge) {
                    self.scale
                } else {
                    0.0
                }
            }
        }
    }
}

/// Spectral density of a single Matérn-type component at `omega`.
///
/// Builds the normalization on every call; hold a [`ComponentDensity`] when
/// evaluating repeatedly.
pub fn component_density(params: &MaternParams, d: usize, omega: &[f64]) -> Result<f64> {
    check_frequency(omega, d)?;
    Ok(ComponentDensity::new(ComponentSpec::Matern(*params), d)?.eval(omega))
}

fn check_frequency(omega: &[f64], d: usize) -> Result<()> {
    if omega.len() != d {
        return Err(Error::Shape(format!("frequency has {} entries, model has d = {d}", omega.len())));
    }
    if omega.iter().any(|w| !w.is_finite()) {
        return Err(Error::Domain(format!("non-finite frequency {omega:?}")));
    }
    Ok(())
}

/// Coupling between two components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSpec {
    pub i: usize,
    pub j: usize,
    /// Colocation coefficient `ρ_ij ∈ [-1, 1]`.
    pub rho: f64,
    /// Phase lag `δ_ij` in length units, one entry per dimension.
    #[serde(default)]
    pub delta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumModelRaw {
    d: usize,
    components: Vec<ComponentSpec>,
    #[serde(default)]
    cross: Vec<CrossSpec>,
}

/// Parametric cross-spectral density `ω ↦ S(ω)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SpectrumModelRaw", into = "SpectrumModelRaw")]
pub struct SpectrumModel {
    d: usize,
    components: Vec<ComponentDensity>,
    cross: Vec<CrossSpec>,
    colocation: DMatrix<f64>,
    lags: Vec<[f64; 2]>,
}

impl TryFrom<SpectrumModelRaw> for SpectrumModel {
    type Error = Error;
    fn try_from(raw: SpectrumModelRaw) -> Result<Self> {
        SpectrumModel::new(raw.d, raw.components, raw.cross)
    }
}

impl From<SpectrumModel> for SpectrumModelRaw {
    fn from(m: SpectrumModel) -> Self {
        SpectrumModelRaw {
            d: m.d,
            components: m.components.iter().map(|c| c.spec).collect(),
            cross: m.cross,
        }
    }
}

impl SpectrumModel {
    pub fn new(d: usize, components: Vec<ComponentSpec>, cross: Vec<CrossSpec>) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {d}")));
        }
        let p = components.len();
        if p == 0 {
            return Err(Error::InvalidParameter("model needs at least one component".into()));
        }
        let components = components
            .into_iter()
            .map(|c| ComponentDensity::new(c, d))
            .collect::<Result<Vec<_>>>()?;
        let mut colocation = DMatrix::<f64>::identity(p, p);
        let mut lags = vec![[0.0; 2]; p * p];
        let mut cross = cross;
        for c in cross.iter_mut() {
            if c.i >= c.j || c.j >= p {
                return Err(Error::InvalidParameter(format!(
                    "cross entry ({}, {}) must satisfy i < j < p = {p}",
                    c.i, c.j
                )));
            }
            if !(-1.0..=1.0).contains(&c.rho) {
                return Err(Error::InvalidParameter(format!("colocation {} outside [-1, 1]", c.rho)));
            }
            if c.delta.is_empty() {
                c.delta = vec![0.0; d];
            }
            if c.delta.len() != d || c.delta.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "phase lag for ({}, {}) must be {d} finite values",
                    c.i, c.j
                )));
            }
            if colocation[(c.i, c.j)] != 0.0 {
                return Err(Error::InvalidParameter(format!("duplicate cross entry ({}, {})", c.i, c.j)));
            }
            colocation[(c.i, c.j)] = c.rho;
            colocation[(c.j, c.i)] = c.rho;
            let mut lag = [0.0; 2];
            lag[..d].copy_from_slice(&c.delta);
            lags[c.i * p + c.j] = lag;
        }
        let min_eig = colocation.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-12 {
            return Err(Error::InvalidParameter(format!(
                "colocation matrix is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(SpectrumModel { d, components, cross, colocation, lags })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ComponentDensity] {
        &self.components
    }

    pub fn colocation(&self) -> &DMatrix<f64> {
        &self.colocation
    }

    pub fn phase_lag(&self, i: usize, j: usize) -> [f64; 2] {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let lag = self.lags[a * self.p() + b];
        if i < j {
            lag
        } else {
            [-lag[0], -lag[1]]
        }
    }

    /// Short stable hash of the serialized model.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// `S(ω)`. Hermitian by construction.
    pub fn cross_spectral_matrix(&self, omega: &[f64]) -> Result<CMatrix> {
        check_frequency(omega, self.d)?;
        Ok(self.cross_spectral_matrix_unchecked(omega))
    }

    fn cross_spectral_matrix_unchecked(&self, omega: &[f64]) -> CMatrix {
        let p = self.p();
        let f: Vec<f64> = self.components.iter().map(|c| c.eval(omega)).collect();
        let mut s = CMatrix::zeros(p, p);
        for i in 0..p {
            s[(i, i)] = Complex64::new(f[i], 0.0);
            for j in i + 1..p {
                let rho = self.colocation[(i, j)];
                if rho == 0.0 {
                    continue;
                }
                let lag = self.lags[i * p + j];
                let phase: f64 = omega.iter().zip(lag.iter()).map(|(w, l)| w * l).sum();
                let v = Complex64::from_polar(rho * (f[i] * f[j]).sqrt(), -phase);
                s[(i, j)] = v;
                s[(j, i)] = v.conj();
            }
        }
        s
    }
}

/// Outcome of [`validate_hermitian_psd`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdDiagnostic {
    pub ok: bool,
    pub min_eigenvalue: f64,
    pub hermitian_residual: f64,
}

fn hermitian_part(s: &CMatrix) -> CMatrix {
    (s + s.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Checks `max |S_ij - conj(S_ji)| ≤ tol` and `λ_min ≥ -tol`.
pub fn validate_hermitian_psd(s: &CMatrix, tol: f64) -> Result<PsdDiagnostic> {
    if !s.is_square() {
        return Err(Error::Shape(format!("matrix is {}×{}, expected square", s.nrows(), s.ncols())));
    }
    let p = s.nrows();
    let mut residual = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            residual = residual.max((s[(i, j)] - s[(j, i)].conj()).norm());
        }
    }
    let min_eigenvalue = if p == 0 {
        0.0
    } else {
        hermitian_part(s).symmetric_eigenvalues().min()
    };
    Ok(PsdDiagnostic {
        ok: residual <= tol && min_eigenvalue >= -tol,
        min_eigenvalue,
        hermitian_residual: residual,
    })
}

/// Which square root of `S(ω)` filters the noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SqrtMethod {
    /// Cholesky-type factor, the cheapest.
    #[default]
    LowerTriangular,
    /// Unique Hermitian nonnegative definite root.
    Hermitian,
}

impl SqrtMethod {
    pub fn name(self) -> &'static str {
        match self {
            SqrtMethod::LowerTriangular => "lower-triangular",
            SqrtMethod::Hermitian => "hermitian",
        }
    }
}

impl std::str::FromStr for SqrtMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower-triangular" => Ok(SqrtMethod::LowerTriangular),
            "hermitian" => Ok(SqrtMethod::Hermitian),
            other => Err(Error::InvalidParameter(format!("unknown square-root method {other:?}"))),
        }
    }
}

/// Relative threshold below which eigenvalues are clipped to zero.
const CLIP_REL: f64 = 1e-8;
/// Relative pivot threshold that triggers the eigen-based triangular factor.
const PIVOT_REL: f64 = 1e-12;

fn trace_of(s: &CMatrix) -> f64 {
    (0..s.nrows()).map(|i| s[(i, i)].re).sum()
}

fn hermitian_root(s: &CMatrix, trace: f64) -> Result<CMatrix> {
    let eig = hermitian_part(s).symmetric_eigen();
    let floor = -CLIP_REL * trace;
    let mut roots = Vec::with_capacity(s.nrows());
    for &lambda in eig.eigenvalues.iter() {
        if lambda < floor {
            return Err(Error::Definiteness { eigenvalue: lambda, context: None });
        }
        roots.push(Complex64::new(lambda.max(0.0).sqrt(), 0.0));
    }
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, r) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(r.re);
    }
    Ok(&scaled * v.adjoint())
}

/// Lower-triangular `L` with `L L* = H²` from the QR factorization of the
/// Hermitian root `H`, with a real nonnegative diagonal.
fn triangular_from_root(h: CMatrix) -> CMatrix {
    let r = h.qr().r();
    let mut l = r.adjoint();
    for j in 0..l.ncols() {
        let d = l[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..l.nrows() {
                l[(i, j)] *= phase.conj();
            }
        }
    }
    l
}

/// Matrix square root `L` with `L L* = S`.
///
/// The lower-triangular method runs a complex Cholesky elimination; when a
/// pivot drops below `1e-12 · tr S` (rank-deficient `S`) it falls back to the
/// triangular factor of the Hermitian root, so the result stays lower
/// triangular. Eigenvalues in `[-1e-8 · tr S, 0)` are treated as zero; more
/// negative ones are a [`Error::Definiteness`].
pub fn spectral_sqrt(s: &CMatrix, method: SqrtMethod) -> Result<CMatrix> {
    if !s.is_square() {
        return Err(Error::Shape(format!("matrix is {}×{}, expected square", s.nrows(), s.ncols())));
    }
    let p = s.nrows();
    let trace = trace_of(s);
    if p == 0 || trace == 0.0 {
        // tr S = 0 with S ⪰ 0 forces S = 0
        if s.iter().any(|v| v.norm() > 0.0) {
            let diag = validate_hermitian_psd(s, 0.0)?;
            return Err(Error::Definiteness { eigenvalue: diag.min_eigenvalue, context: None });
        }
        return Ok(CMatrix::zeros(p, p));
    }
    let diag = validate_hermitian_psd(s, CLIP_REL * trace)?;
    if diag.hermitian_residual > CLIP_REL * trace || diag.min_eigenvalue < -CLIP_REL * trace {
        return Err(Error::Definiteness { eigenvalue: diag.min_eigenvalue, context: None });
    }
    match method {
        SqrtMethod::Hermitian => hermitian_root(s, trace),
        SqrtMethod::LowerTriangular => {
            let mut l = CMatrix::zeros(p, p);
            for j in 0..p {
                let mut d = s[(j, j)].re;
                for k in 0..j {
                    d -= l[(j, k)].norm_sqr();
                }
                if d <= PIVOT_REL * trace {
                    return Ok(triangular_from_root(hermitian_root(s, trace)?));
                }
                let pivot = d.sqrt();
                l[(j, j)] = Complex64::new(pivot, 0.0);
                for i in j + 1..p {
                    let mut v = s[(i, j)];
                    for k in 0..j {
                        v -= l[(i, k)] * l[(j, k)].conj();
                    }
                    l[(i, j)] = v / pivot;
                }
            }
            Ok(l)
        }
    }
}

/// `S` on every frequency of a periodic grid, as seen by the sampler.
///
/// Representatives use `S(ω)`, reflections `conj(S(ω))`, and self-conjugate
/// frequencies (zero, Nyquist) the real part `(S(ω) + S(-ω))/2`: on the
/// torus a Nyquist bin stands for both `±π/h`, and only a real spectrum there
/// yields a real field.
pub fn discrete_spectrum(model: &SpectrumModel, freqs: &FrequencyGrid) -> Result<Vec<CMatrix>> {
    if model.d() != freqs.grid().d() {
        return Err(Error::Inconsistent(format!(
            "model has d = {} but grid has d = {}",
            model.d(),
            freqs.grid().d()
        )));
    }
    let d = model.d();
    let mut out: Vec<CMatrix> = freqs
        .points()
        .par_iter()
        .map(|pt| match pt.class {
            FreqClass::Reflected => CMatrix::zeros(0, 0),
            FreqClass::Representative => model.cross_spectral_matrix_unchecked(&pt.omega[..d]),
            FreqClass::SelfConjugate => model
                .cross_spectral_matrix_unchecked(&pt.omega[..d])
                .map(|v| Complex64::new(v.re, 0.0)),
        })
        .collect();
    for (k, pt) in freqs.points().iter().enumerate() {
        if pt.class == FreqClass::Reflected {
            out[k] = out[pt.partner].map(|v| v.conj());
        }
    }
    Ok(out)
}

/// Square-root filter `L(ω_k)` on a discrete frequency grid.
#[derive(Clone, Debug)]
pub struct SpectralFilter {
    pub p: usize,
    pub method: SqrtMethod,
    /// One `p × p` factor per frequency, in the grid's linear order.
    pub factors: Vec<CMatrix>,
}

/// Evaluates `L` on the half-space representatives and self-conjugate
/// frequencies and fills the reflections by conjugation, so
/// `L(-ω) = conj(L(ω))` holds exactly.
pub fn build_filter(model: &SpectrumModel, freqs: &FrequencyGrid, method: SqrtMethod) -> Result<SpectralFilter> {
    let spectrum = discrete_spectrum(model, freqs)?;
    let d = model.d();
    let mut factors: Vec<CMatrix> = freqs
        .points()
        .par_iter()
        .zip(spectrum.par_iter())
        .map(|(pt, s)| -> Result<CMatrix> {
            if pt.class == FreqClass::Reflected {
                return Ok(CMatrix::zeros(0, 0));
            }
            spectral_sqrt(s, method).map_err(|e| match e {
                Error::Definiteness { eigenvalue, .. } => Error::Definiteness {
                    eigenvalue,
                    context: Some(format!("at ω = {:?}", &pt.omega[..d])),
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for (k, pt) in freqs.points().iter().enumerate() {
        if pt.class == FreqClass::Reflected {
            factors[k] = factors[pt.partner].map(|v| v.conj());
        }
    }
    Ok(SpectralFilter { p: model.p(), method, factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_frequency_grid, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matern(variance: f64, kappa: f64, nu: f64) -> ComponentSpec {
        ComponentSpec::Matern(MaternParams::new(variance, kappa, nu).unwrap())
    }

    fn bivariate(rho: f64, delta: Vec<f64>) -> SpectrumModel {
        let d = delta.len();
        SpectrumModel::new(
            d,
            vec![matern(1.0, 0.5, 1.0), matern(1.0, 0.5, 1.0)],
            vec![CrossSpec { i: 0, j: 1, rho, delta }],
        )
        .unwrap()
    }

    fn rel_frob(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn density_decreases_and_scales_with_variance() {
        let p1 = MaternParams::new(1.0, 1.0, 1.0).unwrap();
        let p2 = MaternParams::new(2.0, 1.0, 1.0).unwrap();
        let f0 = component_density(&p1, 1, &[0.0]).unwrap();
        let f1 = component_density(&p1, 1, &[1.0]).unwrap();
        assert!(f0 > f1);
        for w in [0.0, 0.3, 2.0, 17.0] {
            let a = component_density(&p1, 1, &[w]).unwrap();
            let b = component_density(&p2, 1, &[w]).unwrap();
            assert!((b - 2.0 * a).abs() <= 1e-15 * b);
        }
    }

    #[test]
    fn density_trapezoid_normalization() {
        let p = MaternParams::new(1.0, 1.0, 1.0).unwrap();
        let f = ComponentDensity::new(ComponentSpec::Matern(p), 1).unwrap();
        let step = 0.01;
        let n = (400.0 / step) as usize;
        let mut total = 0.0;
        for k in 0..=n {
            let w = -200.0 + k as f64 * step;
            let weight = if k == 0 || k == n { 0.5 } else { 1.0 };
            total += weight * f.eval(&[w]);
        }
        total *= step;
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn normalization_matches_gamma_closed_form() {
        // ∫ (κ²+|ω|²)^-(ν+d/2) dω = π^{d/2} Γ(ν) / Γ(ν + d/2) κ^{-2ν}
        use statrs::function::gamma::gamma;
        for d in [1usize, 2] {
            for &(kappa, nu) in &[(1.0, 1.0), (0.5, 0.5), (3.0, 2.5), (0.2, 0.3), (1.7, 0.05)] {
                let mass = matern_mass(kappa, nu, d);
                let exact = PI.powf(d as f64 / 2.0) * gamma(nu) / gamma(nu + d as f64 / 2.0) * kappa.powf(-2.0 * nu);
                assert!((mass - exact).abs() < 1e-10 * exact, "d={d} κ={kappa} ν={nu}: {mass} vs {exact}");
            }
        }
    }

    #[test]
    fn density_integrates_to_variance_on_truncated_box_2d() {
        let spec = matern(2.5, 1.0, 1.5);
        let f = ComponentDensity::new(spec, 2).unwrap();
        let (half, step) = (60.0, 0.05);
        let n = (2.0 * half / step) as usize;
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                let w = [-half + (a as f64 + 0.5) * step, -half + (b as f64 + 0.5) * step];
                total += f.eval(&w);
            }
        }
        total *= step * step;
        assert!((total - 2.5).abs() < 0.01 * 2.5, "{total}");
    }

    #[test]
    fn component_density_rejects_bad_frequency() {
        let p = MaternParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(component_density(&p, 1, &[f64::NAN]), Err(Error::Domain(_))));
        assert!(matches!(component_density(&p, 2, &[1.0]), Err(Error::Shape(_))));
        assert!(MaternParams::new(1.0, 0.0, 1.0).is_err());
        assert!(MaternParams::new(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn decoupled_components_have_zero_cross_spectrum() {
        let m = bivariate(0.0, vec![0.0]);
        for w in [0.0, 0.5, 3.0] {
            let s = m.cross_spectral_matrix(&[w]).unwrap();
            assert_eq!(s[(0, 1)], Complex64::new(0.0, 0.0));
            assert_eq!(s[(1, 0)], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn perfect_correlation_is_rank_one() {
        let m = bivariate(1.0, vec![0.0]);
        for w in [0.0, 0.5, 3.0] {
            let s = m.cross_spectral_matrix(&[w]).unwrap();
            let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
            assert!(det.norm() <= 1e-14 * s[(0, 0)].re * s[(0, 0)].re);
        }
    }

    #[test]
    fn phase_lag_sets_cross_spectrum_argument() {
        let m = bivariate(0.5, vec![0.3]);
        let s = m.cross_spectral_matrix(&[2.0]).unwrap();
        let mag = 0.5 * (s[(0, 0)].re * s[(1, 1)].re).sqrt();
        assert!((s[(0, 1)].norm() - mag).abs() < 1e-15);
        let arg = s[(0, 1)].arg();
        let diff = (arg + 0.6).rem_euclid(2.0 * PI);
        assert!(diff < 1e-12 || (2.0 * PI - diff) < 1e-12, "{arg}");
    }

    #[test]
    fn invalid_colocation_rejected() {
        let comps = vec![matern(1.0, 1.0, 1.0); 3];
        let cross = vec![
            CrossSpec { i: 0, j: 1, rho: 0.9, delta: vec![] },
            CrossSpec { i: 0, j: 2, rho: 0.9, delta: vec![] },
            CrossSpec { i: 1, j: 2, rho: -0.9, delta: vec![] },
        ];
        assert!(SpectrumModel::new(1, comps.clone(), cross).is_err());
        assert!(SpectrumModel::new(1, comps.clone(), vec![CrossSpec { i: 1, j: 0, rho: 0.1, delta: vec![] }]).is_err());
        assert!(SpectrumModel::new(1, comps, vec![CrossSpec { i: 0, j: 1, rho: 1.2, delta: vec![] }]).is_err());
    }

    #[test]
    fn validate_psd_examples() {
        let id = CMatrix::identity(3, 3);
        let d = validate_hermitian_psd(&id, 1e-12).unwrap();
        assert!(d.ok);
        assert!((d.min_eigenvalue - 1.0).abs() < 1e-14);

        let indefinite = CMatrix::from_row_slice(
            2,
            2,
            &[1.0, 2.0, 2.0, 1.0].map(|v| Complex64::new(v, 0.0)),
        );
        let d = validate_hermitian_psd(&indefinite, 1e-12).unwrap();
        assert!(!d.ok);
        assert!((d.min_eigenvalue + 1.0).abs() < 1e-12);

        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(validate_hermitian_psd(&rect, 1e-8), Err(Error::Shape(_))));
    }

    #[test]
    fn model_spectra_are_psd_at_random_frequencies() {
        let comps = vec![matern(1.0, 0.7, 1.0), matern(2.0, 1.3, 0.5), matern(0.5, 0.4, 2.0)];
        let cross = vec![
            CrossSpec { i: 0, j: 1, rho: 0.6, delta: vec![1.0, -2.0] },
            CrossSpec { i: 0, j: 2, rho: -0.3, delta: vec![0.5, 0.0] },
            CrossSpec { i: 1, j: 2, rho: 0.2, delta: vec![0.0, 3.0] },
        ];
        let m = SpectrumModel::new(2, comps, cross).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let w = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let s = m.cross_spectral_matrix(&w).unwrap();
            let diag = validate_hermitian_psd(&s, 1e-10).unwrap();
            assert!(diag.ok, "{diag:?}");
            // oracle: eigenvalues of the real 2p×2p embedding [[A, -B], [B, A]]
            let p = s.nrows();
            let mut big = DMatrix::<f64>::zeros(2 * p, 2 * p);
            for i in 0..p {
                for j in 0..p {
                    big[(i, j)] = s[(i, j)].re;
                    big[(i + p, j + p)] = s[(i, j)].re;
                    big[(i, j + p)] = -s[(i, j)].im;
                    big[(i + p, j)] = s[(i, j)].im;
                }
            }
            assert!(big.symmetric_eigenvalues().min() >= -1e-12);
            let neg = m.cross_spectral_matrix(&[-w[0], -w[1]]).unwrap();
            assert!((neg - s.map(|v| v.conj())).norm() < 1e-15);
        }
    }

    #[test]
    fn sqrt_trivial_cases() {
        for method in [SqrtMethod::LowerTriangular, SqrtMethod::Hermitian] {
            let id = CMatrix::identity(3, 3);
            assert!((spectral_sqrt(&id, method).unwrap() - &id).norm() < 1e-15);
            let four = CMatrix::from_element(1, 1, Complex64::new(4.0, 0.0));
            let l = spectral_sqrt(&four, method).unwrap();
            assert!((l[(0, 0)] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        }
    }

    fn random_psd(rng: &mut ChaCha8Rng, p: usize, rank: usize) -> CMatrix {
        let a = CMatrix::from_fn(p, rank, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        &a * a.adjoint()
    }

    #[test]
    fn sqrt_round_trip_random_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = random_psd(&mut rng, 3, 3);
            for method in [SqrtMethod::LowerTriangular, SqrtMethod::Hermitian] {
                let l = spectral_sqrt(&s, method).unwrap();
                assert!(rel_frob(&(&l * l.adjoint()), &s) < 1e-10);
            }
        }
    }

    #[test]
    fn sqrt_methods_differ_but_reconstruct_equally() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_psd(&mut rng, 2, 2);
        let lo = spectral_sqrt(&s, SqrtMethod::LowerTriangular).unwrap();
        let he = spectral_sqrt(&s, SqrtMethod::Hermitian).unwrap();
        assert_eq!(lo[(0, 1)], Complex64::new(0.0, 0.0));
        assert!((&he - he.adjoint()).norm() < 1e-12);
        assert!((&lo - &he).norm() > 1e-3);
        assert!(rel_frob(&(&lo * lo.adjoint()), &(&he * he.adjoint())) < 1e-12);
    }

    #[test]
    fn rank_deficient_falls_back_to_triangular_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [2usize, 3, 5] {
            let s = random_psd(&mut rng, p, 1);
            let l = spectral_sqrt(&s, SqrtMethod::LowerTriangular).unwrap();
            for i in 0..p {
                for j in i + 1..p {
                    assert!(l[(i, j)].norm() < 1e-14);
                }
            }
            assert!(rel_frob(&(&l * l.adjoint()), &s) < 1e-10);
        }
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let s = CMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0].map(|v| Complex64::new(v, 0.0)));
        match spectral_sqrt(&s, SqrtMethod::LowerTriangular) {
            Err(Error::Definiteness { eigenvalue, .. }) => assert!((eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        // a tiny negative eigenvalue is clipped
        let mut s = CMatrix::identity(2, 2);
        s[(1, 1)] = Complex64::new(-1e-10, 0.0);
        let l = spectral_sqrt(&s, SqrtMethod::Hermitian).unwrap();
        assert_eq!(l[(1, 1)].re, 0.0);
    }

    #[test]
    fn univariate_filter_is_real_and_even() {
        let m = SpectrumModel::new(1, vec![matern(1.0, 0.5, 1.0)], vec![]).unwrap();
        let g = GridSpec::periodic(&[32], 1.0).unwrap();
        let fg = build_frequency_grid(&g);
        let filt = build_filter(&m, &fg, SqrtMethod::LowerTriangular).unwrap();
        for (k, pt) in fg.points().iter().enumerate() {
            let l = filt.factors[k][(0, 0)];
            let f = m.components()[0].eval(&pt.omega[..1]);
            assert!((l.re - f.sqrt()).abs() < 1e-15 && l.im == 0.0);
            assert_eq!(filt.factors[pt.partner][(0, 0)], l);
        }
    }

    #[test]
    fn zero_lag_filter_is_real() {
        let m = bivariate(0.5, vec![0.0, 0.0]);
        let g = GridSpec::periodic(&[16, 16], 1.0).unwrap();
        let fg = build_frequency_grid(&g);
        for method in [SqrtMethod::LowerTriangular, SqrtMethod::Hermitian] {
            let filt = build_filter(&m, &fg, method).unwrap();
            for l in &filt.factors {
                assert!(l.iter().all(|v| v.im.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn phase_lag_filter_is_complex_and_conjugate_symmetric() {
        let m = bivariate(0.5, vec![5.0, 0.0]);
        let g = GridSpec::periodic(&[64, 64], 1.0).unwrap();
        let fg = build_frequency_grid(&g);
        let spectrum = discrete_spectrum(&m, &fg).unwrap();
        for method in [SqrtMethod::LowerTriangular, SqrtMethod::Hermitian] {
            let filt = build_filter(&m, &fg, method).unwrap();
            let (mut max_im, mut max_abs) = (0.0f64, 0.0f64);
            for (k, pt) in fg.points().iter().enumerate() {
                let l = &filt.factors[k];
                max_im = max_im.max(l[(1, 0)].im.abs());
                max_abs = max_abs.max(l[(1, 0)].norm());
                let partner = &filt.factors[pt.partner];
                assert_eq!(*partner, l.map(|v| v.conj()));
                let s = &spectrum[k];
                if s.norm() > 0.0 {
                    assert!(rel_frob(&(l * l.adjoint()), s) < 1e-10);
                }
            }
            assert!(max_im > 0.01 * max_abs, "{max_im} vs {max_abs}");
        }
    }

    #[test]
    fn model_json_round_trip_and_strictness() {
        let json = r#"{"d":2,"components":[{"family":"matern","variance":1.0,"kappa":0.5,"nu":1.0},
            {"family":"matern","variance":1.0,"kappa":0.5,"nu":1.0}],
            "cross":[{"i":0,"j":1,"rho":0.5,"delta":[5.0,0.0]}]}"#;
        let m: SpectrumModel = serde_json::from_str(json).unwrap();
        assert_eq!(m.p(), 2);
        assert_eq!(m.phase_lag(0, 1), [5.0, 0.0]);
        assert_eq!(m.phase_lag(1, 0), [-5.0, -0.0]);
        let back: SpectrumModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back.fingerprint(), m.fingerprint());
        let typo = json.replace("\"rho\"", "\"rh0\"");
        assert!(serde_json::from_str::<SpectrumModel>(&typo).is_err());
        let extra = json.replace("\"nu\":1.0}", "\"nu\":1.0,\"extra\":1}");
        assert!(serde_json::from_str::<SpectrumModel>(&extra).is_err());
    }
}
