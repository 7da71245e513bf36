//! Exact and empirical cross-covariances, and their asymmetry.
//!
//! Convention throughout: `C_ij(h) = Cov(x_i(s + h), x_j(s))`, lags in grid
//! units. With this convention `C_ij(h) = C_ji(-h)` for every stationary
//! field, while `C_ij(h) = C_ij(-h)` holds only for even cross-covariances.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::GridFft;
use crate::grid::{build_frequency_grid, GridSpec, Lag, Realization};
use crate::io::format_f64;
use crate::spectra::{discrete_spectrum, SpectrumModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovKind {
    Analytic,
    Empirical,
}

impl CovKind {
    pub fn name(self) -> &'static str {
        match self {
            CovKind::Analytic => "analytic",
            CovKind::Empirical => "empirical",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovMeta {
    pub grid: GridSpec,
    pub model_hash: Option<String>,
    pub replicates: usize,
}

/// Matrix-valued function `h ↦ C(h)` sampled on a set of integer lags.
#[derive(Clone, Debug)]
pub struct CrossCovariance {
    p: usize,
    lags: Vec<Lag>,
    /// `values[(l * p + i) * p + j]`
    values: Vec<f64>,
    /// Monte Carlo standard errors, same layout (empirical only).
    std_errors: Option<Vec<f64>>,
    kind: CovKind,
    meta: CovMeta,
    index: HashMap<Lag, usize>,
}

impl CrossCovariance {
    pub(crate) fn from_parts(
        p: usize,
        lags: Vec<Lag>,
        values: Vec<f64>,
        std_errors: Option<Vec<f64>>,
        kind: CovKind,
        meta: CovMeta,
    ) -> Self {
        let index = lags.iter().enumerate().map(|(k, l)| (*l, k)).collect();
        CrossCovariance { p, lags, values, std_errors, kind, meta, index }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn lags(&self) -> &[Lag] {
        &self.lags
    }

    pub fn kind(&self) -> CovKind {
        self.kind
    }

    pub fn meta(&self) -> &CovMeta {
        &self.meta
    }

    fn slot(&self, lag: Lag) -> Option<usize> {
        self.index.get(&lag).copied().or_else(|| {
            if self.meta.grid.is_periodic() {
                self.index.get(&self.meta.grid.canonical_lag(lag)).copied()
            } else {
                None
            }
        })
    }

    /// `C_ij(h)`, wrapping the lag on periodic grids.
    pub fn get(&self, i: usize, j: usize, lag: Lag) -> Option<f64> {
        self.slot(lag).map(|l| self.values[(l * self.p + i) * self.p + j])
    }

    pub fn std_error(&self, i: usize, j: usize, lag: Lag) -> Option<f64> {
        let se = self.std_errors.as_ref()?;
        self.slot(lag).map(|l| se[(l * self.p + i) * self.p + j])
    }

    /// `max |C_ij(h) - C_ji(-h)|` over stored lags whose negation is stored.
    pub fn symmetry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for &h in &self.lags {
            for i in 0..self.p {
                for j in 0..self.p {
                    if let (Some(a), Some(b)) = (self.get(i, j, h), self.get(j, i, [-h[0], -h[1]])) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        worst
    }

    /// CSV with columns `h0[,h1],i,j,value,kind`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let two_d = self.meta.grid.d() == 2;
        writeln!(out, "{}i,j,value,kind", if two_d { "h0,h1," } else { "h0," })?;
        for (l, lag) in self.lags.iter().enumerate() {
            for i in 0..self.p {
                for j in 0..self.p {
                    let v = self.values[(l * self.p + i) * self.p + j];
                    if two_d {
                        write!(out, "{},{},", lag[0], lag[1])?;
                    } else {
                        write!(out, "{},", lag[0])?;
                    }
                    writeln!(out, "{i},{j},{},{}", format_f64(v), self.kind.name())?;
                }
            }
        }
        Ok(())
    }
}

/// Exact cross-covariance of [`crate::simulate`] fields on `grid`: the inverse
/// FFT of the discretized spectrum, on every torus lag in `(-m/2, m/2]`.
pub fn analytic_cross_cov(model: &SpectrumModel, grid: &GridSpec) -> Result<CrossCovariance> {
    if !grid.is_periodic() {
        return Err(Error::InvalidParameter("analytic covariance needs a periodic grid".into()));
    }
    let freqs = build_frequency_grid(grid);
    let spectrum = discrete_spectrum(model, &freqs)?;
    let dw = freqs.cell_measure();
    let fft = GridFft::new(grid);
    let p = model.p();
    let n = grid.num_sites();
    let mut values = vec![0.0; n * p * p];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..p {
        for j in 0..p {
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = spectrum[k][(i, j)] * dw;
            }
            fft.inverse(&mut buf);
            for (l, v) in buf.iter().enumerate() {
                values[(l * p + i) * p + j] = v.re;
            }
        }
    }
    let lags = (0..n).map(|l| grid.canonical_lag(torus_lag(grid, l))).collect();
    let meta = CovMeta { grid: *grid, model_hash: Some(model.fingerprint()), replicates: 0 };
    Ok(CrossCovariance::from_parts(p, lags, values, None, CovKind::Analytic, meta))
}

fn torus_lag(grid: &GridSpec, index: usize) -> Lag {
    let [a, b] = grid.site_coords(index);
    [a as i64, b as i64]
}

/// Symmetric window of lags `|h_a| ≤ max_lag` (axis 1 fixed at 0 for `d = 1`).
fn lag_window(grid: &GridSpec, max_lag: usize) -> Vec<Lag> {
    let l = max_lag as i64;
    let range1 = if grid.d() == 2 { -l..=l } else { 0..=0 };
    let mut out = Vec::new();
    for a in -l..=l {
        for b in range1.clone() {
            out.push([a, b]);
        }
    }
    out
}

const BLOCK: usize = 16;

struct Partial {
    /// per ordered pair (i ≤ j) and raw lag slot
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    means: Vec<f64>,
}

impl Partial {
    fn zeros(pairs: usize, slots: usize, p: usize) -> Self {
        Partial { sum: vec![0.0; pairs * slots], sum_sq: vec![0.0; pairs * slots], means: vec![0.0; p] }
    }

    fn add(mut self, other: &Partial) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        for (a, b) in self.means.iter_mut().zip(&other.means) {
            *a += b;
        }
        self
    }
}

fn pairwise_sum(mut parts: Vec<Partial>) -> Partial {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.add(&b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one block")
}

/// Estimates `C_ij(h)` by averaging `x_i(s + h) x_j(s)` over replicates and
/// sites and subtracting the product of the pooled component means.
///
/// Periodic grids wrap the lag (computed by FFT); lattices average over the
/// site pairs that fit. Only one of `C_ij(h)` and `C_ji(-h)` is computed and
/// the other is copied, so the symmetry holds bit for bit. Replicates are
/// reduced in fixed blocks with pairwise summation, so the result does not
/// depend on the thread count.
pub fn empirical_cross_cov(realizations: &[Realization], max_lag: usize) -> Result<CrossCovariance> {
    if realizations.len() < 2 {
        return Err(Error::Inconsistent(format!("need at least 2 replicates, got {}", realizations.len())));
    }
    let first = &realizations[0];
    let (grid, p) = (first.grid, first.p);
    for r in realizations {
        if r.grid != grid || r.p != p || r.construction != first.construction {
            return Err(Error::Inconsistent(
                "realizations mix grids, component counts or constructions".into(),
            ));
        }
    }
    let [m0, m1] = grid.sizes();
    let limit = if grid.d() == 2 { m0.min(m1) } else { m0 } / 2;
    if max_lag > limit {
        return Err(Error::InvalidParameter(format!("max_lag {max_lag} exceeds m/2 = {limit}")));
    }
    let n = grid.num_sites();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect();
    let window = lag_window(&grid, max_lag);

    // Raw statistic slots: torus lags for periodic grids, window lags otherwise.
    let slots = if grid.is_periodic() { n } else { window.len() };
    let fft = grid.is_periodic().then(|| GridFft::new(&grid));

    let per_block = |block: &[Realization]| -> Partial {
        let mut part = Partial::zeros(pairs.len(), slots, p);
        let mut spectra = vec![vec![Complex64::new(0.0, 0.0); n]; p];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut stat = vec![0.0; slots];
        for r in block {
            for c in 0..p {
                part.means[c] += r.component(c).iter().sum::<f64>() / n as f64;
            }
            if let Some(fft) = &fft {
                for c in 0..p {
                    for (z, &x) in spectra[c].iter_mut().zip(r.component(c)) {
                        *z = Complex64::new(x, 0.0);
                    }
                    fft.forward(&mut spectra[c]);
                }
            }
            for (q, &(i, j)) in pairs.iter().enumerate() {
                match &fft {
                    Some(fft) => {
                        for (k, z) in buf.iter_mut().enumerate() {
                            *z = spectra[i][k] * spectra[j][k].conj();
                        }
                        fft.inverse(&mut buf);
                        let norm = 1.0 / (n as f64 * n as f64);
                        for (s, z) in stat.iter_mut().zip(&buf) {
                            *s = z.re * norm;
                        }
                    }
                    None => lattice_products(&grid, r.component(i), r.component(j), &window, &mut stat),
                }
                let base = q * slots;
                for (k, &s) in stat.iter().enumerate() {
                    part.sum[base + k] += s;
                    part.sum_sq[base + k] += s * s;
                }
            }
        }
        part
    };

    let parts: Vec<Partial> = realizations.par_chunks(BLOCK).map(per_block).collect();
    let total = pairwise_sum(parts);
    let reps = realizations.len() as f64;
    let means: Vec<f64> = total.means.iter().map(|m| m / reps).collect();

    let slot_of = |h: Lag| -> usize {
        if grid.is_periodic() {
            let a = h[0].rem_euclid(m0 as i64) as usize;
            let b = h[1].rem_euclid(m1 as i64) as usize;
            grid.site_index(a, b)
        } else {
            window.iter().position(|w| *w == h).expect("lag in window")
        }
    };
    let lag_pos: HashMap<Lag, usize> = window.iter().enumerate().map(|(k, l)| (*l, k)).collect();

    let mut values = vec![0.0; window.len() * p * p];
    let mut errors = vec![0.0; window.len() * p * p];
    for (a, &h) in window.iter().enumerate() {
        let b = lag_pos[&[-h[0], -h[1]]];
        let slot = slot_of(h);
        for (q, &(i, j)) in pairs.iter().enumerate() {
            if i == j && a > b {
                continue;
            }
            let s = total.sum[q * slots + slot];
            let s2 = total.sum_sq[q * slots + slot];
            let mean = s / reps;
            let var = ((s2 - reps * mean * mean) / (reps - 1.0)).max(0.0);
            let value = mean - means[i] * means[j];
            let se = (var / reps).sqrt();
            values[(a * p + i) * p + j] = value;
            values[(b * p + j) * p + i] = value;
            errors[(a * p + i) * p + j] = se;
            errors[(b * p + j) * p + i] = se;
        }
    }
    let meta = CovMeta { grid, model_hash: None, replicates: realizations.len() };
    Ok(CrossCovariance::from_parts(p, window, values, Some(errors), CovKind::Empirical, meta))
}

/// Per-replicate `mean_s x(s + h) y(s)` over pairs inside a non-periodic lattice.
fn lattice_products(grid: &GridSpec, x: &[f64], y: &[f64], window: &[Lag], out: &mut [f64]) {
    let [m0, m1] = grid.sizes();
    for (k, h) in window.iter().enumerate() {
        let (mut acc, mut count) = (0.0, 0usize);
        for s0 in 0..m0 as i64 {
            let t0 = s0 + h[0];
            if t0 < 0 || t0 >= m0 as i64 {
                continue;
            }
            for s1 in 0..m1 as i64 {
                let t1 = s1 + h[1];
                if t1 < 0 || t1 >= m1 as i64 {
                    continue;
                }
                acc += x[grid.site_index(t0 as usize, t1 as usize)] * y[grid.site_index(s0 as usize, s1 as usize)];
                count += 1;
            }
        }
        out[k] = if count > 0 { acc / count as f64 } else { 0.0 };
    }
}

/// `max_h |C_ij(h) - C_ij(-h)| / max_h |C_ij(h)|`; zero for even
/// cross-covariances, and unchanged by swapping `i` and `j`.
pub fn asymmetry_index(cov: &CrossCovariance, i: usize, j: usize) -> Result<f64> {
    if cov.p() < 2 {
        return Err(Error::InvalidParameter("asymmetry index needs p >= 2".into()));
    }
    if i >= cov.p() || j >= cov.p() {
        return Err(Error::InvalidParameter(format!("component index out of range for p = {}", cov.p())));
    }
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for &h in cov.lags() {
        let Some(v) = cov.get(i, j, h) else { continue };
        den = den.max(v.abs());
        if let Some(w) = cov.get(i, j, [-h[0], -h[1]]) {
            num = num.max((v - w).abs());
        }
    }
    if den == 0.0 {
        return Err(Error::UndefinedIndex(format!("cross-covariance ({i}, {j}) is identically zero")));
    }
    Ok(num / den)
}

/// The fixed set of 25 probe lags used to compare estimators: the origin
/// plus, at radii {1, 5, 10, m/4}, the four axis directions and the two
/// diagonals `(r, r)`, `(r, -r)` (`d = 2`); `0, ±1, …, ±12` scaled into
/// `m/4` for `d = 1`.
pub fn probe_lags(grid: &GridSpec) -> Vec<Lag> {
    let [m0, m1] = grid.sizes();
    if grid.d() == 1 {
        let top = (m0 / 4).max(1) as i64;
        let mut out = vec![[0, 0]];
        for k in 1..=12i64 {
            let r = ((k * top) as f64 / 12.0).round().max(1.0) as i64;
            out.push([r, 0]);
            out.push([-r, 0]);
        }
        return out;
    }
    let top = (m0.min(m1) / 4).max(1) as i64;
    let mut radii = [1i64, 5, 10, top];
    for r in radii.iter_mut() {
        *r = (*r).min(top);
    }
    let mut out = vec![[0, 0]];
    for r in radii {
        out.extend_from_slice(&[[r, 0], [-r, 0], [0, r], [0, -r], [r, r], [r, -r]]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Construction;
    use crate::quadrature::tanh_sinh;
    use crate::simulate::sample_batch;
    use crate::spectra::{ComponentSpec, CrossSpec, MaternParams, SqrtMethod};
    use std::f64::consts::PI;

    fn matern(v: f64, k: f64, nu: f64) -> ComponentSpec {
        ComponentSpec::Matern(MaternParams::new(v, k, nu).unwrap())
    }

    fn lagged(d: usize, rho: f64, delta: Vec<f64>) -> SpectrumModel {
        SpectrumModel::new(
            d,
            vec![matern(1.0, 0.5, 1.0), matern(1.0, 0.5, 1.0)],
            vec![CrossSpec { i: 0, j: 1, rho, delta }],
        )
        .unwrap()
    }

    #[test]
    fn white_model_is_a_delta() {
        let g = GridSpec::periodic(&[16, 16], 1.0).unwrap();
        let m = SpectrumModel::new(
            2,
            vec![ComponentSpec::BandLimitedWhite { variance: 2.0, cutoff: PI }],
            vec![],
        )
        .unwrap();
        let c = analytic_cross_cov(&m, &g).unwrap();
        for &h in c.lags() {
            let v = c.get(0, 0, h).unwrap();
            let expect = if h == [0, 0] { 2.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-12, "{h:?} {v}");
        }
    }

    #[test]
    fn proportional_cross_covariance_without_lag() {
        let g = GridSpec::periodic(&[32, 32], 1.0).unwrap();
        let c = analytic_cross_cov(&lagged(2, 0.5, vec![0.0, 0.0]), &g).unwrap();
        for &h in c.lags() {
            let a = c.get(0, 1, h).unwrap();
            let b = c.get(0, 0, h).unwrap();
            assert!((a - 0.5 * b).abs() < 1e-12);
        }
        assert!(c.get(0, 0, [0, 0]).unwrap() > 0.0);
        assert!(c.symmetry_residual() < 1e-10);
    }

    #[test]
    fn lagged_cross_covariance_peaks_at_delta_and_matches_quadrature() {
        let g = GridSpec::periodic(&[64], 1.0).unwrap();
        let model = lagged(1, 0.5, vec![5.0]);
        let c = analytic_cross_cov(&model, &g).unwrap();
        let (argmax, _) = c
            .lags()
            .iter()
            .map(|h| (h[0], c.get(0, 1, *h).unwrap()))
            .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert_eq!(argmax, 5);

        // continuum oracle ∫ ρ e^{-iωδ} sqrt(f1 f2) e^{iωh} dω; the periodized
        // discrete version differs by the aliasing of the Matérn tail
        let f = model.components()[0];
        let oracle = |h: f64| -> f64 {
            2.0 * tanh_sinh(|w, _, _| 0.5 * f.eval(&[w]) * (w * (h - 5.0)).cos(), 0.0, 400.0, 1e-12)
        };
        let continuum: Vec<f64> = (-10..=20).map(|h| oracle(h as f64)).collect();
        let peak = (-10..=20).zip(&continuum).fold((0, f64::MIN), |a, (h, v)| if *v > a.1 { (h, *v) } else { a });
        assert_eq!(peak.0, 5);
        for (h, v) in (-10..=20).zip(&continuum) {
            let disc = c.get(0, 1, [h, 0]).unwrap();
            assert!((disc - v).abs() < 0.02, "h={h}: {disc} vs {v}");
        }
    }

    #[test]
    fn asymmetry_of_lagged_and_unlagged_models() {
        let g = GridSpec::periodic(&[64, 64], 1.0).unwrap();
        let even = analytic_cross_cov(&lagged(2, 0.5, vec![0.0, 0.0]), &g).unwrap();
        assert!(asymmetry_index(&even, 0, 1).unwrap() <= 1e-10);
        let odd = analytic_cross_cov(&lagged(2, 0.5, vec![5.0, 0.0]), &g).unwrap();
        let a = asymmetry_index(&odd, 0, 1).unwrap();
        assert!(a > 0.5, "{a}");
        assert!((a - asymmetry_index(&odd, 1, 0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn asymmetry_of_zero_cross_covariance_is_undefined() {
        let g = GridSpec::periodic(&[16], 1.0).unwrap();
        let c = analytic_cross_cov(&lagged(1, 0.0, vec![0.0]), &g).unwrap();
        assert!(matches!(asymmetry_index(&c, 0, 1), Err(Error::UndefinedIndex(_))));
    }

    fn brute_force(rs: &[Realization], i: usize, j: usize, h: Lag) -> f64 {
        let g = rs[0].grid;
        let n = g.num_sites();
        let reps = rs.len() as f64;
        let mean = |c: usize| rs.iter().map(|r| r.component(c).iter().sum::<f64>()).sum::<f64>() / (reps * n as f64);
        let mut acc = 0.0;
        for r in rs {
            for s in 0..n {
                acc += r.component(i)[g.shifted(s, h)] * r.component(j)[s];
            }
        }
        acc / (reps * n as f64) - mean(i) * mean(j)
    }

    #[test]
    fn fft_estimator_matches_direct_sums() {
        let g = GridSpec::periodic(&[8, 16], 1.0).unwrap();
        let rs = sample_batch(&lagged(2, 0.4, vec![1.0, -2.0]), &g, 8, 5, SqrtMethod::Hermitian).unwrap();
        let c = empirical_cross_cov(&rs, 4).unwrap();
        assert_eq!(c.symmetry_residual(), 0.0);
        for &h in c.lags() {
            for i in 0..2 {
                for j in 0..2 {
                    let bf = brute_force(&rs, i, j, h);
                    assert!((c.get(i, j, h).unwrap() - bf).abs() < 1e-12, "{h:?} {i}{j}");
                }
            }
        }
    }

    #[test]
    fn zero_fields_give_zero_covariance() {
        let g = GridSpec::periodic(&[8], 1.0).unwrap();
        let z = Realization::new(g, 1, vec![0.0; 8], 0, 0, Construction::Spectral).unwrap();
        let c = empirical_cross_cov(&[z.clone(), z], 4).unwrap();
        assert!(c.lags().iter().all(|&h| c.get(0, 0, h) == Some(0.0)));
    }

    #[test]
    fn inconsistent_inputs_rejected() {
        let g8 = GridSpec::periodic(&[8], 1.0).unwrap();
        let g16 = GridSpec::periodic(&[16], 1.0).unwrap();
        let a = Realization::new(g8, 1, vec![1.0; 8], 0, 0, Construction::Spectral).unwrap();
        let b = Realization::new(g16, 1, vec![1.0; 16], 0, 1, Construction::Spectral).unwrap();
        let c = Realization::new(g8, 1, vec![1.0; 8], 0, 1, Construction::Convolution).unwrap();
        assert!(matches!(empirical_cross_cov(&[a.clone(), b], 2), Err(Error::Inconsistent(_))));
        assert!(matches!(empirical_cross_cov(&[a.clone(), c], 2), Err(Error::Inconsistent(_))));
        assert!(matches!(empirical_cross_cov(&[a.clone()], 2), Err(Error::Inconsistent(_))));
        assert!(empirical_cross_cov(&[a.clone(), a], 5).is_err());
    }

    #[test]
    fn lattice_estimator_is_exactly_symmetric() {
        let g = GridSpec::lattice(&[6, 5], 1.0).unwrap();
        let rs: Vec<Realization> = (0..3)
            .map(|r| {
                let v = (0..60).map(|k| ((k * 7 + r * 13) as f64).sin()).collect();
                Realization::new(g, 2, v, 0, r as u32, Construction::Markov).unwrap()
            })
            .collect();
        let c = empirical_cross_cov(&rs, 2).unwrap();
        assert_eq!(c.symmetry_residual(), 0.0);
    }

    #[test]
    fn probe_lags_are_fixed() {
        let g = GridSpec::periodic(&[64, 64], 1.0).unwrap();
        let lags = probe_lags(&g);
        assert_eq!(lags.len(), 25);
        assert!(lags.contains(&[5, 0]) && lags.contains(&[-5, 0]) && lags.contains(&[16, -16]));
        let mut uniq = lags.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 25);
        let g1 = GridSpec::periodic(&[64], 1.0).unwrap();
        assert_eq!(probe_lags(&g1).len(), 25);
    }

    #[test]
    fn csv_has_expected_columns() {
        let g = GridSpec::periodic(&[8], 1.0).unwrap();
        let c = analytic_cross_cov(&lagged(1, 0.5, vec![1.0]), &g).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("h0,i,j,value,kind"));
        assert_eq!(text.lines().count(), 1 + 8 * 4);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        assert_eq!(row[4], "analytic");
        let v: f64 = row[3].parse().unwrap();
        assert_eq!(v, c.get(0, 0, [0, 0]).unwrap());
    }
}
