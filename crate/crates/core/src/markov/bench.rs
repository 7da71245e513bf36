//! Wall-clock scaling of dense versus sparse Cholesky factorization.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;

use super::order::nested_dissection_order;
use super::sparse::{SparseCholesky, SparseOperator};
use super::{assemble_component_precision, couple_components};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::format_f64;

/// Largest dense system (`p · n`) that is timed; larger rows report NaN.
pub const DENSE_CAP: usize = 4096;

const BENCH_KAPPA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchPath {
    Dense,
    Sparse,
}

impl BenchPath {
    pub fn name(self) -> &'static str {
        match self {
            BenchPath::Dense => "dense",
            BenchPath::Sparse => "sparse",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub n: usize,
    pub p: usize,
    pub path: BenchPath,
    pub median_seconds: f64,
    pub factor_nonzeros: usize,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Slope of log time against log `p·n` over the timed dense rows.
    pub dense_slope: Option<f64>,
    /// Slope of log time against log `n` over the sparse rows.
    pub sparse_slope: Option<f64>,
}

impl BenchReport {
    /// CSV columns `n,p,path,median_seconds,factor_nonzeros`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,p,path,median_seconds,factor_nonzeros")?;
        for r in &self.rows {
            let t = if r.median_seconds.is_nan() { "NaN".to_string() } else { format_f64(r.median_seconds) };
            writeln!(out, "{},{},{},{},{}", r.n, r.p, r.path.name(), t, r.factor_nonzeros)?;
        }
        Ok(())
    }
}

/// Near-square 2-D lattice with exactly `n` sites: `a × n/a` with `a` the
/// largest divisor of `n` not above `sqrt(n)`.
pub fn bench_lattice(n: usize) -> Result<GridSpec> {
    if n == 0 {
        return Err(Error::InvalidParameter("benchmark size must be positive".into()));
    }
    let mut a = (n as f64).sqrt().floor() as usize;
    while n % a != 0 {
        a -= 1;
    }
    GridSpec::lattice(&[a, n / a], 1.0)
}

/// Coupled `p`-component precision on [`bench_lattice`]`(n)`.
pub fn bench_precision(n: usize, p: usize) -> Result<SparseOperator> {
    let grid = bench_lattice(n)?;
    let comp = assemble_component_precision(BENCH_KAPPA, 1.0, &grid)?;
    let t = DMatrix::from_fn(p, p, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Greater => 0.5,
        std::cmp::Ordering::Less => 0.0,
    });
    let comps = vec![comp; p];
    Ok(couple_components(&grid, &comps, &t)?.q().clone())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Median seconds of symbolic plus numeric factorization, after one
/// untimed warm-up run.
pub fn time_sparse(q: &SparseOperator, perm: &[usize], reps: usize) -> Result<(f64, usize)> {
    let nnz = SparseCholesky::factorize(q, perm)?.nnz();
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let f = SparseCholesky::factorize(q, perm)?;
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(f.nnz());
    }
    Ok((median(times), nnz))
}

/// Median seconds of a dense Cholesky factorization.
pub fn time_dense(q: &DMatrix<f64>, reps: usize) -> Result<f64> {
    let check = q.clone().cholesky().ok_or(Error::NotPositiveDefinite { index: 0, pivot: f64::NAN })?;
    std::hint::black_box(check.l_dirty()[(0, 0)]);
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let m = q.clone();
        let start = Instant::now();
        let c = m.cholesky();
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(c.map(|c| c.l_dirty()[(0, 0)]));
    }
    Ok(median(times))
}

/// Least-squares slope of `log y` on `log x` over finite positive pairs.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Times dense and sparse factorization of the benchmark precision for each
/// site count in `sizes` (ascending). Dense rows with `p · n` above
/// [`DENSE_CAP`] are reported with NaN time and not timed.
pub fn bench_scaling(sizes: &[usize], p: usize, repetitions: usize) -> Result<BenchReport> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("sizes must be non-empty and strictly ascending".into()));
    }
    if p == 0 || repetitions == 0 {
        return Err(Error::InvalidParameter("p and repetitions must be positive".into()));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let q = bench_precision(n, p)?;
        let grid = bench_lattice(n)?;
        let dim = p * n;
        let dense_time = if dim <= DENSE_CAP { time_dense(&q.to_dense(), repetitions)? } else { f64::NAN };
        rows.push(BenchRow { n, p, path: BenchPath::Dense, median_seconds: dense_time, factor_nonzeros: dim * (dim + 1) / 2 });
        let perm = nested_dissection_order(&grid, p);
        let (t, nnz) = time_sparse(&q, &perm, repetitions)?;
        rows.push(BenchRow { n, p, path: BenchPath::Sparse, median_seconds: t, factor_nonzeros: nnz });
    }
    let slope = |path: BenchPath| {
        let sel: Vec<&BenchRow> = rows.iter().filter(|r| r.path == path).collect();
        let xs: Vec<f64> = sel.iter().map(|r| (r.p * r.n) as f64).collect();
        let ys: Vec<f64> = sel.iter().map(|r| r.median_seconds).collect();
        fit_loglog_slope(&xs, &ys)
    };
    let (dense_slope, sparse_slope) = (slope(BenchPath::Dense), slope(BenchPath::Sparse));
    Ok(BenchReport { rows, dense_slope, sparse_slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_shapes() {
        assert_eq!(bench_lattice(1024).unwrap().sizes(), [32, 32]);
        assert_eq!(bench_lattice(2048).unwrap().sizes(), [32, 64]);
        assert_eq!(bench_lattice(65536).unwrap().sizes(), [256, 256]);
        assert_eq!(bench_lattice(7).unwrap().sizes(), [1, 7]);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((fit_loglog_slope(&xs, &ys).unwrap() - 1.5).abs() < 1e-12);
        assert!(fit_loglog_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn small_bench_table_has_two_rows_per_size() {
        let report = bench_scaling(&[64, 256], 2, 1).unwrap();
        assert_eq!(report.rows.len(), 4);
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("n,p,path,median_seconds,factor_nonzeros\n64,2,dense,"));
        assert!(bench_scaling(&[256, 64], 1, 1).is_err());
    }

    #[test]
    fn oversized_dense_rows_are_nan() {
        let report = bench_scaling(&[2304], 2, 1).unwrap();
        assert!(report.rows[0].median_seconds.is_nan());
        assert!(report.rows[1].median_seconds.is_finite());
    }
}
