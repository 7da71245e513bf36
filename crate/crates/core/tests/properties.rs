use mvgrf::convolution::{implied_cross_cov, KernelShape, KernelSpec};
use mvgrf::covariance::{analytic_cross_cov, asymmetry_index, empirical_cross_cov, probe_lags};
use mvgrf::io::{decode_field, encode_field, format_f64};
use mvgrf::likelihood::{
    dense_loglik, fd_gradient_check, simulate_observations, sparse_loglik, LikelihoodProblem, ModelFamily,
};
use mvgrf::markov::{assemble_component_precision, couple_components, PrecisionModel, MarkovComponent, MarkovParams};
use mvgrf::simulate::sample_field;
use mvgrf::spectra::{spectral_sqrt, validate_hermitian_psd, CMatrix};
use mvgrf::{ComponentSpec, Construction, CrossSpec, GridSpec, MaternParams, Realization, SpectrumModel, SqrtMethod};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

/// Correlation matrix from unit vectors: PSD by construction.
fn correlation(vectors: &[Vec<f64>]) -> DMatrix<f64> {
    let unit: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            v.iter().map(|x| x / n).collect()
        })
        .collect();
    let p = unit.len();
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0)
        }
    })
}

#[derive(Clone, Debug)]
struct ModelDraw {
    d: usize,
    comps: Vec<(f64, f64, f64)>,
    directions: Vec<Vec<f64>>,
    /// Per-component shifts; pair lags are their differences.
    shifts: Vec<[f64; 2]>,
}

impl ModelDraw {
    fn build(&self) -> SpectrumModel {
        let p = self.comps.len();
        let r = correlation(&self.directions);
        let components = self
            .comps
            .iter()
            .map(|&(v, k, nu)| ComponentSpec::Matern(MaternParams::new(v, k, nu).unwrap()))
            .collect();
        let mut cross = Vec::new();
        for i in 0..p {
            for j in i + 1..p {
                let delta = (0..self.d).map(|a| self.shifts[i][a] - self.shifts[j][a]).collect();
                cross.push(CrossSpec { i, j, rho: r[(i, j)], delta });
            }
        }
        SpectrumModel::new(self.d, components, cross).unwrap()
    }
}

fn model_draw(max_p: usize) -> impl Strategy<Value = ModelDraw> {
    (1usize..=2, 1usize..=max_p).prop_flat_map(|(d, p)| {
        (
            Just(d),
            prop::collection::vec((0.2f64..5.0, 0.3f64..3.0, 0.3f64..2.5), p),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, p), p),
            prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0).prop_map(|(a, b)| [a, b]), p),
        )
            .prop_map(|(d, comps, directions, shifts)| ModelDraw { d, comps, directions, shifts })
    })
}

fn random_psd(p: usize, rank: usize, entries: &[(f64, f64)]) -> CMatrix {
    let b = CMatrix::from_fn(p, rank, |i, j| {
        let (re, im) = entries[i * rank + j];
        Complex64::new(re, im)
    });
    &b * b.adjoint()
}

fn psd_draw() -> impl Strategy<Value = CMatrix> {
    prop::sample::select(vec![1usize, 2, 3, 5]).prop_flat_map(|p| {
        (1..=p).prop_flat_map(move |rank| {
            prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), p * rank)
                .prop_map(move |e| random_psd(p, rank, &e))
        })
    })
}

fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn model_spectra_are_hermitian_psd(draw in model_draw(4), w in prop::array::uniform2(-20.0f64..20.0)) {
        let model = draw.build();
        let omega = &w[..draw.d];
        let s = model.cross_spectral_matrix(omega).unwrap();
        let diag = validate_hermitian_psd(&s, 1e-10).unwrap();
        prop_assert!(diag.ok, "{diag:?}");
    }

    #[test]
    fn spectrum_at_negative_frequency_is_conjugate(draw in model_draw(4), w in prop::array::uniform2(-20.0f64..20.0)) {
        let model = draw.build();
        let omega = &w[..draw.d];
        let neg: Vec<f64> = omega.iter().map(|v| -v).collect();
        let s = model.cross_spectral_matrix(omega).unwrap();
        let t = model.cross_spectral_matrix(&neg).unwrap();
        for (a, b) in s.iter().zip(t.iter()) {
            prop_assert_eq!(*a, b.conj());
        }
    }

    #[test]
    fn exchange_leaves_the_asymmetry_index_unchanged(draw in model_draw(3)) {
        prop_assume!(draw.comps.len() >= 2);
        let model = draw.build();
        let grid = if draw.d == 1 { GridSpec::periodic(&[32], 0.5).unwrap() } else { GridSpec::periodic(&[16, 16], 0.5).unwrap() };
        let cov = analytic_cross_cov(&model, &grid).unwrap();
        let p = model.p();
        for i in 0..p {
            for j in 0..p {
                if i == j {
                    continue;
                }
                match (asymmetry_index(&cov, i, j), asymmetry_index(&cov, j, i)) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}"),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sqrt_reconstructs_random_psd_matrices(s in psd_draw()) {
        for method in [SqrtMethod::LowerTriangular, SqrtMethod::Hermitian] {
            let l = spectral_sqrt(&s, method).unwrap();
            let err = rel_frobenius(&(&l * l.adjoint()), &s);
            prop_assert!(err <= 1e-10, "{method:?}: {err:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sqrt_methods_differ_when_off_diagonals_are_complex(s in psd_draw()) {
        let p = s.nrows();
        let complex = (0..p).any(|i| (0..i).any(|j| s[(i, j)].im.abs() > 1e-3 * s.norm()));
        prop_assume!(p >= 2 && complex);
        let lower = spectral_sqrt(&s, SqrtMethod::LowerTriangular).unwrap();
        let herm = spectral_sqrt(&s, SqrtMethod::Hermitian).unwrap();
        prop_assert!((&lower - &herm).norm() > 1e-6 * s.norm().sqrt());
        let a = &lower * lower.adjoint();
        let b = &herm * herm.adjoint();
        prop_assert!(rel_frobenius(&a, &b) <= 2e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn spectral_fields_are_real(draw in model_draw(3), seed in any::<u64>(), hermitian in any::<bool>()) {
        let model = draw.build();
        let grid = if draw.d == 1 { GridSpec::periodic(&[64], 0.25).unwrap() } else { GridSpec::periodic(&[16, 8], 0.5).unwrap() };
        let method = if hermitian { SqrtMethod::Hermitian } else { SqrtMethod::LowerTriangular };
        // the sampler rejects an imaginary residual above 1e-8 × field std
        let r = sample_field(&model, &grid, seed, 0, method).unwrap();
        prop_assert!(r.values.iter().all(|v| v.is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_covariance_is_a_psd_operator(draw in model_draw(3)) {
        let model = draw.build();
        let grid = if draw.d == 1 { GridSpec::periodic(&[16], 0.5).unwrap() } else { GridSpec::periodic(&[8, 8], 0.5).unwrap() };
        let cov = analytic_cross_cov(&model, &grid).unwrap();
        let (p, n) = (model.p(), grid.num_sites());
        let big = DMatrix::from_fn(p * n, p * n, |r, c| {
            let (i, s, j, t) = (r / n, r % n, c / n, c % n);
            cov.get(i, j, grid.displacement(t, s)).unwrap()
        });
        let sym = (&big - big.transpose()).amax();
        prop_assert!(sym < 1e-12 * big.amax(), "asymmetric block-circulant operator: {sym:e}");
        let min = big.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-8, "{min:e}");
    }

    #[test]
    fn kernel_scaling_is_quadratic(width in 0.3f64..2.0, c in -4.0f64..4.0, b in prop::collection::vec(-1.5f64..1.5, 4)) {
        let grid = GridSpec::periodic(&[16, 16], 0.5).unwrap();
        let mixing = DMatrix::from_row_slice(2, 2, &b);
        let kernel = KernelSpec::new(2, KernelShape::GaussianBump { width, support: None }, mixing).unwrap();
        let lags = probe_lags(&grid);
        let base = implied_cross_cov(&kernel, &grid, &lags).unwrap();
        let scaled = implied_cross_cov(&kernel.scaled(c), &grid, &lags).unwrap();
        let peak = lags.iter().flat_map(|&h| (0..4).map(move |k| (h, k))).map(|(h, k)| base.get(k / 2, k % 2, h).unwrap().abs()).fold(0.0, f64::max);
        for &h in &lags {
            for i in 0..2 {
                for j in 0..2 {
                    let want = c * c * base.get(i, j, h).unwrap();
                    let got = scaled.get(i, j, h).unwrap();
                    prop_assert!((got - want).abs() <= 1e-12 * c * c * peak.max(1.0), "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn empirical_covariance_is_exactly_symmetric(
        periodic in any::<bool>(),
        values in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2 * 64), 2..5),
    ) {
        let grid = if periodic { GridSpec::periodic(&[8, 8], 1.0).unwrap() } else { GridSpec::lattice(&[8, 8], 1.0).unwrap() };
        let construction = if periodic { Construction::Spectral } else { Construction::Markov };
        let reps: Vec<Realization> = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| Realization::new(grid, 2, v, 1, k as u32, construction).unwrap())
            .collect();
        let cov = empirical_cross_cov(&reps, 3).unwrap();
        for &h in cov.lags() {
            for i in 0..2 {
                for j in 0..2 {
                    let a = cov.get(i, j, h).unwrap();
                    let b = cov.get(j, i, [-h[0], -h[1]]).unwrap();
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn field_files_round_trip(
        two_d in any::<bool>(),
        p in 1usize..4,
        seed in any::<u64>(),
        replicate in any::<u32>(),
        tag in 0u8..3,
        raw in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3 * 8 * 16),
    ) {
        let construction = Construction::from_tag(tag).unwrap();
        let sizes: &[usize] = if two_d { &[8, 16] } else { &[8] };
        let grid = if construction == Construction::Markov { GridSpec::lattice(sizes, 0.3).unwrap() } else { GridSpec::periodic(sizes, 0.3).unwrap() };
        let values = raw[..p * grid.num_sites()].to_vec();
        let r = Realization::new(grid, p, values, seed, replicate, construction).unwrap();
        let back = decode_field(&encode_field(&r)).unwrap();
        prop_assert_eq!(back.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), r.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(back, r);
    }

    #[test]
    fn csv_numbers_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let s = format_f64(v);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn sparse_factor_reproduces_the_permuted_precision(
        two_d in any::<bool>(),
        m in 8usize..20,
        kappa in 0.2f64..5.0,
        variances in prop::collection::vec(0.3f64..3.0, 1..3),
        t10 in -1.0f64..1.0,
    ) {
        let sizes: Vec<usize> = if two_d { vec![m, m] } else { vec![4 * m] };
        let p = variances.len();
        let coupling = (p == 2).then(|| vec![vec![1.0, 0.0], vec![t10, 1.0]]);
        let params = MarkovParams {
            sizes,
            spacing: 0.5,
            components: variances.iter().map(|&variance| MarkovComponent { kappa, variance }).collect(),
            coupling,
            margin: Some(2),
        };
        let model = PrecisionModel::from_params(&params).unwrap();
        let f = model.factor();
        let l = f.factor_dense();
        let q = model.q().to_dense();
        let perm = f.perm();
        let pqp = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(perm[i], perm[j])]);
        let err = (&l * l.transpose() - &pqp).norm();
        prop_assert!(err <= 1e-8 * q.norm(), "{err:e}");
    }

    #[test]
    fn identity_coupling_is_block_diagonal(
        m in 8usize..14,
        kappas in prop::collection::vec(0.3f64..4.0, 2..4),
        taus in prop::collection::vec(0.5f64..3.0, 4),
    ) {
        let grid = GridSpec::lattice(&[m, m], 0.5).unwrap();
        let n = grid.num_sites();
        let p = kappas.len();
        let comps: Vec<_> = kappas.iter().zip(&taus).map(|(&k, &t)| assemble_component_precision(k, t, &grid).unwrap()).collect();
        let model = couple_components(&grid, &comps, &DMatrix::identity(p, p)).unwrap();
        let q = model.q();
        prop_assert_eq!(q.nnz(), comps.iter().map(|c| c.nnz()).sum::<usize>());
        for (r, c, v) in q.triplets() {
            prop_assert_eq!(r / n, c / n);
            prop_assert_eq!(v.to_bits(), comps[r / n].get(r % n, c % n).to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn dense_and_sparse_likelihoods_agree(
        two_d in any::<bool>(),
        m in 8usize..16,
        theta_true in (-1.0f64..1.0, 0.0f64..1.5),
        theta in (-1.5f64..1.5, -0.5f64..2.0),
        seed in any::<u64>(),
    ) {
        let grid = if two_d { GridSpec::lattice(&[m, m], 0.1).unwrap() } else { GridSpec::lattice(&[3 * m], 0.1).unwrap() };
        let truth = [theta_true.0, theta_true.1];
        let y = simulate_observations(grid, ModelFamily::Markov, truth, seed, 0).unwrap();
        let problem = LikelihoodProblem::new(grid, y, ModelFamily::Markov).unwrap();
        let theta = [theta.0, theta.1];
        let dense = dense_loglik(&problem, theta).unwrap();
        let sparse = sparse_loglik(&problem, theta).unwrap();
        prop_assert!((dense - sparse).abs() <= 1e-6 * dense.abs(), "{dense} vs {sparse}");
    }

    #[test]
    fn analytic_gradient_matches_differences(
        markov in any::<bool>(),
        n in 15usize..40,
        nu in 0.4f64..2.5,
        // κ·extent ≥ 5: longer ranges make the covariance nearly singular and
        // the difference quotient, not the gradient, the noisy side
        theta_true in (-0.5f64..0.5, 2.1f64..3.5),
        offset in (-0.5f64..0.5, -0.5f64..0.5),
        seed in any::<u64>(),
    ) {
        let family = if markov { ModelFamily::Markov } else { ModelFamily::Matern { nu } };
        let grid = GridSpec::lattice(&[n], 1.0 / n as f64).unwrap();
        let truth = [theta_true.0, theta_true.1];
        let y = simulate_observations(grid, family, truth, seed, 0).unwrap();
        let problem = LikelihoodProblem::new(grid, y, family).unwrap();
        let theta = [truth[0] + offset.0, truth[1] + offset.1];
        let err = fd_gradient_check(&problem, theta, 1e-4).unwrap();
        prop_assert!(err < 1e-5, "{err:e}");
    }
}

#[test]
fn inconsistent_phase_lags_can_break_definiteness() {
    // R is PSD, but the lags around the cycle 0 → 1 → 2 do not add up, so
    // R ∘ exp(-iω·δ) is frustrated at some frequencies.
    let comps = vec![ComponentSpec::Matern(MaternParams::new(1.0, 1.0, 1.0).unwrap()); 3];
    let cross = vec![
        CrossSpec { i: 0, j: 1, rho: 0.9, delta: vec![1.0] },
        CrossSpec { i: 1, j: 2, rho: 0.9, delta: vec![1.0] },
        CrossSpec { i: 0, j: 2, rho: 0.9, delta: vec![-1.0] },
    ];
    let model = SpectrumModel::new(1, comps, cross).unwrap();
    let s = model.cross_spectral_matrix(&[std::f64::consts::FRAC_PI_3]).unwrap();
    let diag = validate_hermitian_psd(&s, 1e-10).unwrap();
    assert!(!diag.ok && diag.min_eigenvalue < 0.0, "{diag:?}");
    assert!(spectral_sqrt(&s, SqrtMethod::LowerTriangular).is_err());
    let grid = GridSpec::periodic(&[64], 0.25).unwrap();
    let err = sample_field(&model, &grid, 0, 0, SqrtMethod::Hermitian).unwrap_err();
    assert!(err.is_numerical(), "{err}");
}
