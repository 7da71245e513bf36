//! Modified Bessel function of the second kind `K_ν(x)` for real `ν ≥ 0`.
//!
//! Temme's series for `x < 2` and Steed's continued fraction otherwise give
//! `K_μ` and `K_{μ+1}` with `|μ| ≤ 1/2`; upward recurrence reaches `ν`.

use std::f64::consts::PI;

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

/// Taylor coefficients of `1/Γ(z) = Σ_{k≥1} A[k-1] z^k`.
const RGAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// `(γ₁, γ₂, 1/Γ(1+μ), 1/Γ(1-μ))` with
/// `γ₁ = (1/Γ(1-μ) - 1/Γ(1+μ)) / 2μ`, `γ₂ = (1/Γ(1-μ) + 1/Γ(1+μ)) / 2`,
/// summed by parity so that nothing cancels near `μ = 0`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mu2 = mu * mu;
    let (mut g1, mut g2) = (0.0, 0.0);
    let mut pow = 1.0;
    for k in 0..RGAMMA.len() / 2 {
        g2 += RGAMMA[2 * k] * pow;
        g1 -= RGAMMA[2 * k + 1] * pow;
        pow *= mu2;
    }
    (g1, g2, g2 - mu * g1, g2 + mu * g1)
}

/// `(K_ν(x), K_{ν+1}(x))` for `x > 0`, `ν ≥ 0`.
pub fn bessel_k_pair(nu: f64, x: f64) -> (f64, f64) {
    assert!(x > 0.0 && nu >= 0.0, "bessel_k_pair needs x > 0 and ν ≥ 0");
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut k_mu, mut k_mu1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        k_mu = sum;
        k_mu1 = sum1 * xi2;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let (mut q1, mut q2) = (0.0, 1.0);
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        k_mu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        k_mu1 = k_mu * (mu + x + 0.5 - h) * xi;
    }
    for i in 1..=nl {
        let next = (mu + i as f64) * xi2 * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    (k_mu, k_mu1)
}

pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_pair(nu, x).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::tanh_sinh;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn half_integer_closed_forms() {
        for &x in &[0.01, 0.3, 1.0, 1.99, 2.0, 5.0, 30.0] {
            let base = (PI / (2.0 * x)).sqrt() * (-x).exp();
            let (k12, k32) = bessel_k_pair(0.5, x);
            assert!(rel(k12, base) < 1e-14, "x={x}");
            assert!(rel(k32, base * (1.0 + 1.0 / x)) < 1e-14, "x={x}");
            let k52 = bessel_k(2.5, x);
            assert!(rel(k52, base * (1.0 + 3.0 / x + 3.0 / (x * x))) < 1e-13, "x={x}");
        }
    }

    #[test]
    fn tabulated_integer_orders() {
        let cases = [
            (0.0, 0.1, 2.427_069_024_702_016_6),
            (1.0, 0.1, 9.853_844_780_870_606),
            (0.0, 1.0, 0.421_024_438_240_708_34),
            (1.0, 1.0, 0.601_907_230_197_234_6),
            (0.0, 5.0, 0.003_691_098_334_042_594),
            (1.0, 5.0, 0.004_044_613_445_452_164),
            (2.0, 1.0, 1.624_838_898_635_177_5),
        ];
        for (nu, x, want) in cases {
            assert!(rel(bessel_k(nu, x), want) < 1e-13, "K_{nu}({x})");
        }
    }

    #[test]
    fn matches_integral_representation() {
        // K_ν(x) = ∫_0^∞ exp(-x cosh t) cosh(νt) dt
        for &nu in &[0.05, 0.3, 0.75, 1.0, 1.4, 3.2] {
            for &x in &[0.2, 1.5, 2.5, 8.0] {
                let upper = (40.0f64 / x).acosh().max(1.0) + 5.0;
                let q = tanh_sinh(|t, _, _| (-x * t.cosh()).exp() * (nu * t).cosh(), 0.0, upper, 1e-15);
                assert!(rel(bessel_k(nu, x), q) < 1e-11, "ν={nu} x={x}: {} vs {q}", bessel_k(nu, x));
            }
        }
    }

    #[test]
    fn recurrence_is_consistent() {
        for &nu in &[0.7, 1.0, 2.3] {
            let x = 1.3;
            let (k, k1) = bessel_k_pair(nu, x);
            let km1 = bessel_k((nu - 1.0f64).abs(), x);
            assert!(rel(k1 - 2.0 * nu / x * k, km1) < 1e-12);
        }
    }
}
