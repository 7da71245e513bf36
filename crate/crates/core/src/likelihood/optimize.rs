//! Two-parameter BFGS for maximization inside a box.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub(crate) struct Optimum {
    pub theta: [f64; 2],
    pub value: f64,
    pub gradient: [f64; 2],
    pub iterations: usize,
}

pub(crate) struct Settings {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Longest step in any coordinate per iteration.
    pub max_step: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { max_iter: 300, grad_tol: 1e-7, max_step: 1.0 }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Maximizes `f` from `start`, projecting trial points onto `[lo, hi]`.
/// `eval` returns the value and gradient; an error at a trial point counts
/// as an infeasible step and the step is shortened.
pub(crate) fn bfgs_maximize<F>(eval: F, start: [f64; 2], lo: [f64; 2], hi: [f64; 2], settings: &Settings) -> Result<Optimum>
where
    F: Fn([f64; 2]) -> Result<(f64, [f64; 2])>,
{
    let clamp = |x: [f64; 2]| [x[0].clamp(lo[0], hi[0]), x[1].clamp(lo[1], hi[1])];
    let mut x = clamp(start);
    // work with f = -loglik
    let (v, g) = eval(x)?;
    let (mut f, mut g) = (-v, [-g[0], -g[1]]);
    let mut h = [[1.0, 0.0], [0.0, 1.0]];
    let mut iterations = 0;
    while iterations < settings.max_iter {
        // coordinates held at a bound by a gradient pointing outward
        let active = [0, 1].map(|k| (x[k] <= lo[k] && g[k] > 0.0) || (x[k] >= hi[k] && g[k] < 0.0));
        let free_g = [0, 1].map(|k| if active[k] { 0.0 } else { g[k] });
        if free_g[0].abs().max(free_g[1].abs()) < settings.grad_tol * f.abs().max(1.0) {
            break;
        }
        iterations += 1;
        let mut p = if active[0] || active[1] {
            [0, 1].map(|k| -h[k][k] * free_g[k])
        } else {
            [-(h[0][0] * g[0] + h[0][1] * g[1]), -(h[1][0] * g[0] + h[1][1] * g[1])]
        };
        if dot(p, free_g) >= 0.0 {
            h = [[1.0, 0.0], [0.0, 1.0]];
            p = [-free_g[0], -free_g[1]];
        }
        let longest = p[0].abs().max(p[1].abs());
        if longest > settings.max_step {
            p = [p[0] * settings.max_step / longest, p[1] * settings.max_step / longest];
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = clamp([x[0] + t * p[0], x[1] + t * p[1]]);
            let s = [trial[0] - x[0], trial[1] - x[1]];
            if s[0] == 0.0 && s[1] == 0.0 {
                break;
            }
            if let Ok((v, gv)) = eval(trial) {
                let fn_ = -v;
                if fn_.is_finite() && fn_ <= f + 1e-4 * dot(g, s) {
                    accepted = Some((trial, s, fn_, [-gv[0], -gv[1]]));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, s, fn_, gn)) = accepted else { break };
        let yv = [gn[0] - g[0], gn[1] - g[1]];
        let sy = dot(s, yv);
        if sy > 1e-12 * dot(s, s).sqrt() * dot(yv, yv).sqrt() {
            let hy = [h[0][0] * yv[0] + h[0][1] * yv[1], h[1][0] * yv[0] + h[1][1] * yv[1]];
            let yhy = dot(yv, hy);
            let rho = 1.0 / sy;
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let small = (f - fn_).abs() <= 1e-15 * f.abs().max(1.0) && s[0].abs().max(s[1].abs()) < 1e-12;
        x = xn;
        f = fn_;
        g = gn;
        if small {
            break;
        }
    }
    if !f.is_finite() {
        return Err(Error::Domain(format!("objective not finite at {x:?}")));
    }
    Ok(Optimum { theta: x, value: -f, gradient: [-g[0], -g[1]], iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_maximum_of_rotated_quadratic() {
        let f = |x: [f64; 2]| {
            let (a, b) = (x[0] - 1.0, x[1] + 2.0);
            let v = -(3.0 * a * a + 2.0 * a * b + 0.5 * b * b);
            Ok((v, [-(6.0 * a + 2.0 * b), -(2.0 * a + b)]))
        };
        let o = bfgs_maximize(f, [0.0, 0.0], [-10.0, -10.0], [10.0, 10.0], &Settings::default()).unwrap();
        assert!((o.theta[0] - 1.0).abs() < 1e-6 && (o.theta[1] + 2.0).abs() < 1e-6, "{o:?}");
    }

    #[test]
    fn handles_narrow_curved_valley() {
        // negative Rosenbrock
        let f = |x: [f64; 2]| {
            let (a, b) = (x[0], x[1]);
            let v = -((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2));
            let ga = 2.0 * (1.0 - a) + 400.0 * a * (b - a * a);
            let gb = -200.0 * (b - a * a);
            Ok((v, [ga, gb]))
        };
        let o = bfgs_maximize(f, [-1.2, 1.0], [-5.0, -5.0], [5.0, 5.0], &Settings::default()).unwrap();
        assert!((o.theta[0] - 1.0).abs() < 1e-4 && (o.theta[1] - 1.0).abs() < 1e-4, "{o:?}");
    }

    #[test]
    fn stops_on_the_box_when_maximum_is_outside() {
        let f = |x: [f64; 2]| Ok((x[0] - x[1] * x[1], [1.0, -2.0 * x[1]]));
        let o = bfgs_maximize(f, [0.0, 1.0], [-1.0, -1.0], [2.0, 1.0], &Settings::default()).unwrap();
        assert_eq!(o.theta[0], 2.0);
        assert!(o.theta[1].abs() < 1e-6);
    }
}
