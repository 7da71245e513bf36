//! Unnormalized 1-D/2-D complex FFTs over row-major grids.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

#[derive(Clone)]
pub(crate) struct GridFft {
    sizes: [usize; 2],
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
}

impl GridFft {
    pub fn new(grid: &GridSpec) -> Self {
        let sizes = grid.sizes();
        let mut planner = FftPlanner::new();
        GridFft {
            sizes,
            fwd: [planner.plan_fft_forward(sizes[0]), planner.plan_fft_forward(sizes[1])],
            inv: [planner.plan_fft_inverse(sizes[0]), planner.plan_fft_inverse(sizes[1])],
        }
    }

    /// `X(k) = Σ_s x(s) exp(-2πi k·s/m)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// `x(s) = Σ_k X(k) exp(+2πi k·s/m)`, no `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 2]) {
        let [m0, m1] = self.sizes;
        debug_assert_eq!(data.len(), m0 * m1);
        if m1 > 1 {
            plans[1].process(data);
        }
        if m0 > 1 {
            if m1 == 1 {
                plans[0].process(data);
            } else {
                let mut column = vec![Complex64::new(0.0, 0.0); m0];
                for c in 0..m1 {
                    for r in 0..m0 {
                        column[r] = data[r * m1 + c];
                    }
                    plans[0].process(&mut column);
                    for r in 0..m0 {
                        data[r * m1 + c] = column[r];
                    }
                }
            }
        }
    }
}
