//! Simulation from a known structural VAR, for Monte Carlo checks and
//! synthetic datasets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{impulse_responses, ma_coefficients, IrfSet};

/// `y_t = c + sum_i A_i y_{t-i} + B e_t` with `e_t` standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct VarDgp {
    pub intercept: DVector<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
    /// Lower-triangular impact matrix `B`.
    pub impact: DMatrix<f64>,
}

impl VarDgp {
    pub fn k(&self) -> usize {
        self.intercept.len()
    }

    pub fn standard_shocks(&self, t: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(t, self.k(), |_, _| rng.sample(StandardNormal))
    }

    /// Runs the recursion from zero initial conditions with the given
    /// structural shocks (one row per period).
    pub fn simulate_with_shocks(&self, shocks: &DMatrix<f64>) -> DMatrix<f64> {
        let (t, k) = shocks.shape();
        let mut y = DMatrix::zeros(t, k);
        for r in 0..t {
            let mut v = &self.intercept + &self.impact * shocks.row(r).transpose();
            for (i, a) in self.coeffs.iter().enumerate() {
                if r > i {
                    v += a * y.row(r - 1 - i).transpose();
                }
            }
            y.row_mut(r).copy_from(&v.transpose());
        }
        y
    }

    /// `t` observations after discarding `burn_in` start-up periods.
    pub fn simulate(&self, t: usize, burn_in: usize, seed: u64) -> DMatrix<f64> {
        let y = self.simulate_with_shocks(&self.standard_shocks(t + burn_in, seed));
        y.rows(burn_in, t).into_owned()
    }

    pub fn irfs(&self, horizon: usize, cumulate: &[bool]) -> IrfSet {
        let ma = ma_coefficients(&self.coeffs, &self.impact, horizon);
        impulse_responses(&ma, cumulate, &vec![1.0; self.k()])
    }
}
