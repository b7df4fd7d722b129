//! Recursive short-run identification.
//!
//! Structural shocks have unit variance, so `b0inv` is the lower Cholesky
//! factor of the reduced-form covariance and a "one standard deviation"
//! shock is a unit shock. Sign normalization is a relabeling applied after
//! factorization; `b0inv` itself always keeps a positive diagonal.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, row_major};
use crate::var::VarModel;

/// Shock names in identification order.
pub const SHOCK_LABELS: [&str; 4] = [
    "oil-supply",
    "aggregate-demand",
    "oil-specific-demand",
    "regional-employment",
];

/// Row of the real oil price in the panel; signs are normalized so every
/// shock raises it on impact.
pub const PRICE_ROW: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralModel {
    #[serde(with = "row_major")]
    pub b0inv: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub sigma_w: DMatrix<f64>,
    /// Unnormalized shocks `b0inv^{-1} u_t`, `T_eff x K`.
    #[serde(with = "row_major")]
    pub shocks: DMatrix<f64>,
    pub labels: Vec<String>,
    /// Per-shock sign, +1 or -1.
    pub signs: Vec<f64>,
}

impl StructuralModel {
    /// Impact matrix with the sign normalization applied to its columns.
    pub fn impact(&self) -> DMatrix<f64> {
        scale_columns(&self.b0inv, &self.signs)
    }

    pub fn oriented_shocks(&self) -> DMatrix<f64> {
        scale_columns(&self.shocks, &self.signs)
    }

    pub fn shock_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownShock(label.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn scale_columns(m: &DMatrix<f64>, signs: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, s) in signs.iter().enumerate() {
        out.column_mut(j).scale_mut(*s);
    }
    out
}

/// Returns `(b0inv, sigma_w)` with `sigma_w = I` and `b0inv b0inv' = sigma_u`.
pub fn cholesky_identify(sigma_u: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = sigma_u.nrows();
    let asym = (sigma_u - sigma_u.transpose()).amax();
    if asym > 1e-10 * sigma_u.amax().max(1.0) {
        return Err(Error::Invalid(format!(
            "covariance is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let l = linalg::cholesky_lower(sigma_u)?;
    Ok((l, DMatrix::identity(n, n)))
}

/// `w_t = b0inv^{-1} u_t` for each residual row.
pub fn structural_shocks(residuals: &DMatrix<f64>, b0inv: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let singular = || Error::Singular("impact matrix is not invertible".into());
    if (0..b0inv.nrows()).any(|i| b0inv[(i, i)] == 0.0) {
        return Err(singular());
    }
    let wt = b0inv
        .solve_lower_triangular(&residuals.transpose())
        .ok_or_else(singular)?;
    Ok(wt.transpose())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignNormalization {
    pub signs: Vec<f64>,
    /// Shocks whose impact on the reference variable was exactly zero.
    pub ties: Vec<usize>,
}

/// Chooses `s_j` so that `s_j * impact[row, j] >= 0`. Exact zeros keep +1.
pub fn normalize_signs(impact: &DMatrix<f64>, row: usize) -> SignNormalization {
    let mut signs = Vec::with_capacity(impact.ncols());
    let mut ties = Vec::new();
    for j in 0..impact.ncols() {
        let v = impact[(row, j)];
        if v == 0.0 {
            log::warn!("shock {j} has zero impact on variable {row}; keeping sign +1");
            ties.push(j);
            signs.push(1.0);
        } else {
            signs.push(if v > 0.0 { 1.0 } else { -1.0 });
        }
    }
    SignNormalization { signs, ties }
}

pub fn default_labels(k: usize) -> Vec<String> {
    if k == SHOCK_LABELS.len() {
        SHOCK_LABELS.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=k).map(|j| format!("shock{j}")).collect()
    }
}

/// Cholesky identification of an estimated model, with signs normalized on
/// `sign_row` (the oil-price row for the four-variable system).
pub fn identify_with(model: &VarModel, sign_row: usize) -> Result<StructuralModel> {
    let (b0inv, sigma_w) = cholesky_identify(&model.sigma_u)?;
    let shocks = structural_shocks(&model.residuals, &b0inv)?;
    let row = sign_row.min(model.k().saturating_sub(1));
    let signs = normalize_signs(&b0inv, row).signs;
    Ok(StructuralModel {
        b0inv,
        sigma_w,
        shocks,
        labels: default_labels(model.k()),
        signs,
    })
}

pub fn identify(model: &VarModel) -> Result<StructuralModel> {
    identify_with(model, PRICE_ROW)
}
