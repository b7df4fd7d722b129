//! Static multisector production network: equilibrium prices, labor supply
//! and the split of sectoral employment responses to oil-driven demand
//! changes into own-income, own-demand and network channels.
//!
//! `a[(i, j)]` is sector `i`'s spending on input `j` as a share of sector
//! `i`'s sales, so rows carry the technology: `alpha_i + sum_j a_ij = 1`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_radius_nonneg;

pub const RADIUS_TOL: f64 = 1e-10;
pub const RADIUS_MAX_ITER: usize = 10_000;

/// Tolerance on the adding-up restrictions of a network spec.
const SHARE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct IONetwork {
    pub a: DMatrix<f64>,
    pub alpha_l: DVector<f64>,
    pub beta: DVector<f64>,
    pub eta: f64,
    pub b: DVector<f64>,
    pub sales: DVector<f64>,
}

/// Matrix as either nested rows or a flat row-major list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkSpec {
    n: usize,
    #[serde(rename = "A")]
    a: MatrixSpec,
    alpha_l: Vec<f64>,
    beta: Vec<f64>,
    eta: f64,
    sales: Vec<f64>,
    #[serde(default)]
    b: Option<Vec<f64>>,
}

impl IONetwork {
    pub fn n(&self) -> usize {
        self.alpha_l.len()
    }

    /// Builds and validates a network.
    pub fn new(
        a: DMatrix<f64>,
        alpha_l: Vec<f64>,
        beta: Vec<f64>,
        eta: f64,
        sales: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        let net = Self {
            a,
            alpha_l: DVector::from_vec(alpha_l),
            beta: DVector::from_vec(beta),
            eta,
            b: DVector::from_vec(b),
            sales: DVector::from_vec(sales),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let bad = |m: String| Err(Error::Network(m));
        if n == 0 {
            return bad("network has no sectors".into());
        }
        if self.a.shape() != (n, n) {
            return bad(format!("A is {:?}, expected {n}x{n}", self.a.shape()));
        }
        for (name, len) in [
            ("beta", self.beta.len()),
            ("sales", self.sales.len()),
            ("b", self.b.len()),
        ] {
            if len != n {
                return bad(format!("{name} has {len} entries, expected {n}"));
            }
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return bad(format!("eta must be nonnegative, got {}", self.eta));
        }
        if let Some(v) = self.a.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return bad(format!("input shares must be nonnegative, found {v}"));
        }
        for i in 0..n {
            if !(self.alpha_l[i] > 0.0) {
                return bad(format!("labor share of sector {} must be positive", i + 1));
            }
            let total = self.alpha_l[i] + self.a.row(i).sum();
            if (total - 1.0).abs() > SHARE_TOL {
                return bad(format!("sector {} shares sum to {total}, not 1", i + 1));
            }
            if !(self.sales[i] > 0.0) {
                return bad(format!("sales of sector {} must be positive", i + 1));
            }
            if !(self.beta[i] >= 0.0) {
                return bad(format!("consumption share of sector {} is negative", i + 1));
            }
        }
        if (self.beta.sum() - 1.0).abs() > SHARE_TOL {
            return bad(format!("consumption shares sum to {}", self.beta.sum()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NetworkSpec = serde_json::from_str(text)?;
        let n = spec.n;
        let a = match spec.a {
            MatrixSpec::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Network(format!("A must be {n}x{n}")));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
            MatrixSpec::Flat(v) => {
                if v.len() != n * n {
                    return Err(Error::Network(format!("A needs {} entries, got {}", n * n, v.len())));
                }
                DMatrix::from_row_slice(n, n, &v)
            }
        };
        if spec.alpha_l.len() != n {
            return Err(Error::Network(format!("alpha_l must have {n} entries")));
        }
        let b = spec.b.unwrap_or_else(|| vec![0.0; n]);
        Self::new(a, spec.alpha_l, spec.beta, spec.eta, spec.sales, b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.n();
        let spec = NetworkSpec {
            n,
            a: MatrixSpec::Rows((0..n).map(|i| self.a.row(i).iter().copied().collect()).collect()),
            alpha_l: self.alpha_l.iter().copied().collect(),
            beta: self.beta.iter().copied().collect(),
            eta: self.eta,
            sales: self.sales.iter().copied().collect(),
            b: Some(self.b.iter().copied().collect()),
        };
        Ok(serde_json::to_string_pretty(&spec)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OilShock {
    pub d_omega: f64,
    pub dz_tilde: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmploymentResponse {
    pub dln_l: Vec<f64>,
    pub own_income: Vec<f64>,
    pub own_demand: Vec<f64>,
    pub network: Vec<f64>,
    /// Change in hours, `alpha_j (p_j y_j) d ln l_j` with the wage as numeraire.
    pub dl: Vec<f64>,
}

/// `a_hat_ij = a_ij s_i / s_j`: sector `j`'s sales going to sector `i`.
pub fn a_hat(net: &IONetwork) -> Result<DMatrix<f64>> {
    let n = net.n();
    if let Some(j) = (0..n).find(|&j| !(net.sales[j] > 0.0)) {
        return Err(Error::Network(format!("sector {} has zero sales", j + 1)));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        net.a[(i, j)] * net.sales[i] / net.sales[j]
    }))
}

/// Inverse of `I - M` for nonnegative `M` with spectral radius below one.
///
/// `I - M` is then a nonsingular M-matrix, so elimination without pivoting
/// is stable and entries with no connecting path in `M` stay exactly zero.
pub fn leontief_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Network("input matrix is not square".into()));
    }
    if m.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Network("input matrix has negative entries".into()));
    }
    let rho = spectral_radius_nonneg(m, RADIUS_TOL, RADIUS_MAX_ITER);
    if rho >= 1.0 {
        return Err(Error::Network(format!(
            "economy is not productive: spectral radius {rho} >= 1"
        )));
    }
    // Gauss-Jordan on [I - M | I]
    let mut a = DMatrix::<f64>::identity(n, n) - m;
    let mut inv = DMatrix::<f64>::identity(n, n);
    for k in 0..n {
        let piv = a[(k, k)];
        if !(piv > 0.0) {
            return Err(Error::Singular(format!("I - A has nonpositive pivot at {}", k + 1)));
        }
        for c in 0..n {
            a[(k, c)] /= piv;
            inv[(k, c)] /= piv;
        }
        for r in 0..n {
            let f = a[(r, k)];
            if r == k || f == 0.0 {
                continue;
            }
            for c in 0..n {
                a[(r, c)] -= f * a[(k, c)];
                inv[(r, c)] -= f * inv[(k, c)];
            }
        }
    }
    Ok(inv)
}

pub fn h_hat(a_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    leontief_inverse(a_hat)
}

/// `ln p = (I - A)^{-1} b`.
pub fn equilibrium_prices(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(leontief_inverse(a)? * b)
}

/// Hours supplied, `l = (1 - omega eta) / (1 + eta)`, required to lie in
/// `[0, 1]`.
pub fn labor_supply(omega: f64, eta: f64) -> Result<f64> {
    let l = (1.0 - omega * eta) / (1.0 + eta);
    if !(0.0..=1.0).contains(&l) {
        return Err(Error::Network(format!(
            "labor supply {l} outside [0, 1] for omega={omega}, eta={eta}"
        )));
    }
    Ok(l)
}

/// `d ln l = H_hat' v`, `v_i = [beta_i d_omega / (1 + eta) + dz_i] / s_i`.
pub fn employment_response(net: &IONetwork, shock: &OilShock) -> Result<EmploymentResponse> {
    let n = net.n();
    if shock.dz_tilde.len() != n {
        return Err(Error::Network(format!(
            "demand shock has {} entries for {n} sectors",
            shock.dz_tilde.len()
        )));
    }
    if !shock.d_omega.is_finite() || shock.dz_tilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::Network("shock values must be finite".into()));
    }
    let h = h_hat(&a_hat(net)?)?;
    let own_income: Vec<f64> = (0..n)
        .map(|j| net.beta[j] * shock.d_omega / (1.0 + net.eta) / net.sales[j])
        .collect();
    let own_demand: Vec<f64> = (0..n).map(|j| shock.dz_tilde[j] / net.sales[j]).collect();
    let v: Vec<f64> = (0..n).map(|i| own_income[i] + own_demand[i]).collect();
    let network: Vec<f64> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| v[i] * (h[(i, j)] - if i == j { 1.0 } else { 0.0 }))
                .sum()
        })
        .collect();
    let dln_l: Vec<f64> = (0..n).map(|j| own_income[j] + own_demand[j] + network[j]).collect();
    let dl = (0..n).map(|j| net.alpha_l[j] * net.sales[j] * dln_l[j]).collect();
    Ok(EmploymentResponse {
        dln_l,
        own_income,
        own_demand,
        network,
        dl,
    })
}

/// Three-sector cycle where sector 1 buys from 2, 2 from 3 and 3 from 1,
/// with equal consumption shares and constant returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeSectorCycle {
    pub a12: f64,
    pub a23: f64,
    pub a31: f64,
    pub eta: f64,
}

impl ThreeSectorCycle {
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 1)] = self.a12;
        a[(1, 2)] = self.a23;
        a[(2, 0)] = self.a31;
        a
    }

    /// Labor shares implied by constant returns.
    pub fn alpha_l(&self) -> [f64; 3] {
        [1.0 - self.a12, 1.0 - self.a23, 1.0 - self.a31]
    }

    pub fn network(&self, sales: [f64; 3], b: [f64; 3]) -> Result<IONetwork> {
        IONetwork::new(
            self.input_matrix(),
            self.alpha_l().to_vec(),
            vec![1.0 / 3.0; 3],
            self.eta,
            sales.to_vec(),
            b.to_vec(),
        )
    }

    /// `a[(x, y)]` for 0-based sector indices.
    fn share(&self, x: usize, y: usize) -> f64 {
        self.input_matrix()[(x, y)]
    }
}

/// Closed-form change in hours of sector `i` (0-based):
/// `dl_i = alpha_i [T(1 + a_ki + a_ki a_jk) + a_ki a_jk dz_j + a_ki dz_k + dz_i] / (1 - a_ki a_jk a_ij)`
/// with `k` the buyer of `i`, `j` the buyer of `k`, and `T = d_omega / (3(1 + eta))`.
pub fn three_sector_analytic(cycle: &ThreeSectorCycle, shock: &OilShock, i: usize) -> Result<f64> {
    if i > 2 || shock.dz_tilde.len() != 3 {
        return Err(Error::Network("three-sector formula needs sectors 0..3".into()));
    }
    let k = (i + 2) % 3;
    let j = (i + 1) % 3;
    let (a_ki, a_jk, a_ij) = (cycle.share(k, i), cycle.share(j, k), cycle.share(i, j));
    let loop_gain = a_ki * a_jk * a_ij;
    if loop_gain >= 1.0 {
        return Err(Error::Network(format!("cycle gain {loop_gain} >= 1")));
    }
    let t = shock.d_omega / (3.0 * (1.0 + cycle.eta));
    let dz = &shock.dz_tilde;
    let dy = (t * (1.0 + a_ki + a_ki * a_jk) + a_ki * a_jk * dz[j] + a_ki * dz[k] + dz[i]) / (1.0 - loop_gain);
    Ok(cycle.alpha_l()[i] * dy)
}

/// Log price of sector `i` on the cycle:
/// `(b_i + a_ij b_j + a_ij a_jk b_k) / (1 - a_ij a_jk a_ki)` with `j` the
/// supplier of `i` and `k` the supplier of `j`.
pub fn three_sector_log_price(cycle: &ThreeSectorCycle, b: [f64; 3], i: usize) -> f64 {
    let j = (i + 1) % 3;
    let k = (i + 2) % 3;
    let (a_ij, a_jk, a_ki) = (cycle.share(i, j), cycle.share(j, k), cycle.share(k, i));
    let log_gamma = b[i] + a_ij * b[j] + a_ij * a_jk * b[k];
    log_gamma / (1.0 - a_ij * a_jk * a_ki)
}
