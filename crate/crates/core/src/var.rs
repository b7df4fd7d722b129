//! Reduced-form VAR(p) with intercept, estimated equation by equation by
//! least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::date::DateRange;
use crate::error::{Error, Result};
use crate::ingest::TimeSeriesFrame;
use crate::linalg::{self, row_major};

pub const DEFAULT_LAGS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    pub lags: usize,
    pub names: Vec<String>,
    #[serde(with = "linalg::vector")]
    pub intercept: DVector<f64>,
    /// `A_1 .. A_p`, each `K x K`.
    #[serde(with = "row_major::list")]
    pub coeffs: Vec<DMatrix<f64>>,
    /// `T_eff x K`, row `t` is the residual for `sample.start + t`.
    #[serde(with = "row_major")]
    pub residuals: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub sigma_u: DMatrix<f64>,
    /// Effective sample (after dropping the first `p` observations).
    pub sample: DateRange,
    /// The estimation panel, including the `p` presample rows.
    pub data: TimeSeriesFrame,
}

impl VarModel {
    pub fn k(&self) -> usize {
        self.intercept.len()
    }

    pub fn t_eff(&self) -> usize {
        self.residuals.nrows()
    }

    /// Observed `y_t` over the effective sample, `T_eff x K`.
    pub fn observed(&self) -> DMatrix<f64> {
        let y = self.data.to_matrix();
        y.rows(self.lags, self.t_eff()).into_owned()
    }

    pub fn fitted(&self) -> DMatrix<f64> {
        self.observed() - &self.residuals
    }

    /// Stacked coefficients in regression layout: `(1 + K p) x K`, rows are
    /// `[alpha'; A_1'; ...; A_p']`.
    pub fn stacked_coefficients(&self) -> DMatrix<f64> {
        let k = self.k();
        let mut b = DMatrix::zeros(1 + k * self.lags, k);
        b.row_mut(0).copy_from(&self.intercept.transpose());
        for (i, a) in self.coeffs.iter().enumerate() {
            b.view_mut((1 + i * k, 0), (k, k)).copy_from(&a.transpose());
        }
        b
    }

    pub fn sigma_is_positive_definite(&self) -> bool {
        linalg::cholesky_lower(&self.sigma_u).is_ok()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Regressor matrix `[1, y_{t-1}', ..., y_{t-p}']` for `t = p .. T-1`.
pub fn regressor_matrix(y: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let (t, k) = y.shape();
    let t_eff = t.saturating_sub(p);
    let mut x = DMatrix::zeros(t_eff, 1 + k * p);
    for r in 0..t_eff {
        x[(r, 0)] = 1.0;
        for lag in 1..=p {
            for c in 0..k {
                x[(r, 1 + (lag - 1) * k + c)] = y[(r + p - lag, c)];
            }
        }
    }
    x
}

/// Raw least-squares fit of a VAR(p) on a `T x K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub intercept: DVector<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
    pub residuals: DMatrix<f64>,
    pub sigma_u: DMatrix<f64>,
}

/// Least-squares VAR(p) with intercept. The residual covariance divides by
/// `T_eff - K p - 1`.
pub fn fit_var(y: &DMatrix<f64>, p: usize) -> Result<VarFit> {
    if p == 0 {
        return Err(Error::Invalid("lag order must be at least 1".into()));
    }
    let (t, k) = y.shape();
    let m = 1 + k * p;
    if t <= p || t - p <= m {
        return Err(Error::InsufficientSample(format!(
            "{t} observations cannot support {k} variables with {p} lags and an intercept"
        )));
    }
    let t_eff = t - p;
    let x = regressor_matrix(y, p);
    let yy = y.rows(p, t_eff).into_owned();
    let beta = linalg::least_squares(&x, &yy)?;
    let residuals = &yy - &x * &beta;
    let mut sigma_u = residuals.transpose() * &residuals / (t_eff - m) as f64;
    sigma_u = (&sigma_u + sigma_u.transpose()) * 0.5;
    Ok(VarFit {
        intercept: beta.row(0).transpose(),
        coeffs: (0..p).map(|i| beta.rows(1 + i * k, k).transpose()).collect(),
        residuals,
        sigma_u,
    })
}

pub fn estimate_ols(panel: &TimeSeriesFrame, p: usize) -> Result<VarModel> {
    if panel.has_missing() {
        return Err(Error::Invalid("panel contains missing cells".into()));
    }
    let fit = fit_var(&panel.to_matrix(), p)?;
    let sample = DateRange::new(panel.date(p), panel.date(panel.nrows() - 1))?;
    Ok(VarModel {
        lags: p,
        names: panel.names.clone(),
        intercept: fit.intercept,
        coeffs: fit.coeffs,
        residuals: fit.residuals,
        sigma_u: fit.sigma_u,
        sample,
        data: panel.clone(),
    })
}

/// First-order stacked form of a VAR(p).
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionForm {
    pub matrix: DMatrix<f64>,
    /// Eigenvalue moduli, largest first.
    pub eigen_moduli: Vec<f64>,
}

impl CompanionForm {
    pub fn max_modulus(&self) -> f64 {
        self.eigen_moduli.first().copied().unwrap_or(0.0)
    }
}

pub fn companion_matrix(coeffs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = coeffs.len();
    let k = coeffs.first().map_or(0, |a| a.nrows());
    let mut f = DMatrix::zeros(k * p, k * p);
    for (i, a) in coeffs.iter().enumerate() {
        f.view_mut((0, i * k), (k, k)).copy_from(a);
    }
    for i in 0..k * p.saturating_sub(1) {
        f[(k + i, i)] = 1.0;
    }
    f
}

pub fn companion(model: &VarModel) -> CompanionForm {
    companion_of(&model.coeffs)
}

pub fn companion_of(coeffs: &[DMatrix<f64>]) -> CompanionForm {
    let matrix = companion_matrix(coeffs);
    let mut eigen_moduli: Vec<f64> = matrix.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    eigen_moduli.sort_by(|a, b| b.total_cmp(a));
    CompanionForm { matrix, eigen_moduli }
}

/// True iff every companion eigenvalue lies strictly inside `1 - tol`.
pub fn is_stable(cf: &CompanionForm, tol: f64) -> bool {
    cf.max_modulus() < 1.0 - tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::YearMonth;
    use crate::ingest::Frequency;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn frame(y: &DMatrix<f64>) -> TimeSeriesFrame {
        let cols = (0..y.ncols()).map(|c| y.column(c).iter().copied().collect()).collect();
        let names = (0..y.ncols()).map(|c| format!("y{c}")).collect();
        TimeSeriesFrame::from_columns(YearMonth::new(1990, 1).unwrap(), Frequency::Monthly, names, cols).unwrap()
    }

    fn simulate(coeffs: &[DMatrix<f64>], c: &DVector<f64>, t: usize, noise: f64, seed: u64) -> DMatrix<f64> {
        let k = c.len();
        let p = coeffs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = DMatrix::zeros(t, k);
        for r in 0..p {
            for j in 0..k {
                y[(r, j)] = rng.random_range(-1.0..1.0);
            }
        }
        for r in p..t {
            let mut v = c.clone();
            for (i, a) in coeffs.iter().enumerate() {
                v += a * y.row(r - 1 - i).transpose();
            }
            for j in 0..k {
                let e: f64 = rng.sample(StandardNormal);
                y[(r, j)] = v[j] + noise * e;
            }
        }
        y
    }

    #[test]
    fn recovers_exact_var1() {
        // unit-modulus rotation keeps the noiseless path from collapsing onto
        // the fixed point, so the regressors stay full rank
        let (sn, cs) = 0.7f64.sin_cos();
        let a = DMatrix::from_row_slice(3, 3, &[cs, -sn, 0.0, sn, cs, 0.0, 0.1, 0.0, -0.97]);
        let c = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        let y = simulate(&[a.clone()], &c, 30, 0.0, 1);
        let m = estimate_ols(&frame(&y), 1).unwrap();
        assert!((&m.coeffs[0] - &a).amax() < 1e-10);
        assert!((&m.intercept - &c).amax() < 1e-10);
        assert!(m.residuals.amax() < 1e-10);
    }

    #[test]
    fn white_noise_gives_small_coefficients() {
        let k = 4;
        let zero = DMatrix::zeros(k, k);
        let y = simulate(&[zero], &DVector::zeros(k), 10_000, 1.0, 7);
        let m = estimate_ols(&frame(&y), 1).unwrap();
        assert!(m.coeffs[0].amax() < 0.05, "{}", m.coeffs[0]);
    }

    #[test]
    fn insufficient_sample() {
        let y = DMatrix::from_fn(8, 4, |i, j| (i * 7 + j * 3) as f64 % 5.0);
        assert!(matches!(estimate_ols(&frame(&y), 2), Err(Error::InsufficientSample(_))));
    }

    #[test]
    fn collinear_panel_is_singular() {
        let mut y = simulate(&[DMatrix::zeros(2, 2)], &DVector::zeros(2), 50, 1.0, 3);
        for r in 0..50 {
            y[(r, 1)] = 2.0 * y[(r, 0)];
        }
        assert!(matches!(estimate_ols(&frame(&y), 1), Err(Error::Singular(_))));
    }

    #[test]
    fn residuals_orthogonal_and_sigma_symmetric() {
        let a1 = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.3]);
        let a2 = DMatrix::from_row_slice(2, 2, &[-0.1, 0.0, 0.05, 0.1]);
        let y = simulate(&[a1, a2], &DVector::from_vec(vec![1.0, -1.0]), 300, 0.5, 11);
        let m = estimate_ols(&frame(&y), 2).unwrap();
        let x = regressor_matrix(&y, 2);
        let xu = x.transpose() * &m.residuals;
        let scale = x.amax() * m.residuals.amax() * x.nrows() as f64;
        assert!(xu.amax() / scale < 1e-8);
        assert!((&m.sigma_u - m.sigma_u.transpose()).amax() < 1e-12);
        assert!(m.sigma_is_positive_definite());

        // refit on fitted + residuals reproduces the coefficients
        let rebuilt = {
            let mut yy = y.clone();
            let fr = m.fitted() + &m.residuals;
            yy.rows_mut(2, m.t_eff()).copy_from(&fr);
            yy
        };
        let m2 = estimate_ols(&frame(&rebuilt), 2).unwrap();
        assert!((m2.stacked_coefficients() - m.stacked_coefficients()).amax() < 1e-10);
    }

    #[test]
    fn json_round_trip() {
        let y = simulate(&[DMatrix::identity(2, 2) * 0.3], &DVector::zeros(2), 60, 1.0, 5);
        let m = estimate_ols(&frame(&y), 2).unwrap();
        let back = VarModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn companion_examples() {
        let cf = companion_of(&[DMatrix::identity(4, 4) * 0.5]);
        assert!(cf.eigen_moduli.iter().all(|m| (m - 0.5).abs() < 1e-14));
        assert!(is_stable(&cf, 1e-8));

        let cf = companion_of(&[DMatrix::identity(4, 4)]);
        assert!((cf.max_modulus() - 1.0).abs() < 1e-14);
        assert!(!is_stable(&cf, 1e-8));

        let cf = companion_of(&[DMatrix::identity(2, 2) * 0.999]);
        assert!(!is_stable(&cf, 1e-3));
        assert!(is_stable(&cf, 1e-4));
    }

    #[test]
    fn companion_layout() {
        let a1 = DMatrix::from_fn(2, 2, |i, j| (i * 2 + j) as f64);
        let a2 = DMatrix::from_fn(2, 2, |i, j| 10.0 + (i * 2 + j) as f64);
        let a3 = DMatrix::from_fn(2, 2, |i, j| 20.0 + (i * 2 + j) as f64);
        let f = companion_matrix(&[a1.clone(), a2.clone(), a3.clone()]);
        assert_eq!(f.view((0, 0), (2, 2)), a1);
        assert_eq!(f.view((0, 2), (2, 2)), a2);
        assert_eq!(f.view((0, 4), (2, 2)), a3);
        assert_eq!(f.view((2, 0), (4, 4)), DMatrix::<f64>::identity(4, 4));
        assert_eq!(f.view((2, 4), (4, 2)), DMatrix::<f64>::zeros(4, 2));
    }

    #[test]
    fn var2_moduli_solve_characteristic_polynomial() {
        // independent check: each eigenvalue z must make
        // det(z^2 I - z A1 - A2) vanish
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut draw = || DMatrix::from_fn(4, 4, |_, _| rng.random_range(-0.3..0.3));
        let (a1, a2) = (draw(), draw());
        let f = companion_matrix(&[a1.clone(), a2.clone()]);
        let eig = f.complex_eigenvalues();
        use nalgebra::Complex;
        let to_c = |m: &DMatrix<f64>| m.map(|v| Complex::new(v, 0.0));
        for z in eig.iter() {
            let m = DMatrix::<Complex<f64>>::identity(4, 4) * (*z * *z) - to_c(&a1) * *z - to_c(&a2);
            let det = m.determinant();
            assert!(det.norm() < 1e-10, "{z} {det}");
        }
        let moduli = companion_of(&[a1, a2]).eigen_moduli;
        let mut direct: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
        direct.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(moduli, direct);
        assert_eq!(moduli.len(), 8);
    }
}
