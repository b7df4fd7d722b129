//! Small dense linear-algebra helpers shared by the estimation modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares solution of `x * beta = y` via thin QR.
///
/// Fails when `x` is numerically rank deficient.
pub fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, m) = x.shape();
    if n < m {
        return Err(Error::InsufficientSample(format!(
            "{n} observations for {m} regressors"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = diag_max * (n.max(m) as f64) * f64::EPSILON * 16.0;
    if let Some(i) = (0..m).find(|&i| r[(i, i)].abs() <= tol) {
        return Err(Error::Singular(format!(
            "regressor matrix is rank deficient (column {i})"
        )));
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))
}

/// Lower Cholesky factor, reporting the first leading minor that fails.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Invalid("cholesky of a non-square matrix".into()));
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `S = F S F' + Q` for a stable `F` by the doubling iteration.
///
/// Iterates until the fixed-point residual, relative to the larger of
/// `max|S|` and `max|Q|`, is below `tol`.
pub fn lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let residual = |s: &DMatrix<f64>| {
        let scale = s.amax().max(q.amax()).max(f64::MIN_POSITIVE);
        (s - f * s * f.transpose() - q).amax() / scale
    };
    let mut s = q.clone();
    let mut fk = f.clone();
    // 64 doublings cover 2^64 terms of the series
    for _ in 0..64 {
        if residual(&s) < tol {
            return Ok(s);
        }
        s += &fk * &s * fk.transpose();
        fk = &fk * &fk;
        if !fk.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    let resid = residual(&s);
    if resid < tol {
        Ok(s)
    } else {
        Err(Error::Invalid(format!(
            "Lyapunov iteration did not converge (residual {resid:e})"
        )))
    }
}

/// Spectral radius of an elementwise-nonnegative square matrix.
///
/// Power iteration on `I + A`, whose Perron root `1 + rho(A)` is strictly
/// dominant even when `A` is periodic. Stops when the Collatz-Wielandt bounds
/// are within `tol`; on hitting `max_iter` the upper bound is returned.
pub fn spectral_radius_nonneg(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let b = DMatrix::<f64>::identity(n, n) + a;
    let mut x = DVector::<f64>::from_element(n, 1.0);
    let mut upper = f64::INFINITY;
    for _ in 0..max_iter {
        let y = &b * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        upper = hi;
        if hi - lo < tol {
            return 0.5 * (hi + lo) - 1.0;
        }
        let norm = y.amax();
        // floor keeps every component strictly positive for the ratio bounds
        x = y.map(|v| (v / norm).max(1e-300));
    }
    upper - 1.0
}

pub fn is_lower_triangular(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (i + 1..m.ncols()).all(|j| m[(i, j)] == 0.0))
}

/// Row-major nested-vector (de)serialization for `DMatrix`.
pub mod row_major {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err("ragged matrix rows".into());
        }
        Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
            let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
            all.iter()
                .map(|r| from_rows(r).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// `DVector` as a plain JSON array.
pub mod vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_hand_example() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        let l = cholesky_lower(&a).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]));
    }

    #[test]
    fn cholesky_names_failing_minor() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        match cholesky_lower(&a) {
            Err(Error::NotPositiveDefinite { minor }) => assert_eq!(minor, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn least_squares_detects_collinearity() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(least_squares(&x, &y), Err(Error::Singular(_))));
    }

    #[test]
    fn lyapunov_scalar() {
        // s = 0.25 s + 1 => s = 4/3
        let f = DMatrix::from_element(1, 1, 0.5);
        let q = DMatrix::from_element(1, 1, 1.0);
        let s = lyapunov(&f, &q, 1e-14).unwrap();
        assert!((s[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_radius_of_cycle() {
        // 3-cycle with weights 0.5 each: eigenvalues are cube roots of 0.125
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 1)] = 0.5;
        a[(1, 2)] = 0.5;
        a[(2, 0)] = 0.5;
        let r = spectral_radius_nonneg(&a, 1e-12, 10_000);
        assert!((r - 0.5).abs() < 1e-9, "{r}");
        assert_eq!(spectral_radius_nonneg(&DMatrix::zeros(2, 2), 1e-12, 100), 0.0);
    }
}
