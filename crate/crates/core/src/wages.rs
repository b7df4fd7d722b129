//! Second stage: quarterly real wage growth regressed on distributed lags of
//! quarter-averaged structural shocks, with tuple block-bootstrap bands.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bootstrap::{block_starts, collect_draws, replication_rng, standard_errors, BandSet};
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::ingest::{deflate, log_difference, quarterly_average, Frequency, RawSeries};
use crate::linalg::least_squares;

pub const DEFAULT_LAGS: usize = 8;
pub const DEFAULT_BLOCK: usize = 4;
pub const DEFAULT_REPLICATIONS: usize = 1000;

/// Smallest usable regression sample.
const MIN_OBS: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuarterlyShocks {
    /// First month of each complete quarter, consecutive.
    pub quarters: Vec<YearMonth>,
    pub labels: Vec<String>,
    /// `zeta[j][t]`.
    pub zeta: Vec<Vec<f64>>,
}

impl QuarterlyShocks {
    pub fn index_of(&self, quarter: YearMonth) -> Option<usize> {
        let first = *self.quarters.first()?;
        let off = first.months_until(quarter);
        if off < 0 || off % 3 != 0 {
            return None;
        }
        let i = (off / 3) as usize;
        (i < self.quarters.len()).then_some(i)
    }
}

/// Averages monthly shocks (rows dated consecutively from `start`) over
/// complete calendar quarters.
pub fn aggregate_shocks(start: YearMonth, shocks: &DMatrix<f64>, labels: &[String]) -> Result<QuarterlyShocks> {
    let (n, k) = shocks.shape();
    if labels.len() != k {
        return Err(Error::Invalid("one label per shock column is required".into()));
    }
    let mut quarters = Vec::new();
    let mut zeta = vec![Vec::new(); k];
    let mut t = (0..n)
        .find(|&t| (start.add_months(t as i64).month() - 1).is_multiple_of(3))
        .unwrap_or(n);
    while t + 3 <= n {
        quarters.push(start.add_months(t as i64));
        for (j, z) in zeta.iter_mut().enumerate() {
            z.push((shocks[(t, j)] + shocks[(t + 1, j)] + shocks[(t + 2, j)]) / 3.0);
        }
        t += 3;
    }
    if quarters.is_empty() {
        return Err(Error::InsufficientSample("no complete quarter of shocks".into()));
    }
    Ok(QuarterlyShocks {
        quarters,
        labels: labels.to_vec(),
        zeta,
    })
}

/// `Delta log` of the nominal quarterly wage deflated by the quarterly
/// average of monthly CPI.
pub fn real_wage_growth(nominal: &RawSeries, cpi_monthly: &RawSeries) -> Result<RawSeries> {
    if nominal.freq != Frequency::Quarterly {
        return Err(Error::Frequency(format!(
            "wage series '{}' must be quarterly",
            nominal.name
        )));
    }
    let cpi_q = quarterly_average(cpi_monthly)?;
    let real = deflate(nominal, &cpi_q)?;
    Ok(log_difference(&real)?.renamed("real_wage_growth"))
}

/// Regression rows `(Delta log w_t; 1, zeta_t, ..., zeta_{t-L})`.
#[derive(Debug, Clone, PartialEq)]
pub struct WageDesign {
    pub quarters: Vec<YearMonth>,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

pub fn wage_design(wage_growth: &RawSeries, zeta: &QuarterlyShocks, shock: usize, lags: usize) -> Result<WageDesign> {
    if shock >= zeta.zeta.len() {
        return Err(Error::UnknownShock(format!("shock index {shock}")));
    }
    let z = &zeta.zeta[shock];
    let growth: BTreeMap<YearMonth, f64> = wage_growth
        .observations
        .iter()
        .filter_map(|(d, v)| v.map(|v| (*d, v)))
        .collect();
    let mut quarters = Vec::new();
    let mut ys = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for (t, &q) in zeta.quarters.iter().enumerate() {
        if t < lags {
            continue;
        }
        let Some(&y) = growth.get(&q) else { continue };
        quarters.push(q);
        ys.push(y);
        rows.push(1.0);
        rows.extend((0..=lags).map(|i| z[t - i]));
    }
    let n = ys.len();
    if n < MIN_OBS || n <= lags + 2 {
        return Err(Error::InsufficientSample(format!(
            "{n} overlapping quarters for a regression with {lags} lags"
        )));
    }
    Ok(WageDesign {
        quarters,
        y: DVector::from_vec(ys),
        x: DMatrix::from_row_slice(n, lags + 2, &rows),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WageRegression {
    pub shock: String,
    pub quarters: Vec<YearMonth>,
    pub alpha: f64,
    /// `phi[i]` multiplies `zeta_{t-i}`, `i = 0 ..= lags`.
    pub phi: Vec<f64>,
    pub residuals: Vec<f64>,
    pub cumulative_irf: Vec<f64>,
}

fn cumulative(phi: &[f64]) -> Vec<f64> {
    phi.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

fn fit_design(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let beta = least_squares(x, &DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?;
    Ok(beta.column(0).into_owned())
}

pub fn fit_wage_design(design: &WageDesign, label: &str) -> Result<WageRegression> {
    let beta = fit_design(&design.y, &design.x)?;
    let residuals = &design.y - &design.x * &beta;
    let phi: Vec<f64> = beta.iter().skip(1).copied().collect();
    Ok(WageRegression {
        shock: label.to_string(),
        quarters: design.quarters.clone(),
        alpha: beta[0],
        cumulative_irf: cumulative(&phi),
        phi,
        residuals: residuals.iter().copied().collect(),
    })
}

pub fn estimate_wage_irf(
    wage_growth: &RawSeries,
    zeta: &QuarterlyShocks,
    shock: usize,
    lags: usize,
) -> Result<WageRegression> {
    let design = wage_design(wage_growth, zeta, shock, lags)?;
    fit_wage_design(&design, &zeta.labels[shock])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WageBootstrap {
    pub block_length: usize,
    pub replications: usize,
    pub seed: u64,
}

impl Default for WageBootstrap {
    fn default() -> Self {
        Self {
            block_length: DEFAULT_BLOCK,
            replications: DEFAULT_REPLICATIONS,
            seed: crate::bootstrap::DEFAULT_SEED,
        }
    }
}

/// Bands on the cumulative wage response from moving blocks of whole
/// regression rows.
pub fn wage_bands(design: &WageDesign, label: &str, config: &WageBootstrap) -> Result<BandSet> {
    let n = design.y.len();
    if config.replications < 2 {
        return Err(Error::Invalid("bootstrap needs at least 2 replications".into()));
    }
    if config.block_length == 0 || config.block_length > n {
        return Err(Error::Invalid(format!(
            "block length {} must lie in 1..={n}",
            config.block_length
        )));
    }
    let point = fit_wage_design(design, label)?;
    let block = config.block_length;
    let results: Vec<Option<Vec<f64>>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(config.seed, rep);
            let starts = block_starts(n, block, &mut rng);
            let idx: Vec<usize> = (0..n).map(|t| starts[t / block] + t % block).collect();
            let y = DVector::from_fn(n, |r, _| design.y[idx[r]]);
            let x = design.x.select_rows(&idx);
            let beta = fit_design(&y, &x).ok()?;
            let phi: Vec<f64> = beta.iter().skip(1).copied().collect();
            let cum = cumulative(&phi);
            cum.iter().all(|v| v.is_finite()).then_some(cum)
        })
        .collect();
    let (draws, failed) = collect_draws(results)?;
    let se = standard_errors(&draws);
    Ok(BandSet {
        shocks: vec![label.to_string()],
        variables: vec!["real_wage".to_string()],
        point: vec![vec![point.cumulative_irf]],
        se: vec![vec![se]],
        replications: draws.len(),
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ym(y: i32, m: u32) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    fn monthly_shocks(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, 2, |_, _| rng.sample(StandardNormal))
    }

    fn labels() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    fn growth_from(q: &QuarterlyShocks, f: impl Fn(usize) -> f64) -> RawSeries {
        let obs = q.quarters.iter().enumerate().map(|(t, d)| (*d, Some(f(t)))).collect();
        RawSeries::new("w", Frequency::Quarterly, obs).unwrap()
    }

    #[test]
    fn constant_and_cancelling_quarters() {
        let c = DMatrix::from_element(12, 2, 0.4);
        let q = aggregate_shocks(ym(2000, 1), &c, &labels()).unwrap();
        assert_eq!(q.quarters.len(), 4);
        assert!(q.zeta[0].iter().all(|v| (v - 0.4).abs() < 1e-15));

        let mut m = DMatrix::zeros(3, 2);
        m[(0, 0)] = -1.0;
        m[(2, 0)] = 1.0;
        let q = aggregate_shocks(ym(2000, 4), &m, &labels()).unwrap();
        assert_eq!(q.zeta[0], vec![0.0]);
    }

    #[test]
    fn partial_quarters_dropped() {
        // Feb 2000 .. Dec 2000: Feb/Mar are a partial quarter
        let m = monthly_shocks(11, 1);
        let q = aggregate_shocks(ym(2000, 2), &m, &labels()).unwrap();
        assert_eq!(q.quarters, vec![ym(2000, 4), ym(2000, 7), ym(2000, 10)]);
        assert_eq!(q.index_of(ym(2000, 7)), Some(1));
        assert_eq!(q.index_of(ym(2000, 8)), None);
    }

    #[test]
    fn matches_ingest_quarterly_average() {
        let m = monthly_shocks(37, 2);
        let start = ym(1999, 11);
        let q = aggregate_shocks(start, &m, &labels()).unwrap();
        for j in 0..2 {
            let s = RawSeries::from_values("s", Frequency::Monthly, start, m.column(j).as_slice()).unwrap();
            let qa = quarterly_average(&s).unwrap();
            let dates: Vec<YearMonth> = qa.dates().collect();
            assert_eq!(dates, q.quarters);
            assert_eq!(qa.values_nan(), q.zeta[j]);
        }
    }

    #[test]
    fn zero_wage_growth_gives_zero_coefficients() {
        let q = aggregate_shocks(ym(1990, 1), &monthly_shocks(300, 3), &labels()).unwrap();
        let r = estimate_wage_irf(&growth_from(&q, |_| 0.0), &q, 0, 8).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert!(r.phi.iter().all(|v| *v == 0.0));
        assert_eq!(r.phi.len(), 9);
    }

    #[test]
    fn recovers_contemporaneous_loading() {
        let q = aggregate_shocks(ym(1990, 1), &monthly_shocks(300, 4), &labels()).unwrap();
        let z = q.zeta[1].clone();
        let r = estimate_wage_irf(&growth_from(&q, |t| 0.3 * z[t]), &q, 1, 8).unwrap();
        assert!((r.phi[0] - 0.3).abs() < 1e-10);
        assert!(r.phi[1..].iter().all(|v| v.abs() < 1e-10));
        assert_eq!(r.cumulative_irf[0], r.phi[0]);
        let s: f64 = r.phi.iter().sum();
        assert!((r.cumulative_irf[8] - s).abs() < 1e-15);
    }

    #[test]
    fn short_overlap_rejected() {
        let q = aggregate_shocks(ym(1990, 1), &monthly_shocks(48, 5), &labels()).unwrap();
        let r = estimate_wage_irf(&growth_from(&q, |t| t as f64), &q, 0, 8);
        assert!(matches!(r, Err(Error::InsufficientSample(_))));
        assert!(matches!(
            estimate_wage_irf(&growth_from(&q, |_| 0.0), &q, 5, 8),
            Err(Error::UnknownShock(_))
        ));
    }

    #[test]
    fn deflating_by_itself_is_flat() {
        let cpi = RawSeries::from_values(
            "cpi",
            Frequency::Monthly,
            ym(2000, 1),
            &(0..24).map(|t| 100.0 + t as f64).collect::<Vec<_>>(),
        )
        .unwrap();
        let nominal = quarterly_average(&cpi).unwrap().renamed("wage");
        let g = real_wage_growth(&nominal, &cpi).unwrap();
        assert_eq!(g.len(), 7);
        assert!(g.values_nan().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bands_deterministic_and_noise_free_case() {
        let q = aggregate_shocks(ym(1990, 1), &monthly_shocks(420, 6), &labels()).unwrap();
        let z = q.zeta[0].clone();
        let exact = growth_from(&q, |t| 0.01 + 0.3 * z[t] - 0.1 * if t > 0 { z[t - 1] } else { 0.0 });
        let d = wage_design(&exact, &q, 0, 8).unwrap();
        let cfg = WageBootstrap {
            block_length: 4,
            replications: 50,
            seed: 3,
        };
        let a = wage_bands(&d, "a", &cfg).unwrap();
        assert_eq!(a, wage_bands(&d, "a", &cfg).unwrap());
        assert!(a.se[0][0].iter().all(|v| *v < 1e-10));
        assert!((a.point[0][0][1] - 0.2).abs() < 1e-10);
    }

    #[test]
    fn null_response_bands_cover_zero() {
        let mut covered = 0usize;
        let mut total = 0usize;
        for rep in 0..50u64 {
            let q = aggregate_shocks(ym(1990, 1), &monthly_shocks(420, 100 + rep), &labels()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(500 + rep);
            let noise: Vec<f64> = (0..q.quarters.len())
                .map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let g = growth_from(&q, |t| noise[t]);
            let d = wage_design(&g, &q, 0, 8).unwrap();
            let cfg = WageBootstrap {
                block_length: 4,
                replications: 200,
                seed: rep,
            };
            let b = wage_bands(&d, "a", &cfg).unwrap();
            for h in 0..9 {
                total += 1;
                if b.lower(0, 0, h, 2.0) <= 0.0 && 0.0 <= b.upper(0, 0, h, 2.0) {
                    covered += 1;
                }
            }
        }
        assert!(covered as f64 >= 0.9 * total as f64, "{covered}/{total}");
    }
}
