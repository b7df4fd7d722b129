//! Recursive-design residual moving-block bootstrap for impulse-response
//! standard errors.
//!
//! Every replication draws from its own ChaCha stream keyed by
//! `(seed, replication index)`, so results do not depend on thread count or
//! on how many replications are requested after it.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{impulse_responses, ma_coefficients, IrfSet};
use crate::error::{Error, Result};
use crate::identify::{cholesky_identify, StructuralModel};
use crate::var::{fit_var, VarModel};

pub const DEFAULT_REPLICATIONS: usize = 2000;
pub const DEFAULT_BLOCK_LENGTH: usize = 24;
pub const DEFAULT_SEED: u64 = 20240101;

/// Share of failed replications above which the whole run is rejected.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Subtract the expected value of each within-block position under the
    /// block distribution, then add back the residual mean.
    #[default]
    Bjt,
    /// Concatenate raw blocks.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub block_length: usize,
    pub seed: u64,
    pub horizon: usize,
    pub centering: Centering,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: DEFAULT_REPLICATIONS,
            block_length: DEFAULT_BLOCK_LENGTH,
            seed: DEFAULT_SEED,
            horizon: crate::dynamics::DEFAULT_HORIZON,
            centering: Centering::Bjt,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self, t_eff: usize) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::Invalid("bootstrap needs at least 2 replications".into()));
        }
        check_block(self.block_length, t_eff)
    }
}

fn check_block(block: usize, n: usize) -> Result<()> {
    if block == 0 || block > n {
        return Err(Error::Invalid(format!("block length {block} must lie in 1..={n}")));
    }
    Ok(())
}

/// Generator for replication `rep`: the seed picks the key, the replication
/// index picks the stream.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// `ceil(n / block)` start positions drawn uniformly from `0 ..= n - block`.
pub fn block_starts<R: Rng + ?Sized>(n: usize, block: usize, rng: &mut R) -> Vec<usize> {
    let count = n.div_ceil(block);
    (0..count).map(|_| rng.random_range(0..=n - block)).collect()
}

/// Concatenates overlapping blocks of rows of `residuals`, truncated to the
/// original length.
pub fn block_resample<R: Rng + ?Sized>(
    residuals: &DMatrix<f64>,
    block: usize,
    centering: Centering,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (n, k) = residuals.shape();
    check_block(block, n)?;
    let starts = block_starts(n, block, rng);
    let mut out = DMatrix::zeros(n, k);
    for t in 0..n {
        let src = starts[t / block] + t % block;
        out.row_mut(t).copy_from(&residuals.row(src));
    }
    if centering == Centering::Bjt {
        let positions = n - block + 1;
        let overall = residuals.row_mean();
        // position_means[s] = mean of rows s ..= s + n - block
        let mut position_means = DMatrix::zeros(block, k);
        for s in 0..block {
            let m = residuals.rows(s, positions).row_mean();
            position_means.row_mut(s).copy_from(&m);
        }
        for t in 0..n {
            let s = t % block;
            let adj = &overall - position_means.row(s);
            let mut row = out.row_mut(t);
            row += adj;
        }
    }
    Ok(out)
}

/// Runs the VAR recursion forward from `initial` (the first `p` rows) with
/// the given innovations, returning a `(p + T_eff) x K` panel.
pub fn regenerate(
    intercept: &nalgebra::DVector<f64>,
    coeffs: &[DMatrix<f64>],
    initial: &DMatrix<f64>,
    innovations: &DMatrix<f64>,
) -> DMatrix<f64> {
    let p = coeffs.len();
    let (t_eff, k) = innovations.shape();
    let mut y = DMatrix::zeros(p + t_eff, k);
    y.rows_mut(0, p).copy_from(&initial.rows(0, p));
    for t in p..p + t_eff {
        let mut v = intercept.clone();
        for (i, a) in coeffs.iter().enumerate() {
            v += a * y.row(t - 1 - i).transpose();
        }
        v += innovations.row(t - p).transpose();
        y.row_mut(t).copy_from(&v.transpose());
    }
    y
}

pub fn regenerate_model(model: &VarModel, innovations: &DMatrix<f64>) -> DMatrix<f64> {
    let y = model.data.to_matrix();
    regenerate(
        &model.intercept,
        &model.coeffs,
        &y.rows(0, model.lags).into_owned(),
        innovations,
    )
}

/// Standard-error bands around point impulse responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    pub shocks: Vec<String>,
    pub variables: Vec<String>,
    /// `[shock][variable][h]`.
    pub point: Vec<Vec<Vec<f64>>>,
    pub se: Vec<Vec<Vec<f64>>>,
    pub replications: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub shock: String,
    pub variable: String,
    pub horizon: usize,
    pub point: f64,
    pub se: f64,
    pub lo1: f64,
    pub hi1: f64,
    pub lo2: f64,
    pub hi2: f64,
}

impl BandSet {
    pub fn lower(&self, j: usize, i: usize, h: usize, k: f64) -> f64 {
        self.point[j][i][h] - k * self.se[j][i][h]
    }

    pub fn upper(&self, j: usize, i: usize, h: usize, k: f64) -> f64 {
        self.point[j][i][h] + k * self.se[j][i][h]
    }

    pub fn rows(&self) -> Vec<BandRow> {
        let mut out = Vec::new();
        for (j, shock) in self.point.iter().enumerate() {
            for (i, path) in shock.iter().enumerate() {
                for (h, &point) in path.iter().enumerate() {
                    let se = self.se[j][i][h];
                    out.push(BandRow {
                        shock: self.shocks[j].clone(),
                        variable: self.variables[i].clone(),
                        horizon: h,
                        point,
                        se,
                        lo1: point - se,
                        hi1: point + se,
                        lo2: point - 2.0 * se,
                        hi2: point + 2.0 * se,
                    });
                }
            }
        }
        out
    }
}

/// Sample standard deviation of each coordinate across draws, summed in
/// draw order.
pub fn standard_errors(draws: &[Vec<f64>]) -> Vec<f64> {
    let n = draws.len();
    let dim = draws.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    for d in draws {
        for (m, v) in mean.iter_mut().zip(d) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut ss = vec![0.0; dim];
    for d in draws {
        for ((s, v), m) in ss.iter_mut().zip(d).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let denom = n.saturating_sub(1).max(1) as f64;
    ss.into_iter().map(|s| (s / denom).sqrt()).collect()
}

/// Drops failed replications and enforces the failure ceiling.
pub fn collect_draws(results: Vec<Option<Vec<f64>>>) -> Result<(Vec<Vec<f64>>, usize)> {
    let total = results.len();
    let draws: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let failed = total - draws.len();
    if failed as f64 > MAX_FAILURE_SHARE * total as f64 || draws.len() < 2 {
        return Err(Error::Bootstrap { failed, total });
    }
    if failed > 0 {
        log::warn!("{failed} of {total} bootstrap replications failed and were dropped");
    }
    Ok((draws, failed))
}

fn flatten(irf: &IrfSet) -> Vec<f64> {
    irf.responses.iter().flatten().flatten().copied().collect()
}

fn unflatten(flat: &[f64], k: usize, len: usize) -> Vec<Vec<Vec<f64>>> {
    (0..k)
        .map(|j| {
            (0..k)
                .map(|i| flat[(j * k + i) * len..(j * k + i + 1) * len].to_vec())
                .collect()
        })
        .collect()
}

/// One bootstrap replication's flattened IRFs, or `None` if re-estimation or
/// re-identification failed.
pub fn replication_irfs(
    model: &VarModel,
    anchor: &DMatrix<f64>,
    config: &BootstrapConfig,
    cumulate: &[bool],
    rep: usize,
) -> Option<Vec<f64>> {
    let mut rng = replication_rng(config.seed, rep);
    let u = block_resample(&model.residuals, config.block_length, config.centering, &mut rng).ok()?;
    let y = regenerate_model(model, &u);
    let fit = fit_var(&y, model.lags).ok()?;
    let (b0inv, _) = cholesky_identify(&fit.sigma_u).ok()?;
    let signs: Vec<f64> = (0..b0inv.ncols())
        .map(|j| {
            if b0inv.column(j).dot(&anchor.column(j)) < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    let ma = ma_coefficients(&fit.coeffs, &b0inv, config.horizon);
    let flat = flatten(&impulse_responses(&ma, cumulate, &signs));
    flat.iter().all(|v| v.is_finite()).then_some(flat)
}

/// Bootstrap standard errors for the identified impulse responses.
pub fn irf_bands(
    model: &VarModel,
    structural: &StructuralModel,
    config: &BootstrapConfig,
    cumulate: &[bool],
) -> Result<BandSet> {
    config.validate(model.t_eff())?;
    let k = model.k();
    let len = config.horizon + 1;
    let anchor = structural.impact();
    let point = impulse_responses(
        &ma_coefficients(&model.coeffs, &structural.b0inv, config.horizon),
        cumulate,
        &structural.signs,
    );
    let results: Vec<Option<Vec<f64>>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| replication_irfs(model, &anchor, config, cumulate, rep))
        .collect();
    let (draws, failed) = collect_draws(results)?;
    let se = standard_errors(&draws);
    Ok(BandSet {
        shocks: structural.labels.clone(),
        variables: model.names.clone(),
        point: point.responses,
        se: unflatten(&se, k, len),
        replications: draws.len(),
        failed,
    })
}
