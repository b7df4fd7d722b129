//! Moving-average dynamics of an identified VAR: impulse responses, forecast
//! error variance decompositions, historical decompositions and
//! counterfactual level paths.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::date::{DateRange, YearMonth};
use crate::error::{Error, Result};
use crate::identify::StructuralModel;
use crate::linalg;
use crate::var::{self, VarModel};

/// Cumulation flags for the four-variable panel: growth rates are cumulated,
/// the activity index and log real price are not.
pub const CUMULATE_DEFAULT: [bool; 4] = [true, false, false, true];

pub const DEFAULT_HORIZON: usize = 15;

/// Fixed-point tolerance of the infinite-horizon Lyapunov solve.
pub const LYAPUNOV_TOL: f64 = 1e-12;

/// Structural moving-average coefficients `Theta_0 .. Theta_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaSequence {
    pub theta: Vec<DMatrix<f64>>,
}

impl MaSequence {
    pub fn horizon(&self) -> usize {
        self.theta.len() - 1
    }
}

/// Reduced-form MA coefficients: `Phi_0 = I`,
/// `Phi_h = sum_{i=1}^{min(h,p)} A_i Phi_{h-i}`.
pub fn reduced_form_ma(coeffs: &[DMatrix<f64>], k: usize, horizon: usize) -> Vec<DMatrix<f64>> {
    let mut phi: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    phi.push(DMatrix::identity(k, k));
    for h in 1..=horizon {
        let mut acc = DMatrix::zeros(k, k);
        for (i, a) in coeffs.iter().enumerate().take(h) {
            acc += a * &phi[h - 1 - i];
        }
        phi.push(acc);
    }
    phi
}

/// `Theta_h = Phi_h b0inv`, so `Theta_0` is `b0inv` itself.
pub fn ma_coefficients(coeffs: &[DMatrix<f64>], b0inv: &DMatrix<f64>, horizon: usize) -> MaSequence {
    let k = b0inv.nrows();
    let mut theta: Vec<DMatrix<f64>> = reduced_form_ma(coeffs, k, horizon)
        .iter()
        .map(|phi| phi * b0inv)
        .collect();
    theta[0] = b0inv.clone();
    MaSequence { theta }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfSet {
    pub shocks: Vec<String>,
    pub variables: Vec<String>,
    pub cumulative: Vec<bool>,
    /// `responses[shock][variable][h]` for `h = 0 ..= horizon`.
    pub responses: Vec<Vec<Vec<f64>>>,
}

impl IrfSet {
    pub fn horizon(&self) -> usize {
        self.responses
            .first()
            .and_then(|v| v.first())
            .map_or(0, |r| r.len().saturating_sub(1))
    }

    pub fn get(&self, shock: usize, variable: usize, h: usize) -> f64 {
        self.responses[shock][variable][h]
    }

    pub fn labeled(mut self, shocks: &[String], variables: &[String]) -> Self {
        self.shocks = shocks.to_vec();
        self.variables = variables.to_vec();
        self
    }
}

/// `response[j][i][h] = s_j (Theta_h)_{ij}`, running-summed over `h` for the
/// flagged variables.
pub fn impulse_responses(ma: &MaSequence, cumulate: &[bool], signs: &[f64]) -> IrfSet {
    let k = ma.theta[0].nrows();
    let mut responses = vec![vec![Vec::with_capacity(ma.theta.len()); k]; k];
    for (j, shock) in responses.iter_mut().enumerate() {
        let s = signs.get(j).copied().unwrap_or(1.0);
        for (i, path) in shock.iter_mut().enumerate() {
            let cum = cumulate.get(i).copied().unwrap_or(false);
            let mut acc = 0.0;
            for th in &ma.theta {
                let v = s * th[(i, j)];
                if cum {
                    acc += v;
                    path.push(acc);
                } else {
                    path.push(v);
                }
            }
        }
    }
    IrfSet {
        shocks: (1..=k).map(|j| format!("shock{j}")).collect(),
        variables: (1..=k).map(|i| format!("y{i}")).collect(),
        cumulative: (0..k).map(|i| cumulate.get(i).copied().unwrap_or(false)).collect(),
        responses,
    }
}

/// Convenience: identified IRFs with the model's labels and sign
/// normalization.
pub fn model_irfs(model: &VarModel, structural: &StructuralModel, horizon: usize, cumulate: &[bool]) -> IrfSet {
    let ma = ma_coefficients(&model.coeffs, &structural.b0inv, horizon);
    impulse_responses(&ma, cumulate, &structural.signs).labeled(&structural.labels, &model.names)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(h) => write!(f, "{h}"),
            Horizon::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            return Ok(Horizon::Infinite);
        }
        match t.parse::<usize>() {
            Ok(h) if h >= 1 => Ok(Horizon::Finite(h)),
            _ => Err(Error::Invalid(format!("bad forecast horizon '{s}'"))),
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let s = match v {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_horizons(list: &str) -> Result<Vec<Horizon>> {
    list.split(',').map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FevdTable {
    pub variables: Vec<String>,
    pub shocks: Vec<String>,
    pub horizons: Vec<Horizon>,
    /// Percent shares, `shares[variable][shock][horizon index]`.
    pub shares: Vec<Vec<Vec<f64>>>,
}

/// Forecast error variance decomposition.
///
/// For a finite horizon `h` the MSE sums `Theta_0 .. Theta_{h-1}`; the
/// infinite horizon solves the companion-form Lyapunov equation instead of
/// truncating the sum.
pub fn fevd(coeffs: &[DMatrix<f64>], b0inv: &DMatrix<f64>, horizons: &[Horizon]) -> Result<FevdTable> {
    let k = b0inv.nrows();
    let max_h = horizons
        .iter()
        .filter_map(|h| match h {
            Horizon::Finite(h) => Some(*h),
            Horizon::Infinite => None,
        })
        .max()
        .unwrap_or(1);
    if horizons.contains(&Horizon::Finite(0)) {
        return Err(Error::Invalid("forecast horizon must be at least 1".into()));
    }
    let ma = ma_coefficients(coeffs, b0inv, max_h.saturating_sub(1));
    // cumulative squared responses: cum[h-1][(i, j)] = sum_{k<h} theta_k(i,j)^2
    let mut cum = Vec::with_capacity(ma.theta.len());
    let mut acc = DMatrix::<f64>::zeros(k, k);
    for th in &ma.theta {
        acc += th.component_mul(th);
        cum.push(acc.clone());
    }
    let infinite = if horizons.contains(&Horizon::Infinite) {
        Some(infinite_mse_contributions(coeffs, b0inv)?)
    } else {
        None
    };

    let mut shares = vec![vec![Vec::with_capacity(horizons.len()); k]; k];
    for h in horizons {
        let contrib = match h {
            Horizon::Finite(h) => &cum[h - 1],
            Horizon::Infinite => infinite.as_ref().expect("computed above"),
        };
        for i in 0..k {
            let total: f64 = contrib.row(i).sum();
            for j in 0..k {
                let share = if total > 0.0 {
                    100.0 * (contrib[(i, j)] / total)
                } else {
                    0.0
                };
                shares[i][j].push(share);
            }
        }
    }
    Ok(FevdTable {
        variables: (1..=k).map(|i| format!("y{i}")).collect(),
        shocks: (1..=k).map(|j| format!("shock{j}")).collect(),
        horizons: horizons.to_vec(),
        shares,
    })
}

pub fn model_fevd(model: &VarModel, structural: &StructuralModel, horizons: &[Horizon]) -> Result<FevdTable> {
    let mut t = fevd(&model.coeffs, &structural.b0inv, horizons)?;
    t.variables = model.names.clone();
    t.shocks = structural.labels.clone();
    Ok(t)
}

/// `(i, j)` entry: `sum_{k>=0} (Theta_k)_{ij}^2`.
pub fn infinite_mse_contributions(coeffs: &[DMatrix<f64>], b0inv: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = b0inv.nrows();
    let cf = var::companion_of(coeffs);
    if !var::is_stable(&cf, 0.0) {
        return Err(Error::Unstable {
            modulus: cf.max_modulus(),
        });
    }
    let n = cf.matrix.nrows();
    let mut out = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut b = DMatrix::zeros(n, 1);
        b.view_mut((0, 0), (k, 1)).copy_from(&b0inv.column(j));
        let q = &b * b.transpose();
        let s = linalg::lyapunov(&cf.matrix, &q, LYAPUNOV_TOL)?;
        for i in 0..k {
            out[(i, j)] = s[(i, i)];
        }
    }
    Ok(out)
}

/// Additive attribution of each observation to current and past structural
/// shocks within the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HistDecomp {
    pub dates: Vec<YearMonth>,
    pub variables: Vec<String>,
    pub shocks: Vec<String>,
    /// One `T_eff x K` matrix per shock; entry `(t, i)` is
    /// `sum_{k=0}^{t} (Theta_k)_{ij} w_{j,t-k}`.
    pub contributions: Vec<DMatrix<f64>>,
    /// Intercept and pre-sample initial-condition remainder.
    pub base: DMatrix<f64>,
    /// The decomposed series (demeaned if requested).
    pub observed: DMatrix<f64>,
    /// Sample mean removed from `observed`, when demeaning.
    pub mean: Option<DVector<f64>>,
}

impl HistDecomp {
    /// Sum of shock contributions without the base term: the truncated
    /// moving-average fit.
    pub fn truncated_fit(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.base.nrows(), self.base.ncols());
        for c in &self.contributions {
            s += c;
        }
        s
    }

    pub fn row_of(&self, date: YearMonth) -> Option<usize> {
        self.dates.iter().position(|d| *d == date)
    }
}

pub fn historical_decomposition(model: &VarModel, structural: &StructuralModel, demean: bool) -> HistDecomp {
    let t_eff = model.t_eff();
    let k = model.k();
    let ma = ma_coefficients(&model.coeffs, &structural.b0inv, t_eff.saturating_sub(1));
    let w = &structural.shocks;
    let mut contributions = vec![DMatrix::zeros(t_eff, k); k];
    for (j, contrib) in contributions.iter_mut().enumerate() {
        for t in 0..t_eff {
            for i in 0..k {
                let mut s = 0.0;
                for lag in 0..=t {
                    s += ma.theta[lag][(i, j)] * w[(t - lag, j)];
                }
                contrib[(t, i)] = s;
            }
        }
    }
    let mut observed = model.observed();
    let mean = demean.then(|| {
        let m = observed.row_mean().transpose();
        for mut row in observed.row_iter_mut() {
            row -= m.transpose();
        }
        m
    });
    let mut base = observed.clone();
    for c in &contributions {
        base -= c;
    }
    HistDecomp {
        dates: model.sample.iter().collect(),
        variables: model.names.clone(),
        shocks: structural.labels.clone(),
        contributions,
        base,
        observed,
        mean,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `growth = observed - contribution_j`; removing nothing reproduces the
    /// data exactly.
    #[default]
    ExactIdentity,
    /// Sum of the remaining shocks' contributions plus the window-average
    /// growth rate.
    #[serde(alias = "paper")]
    WindowMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compounding {
    /// `level_t = level_{t-1} exp(g_t)`, matching log-difference growth.
    #[default]
    Log,
    /// `level_t = level_{t-1} (1 + g_t)`.
    Simple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualSpec {
    /// Panel column holding the growth rate whose level is rebuilt.
    pub variable: usize,
    pub remove: Option<usize>,
    pub window: DateRange,
    /// Observed level at `window.start`.
    pub base_level: f64,
    /// Average growth over the window; used only by [`Convention::WindowMean`].
    pub mean_growth: f64,
    pub convention: Convention,
    pub compounding: Compounding,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualPath {
    pub shock_removed: Option<String>,
    pub dates: Vec<YearMonth>,
    pub levels: Vec<f64>,
    pub growth: Vec<f64>,
}

impl CounterfactualPath {
    pub fn level_at(&self, date: YearMonth) -> Option<f64> {
        self.dates.iter().position(|d| *d == date).map(|i| self.levels[i])
    }
}

/// Rebuilds the level of `spec.variable` over the window with one shock's
/// contribution removed from its growth rate.
pub fn counterfactual_levels(hd: &HistDecomp, spec: &CounterfactualSpec) -> Result<CounterfactualPath> {
    let k = hd.contributions.len();
    if let Some(j) = spec.remove {
        if j >= k {
            return Err(Error::UnknownShock(format!("shock index {j}")));
        }
    }
    let t0 = hd.row_of(spec.window.start).ok_or_else(|| {
        Error::Invalid(format!(
            "counterfactual start {} is outside the effective sample",
            spec.window.start
        ))
    })?;
    let t1 = hd.row_of(spec.window.end).ok_or_else(|| {
        Error::Invalid(format!(
            "counterfactual end {} is outside the effective sample",
            spec.window.end
        ))
    })?;
    let i = spec.variable;
    let mean_offset = hd.mean.as_ref().map_or(0.0, |m| m[i]);

    let mut growth = Vec::with_capacity(t1 - t0 + 1);
    for t in t0..=t1 {
        let g = match spec.convention {
            Convention::ExactIdentity => {
                let removed = spec.remove.map_or(0.0, |j| hd.contributions[j][(t, i)]);
                hd.observed[(t, i)] + mean_offset - removed
            }
            Convention::WindowMean => {
                let kept: f64 = (0..k)
                    .filter(|&j| Some(j) != spec.remove)
                    .map(|j| hd.contributions[j][(t, i)])
                    .sum();
                spec.mean_growth + kept
            }
        };
        growth.push(g);
    }
    let mut levels = Vec::with_capacity(growth.len());
    levels.push(spec.base_level);
    for g in &growth[1..] {
        let prev = *levels.last().expect("nonempty");
        levels.push(match spec.compounding {
            Compounding::Log => prev * g.exp(),
            Compounding::Simple => prev * (1.0 + g),
        });
    }
    Ok(CounterfactualPath {
        shock_removed: spec.remove.map(|j| hd.shocks[j].clone()),
        dates: hd.dates[t0..=t1].to_vec(),
        levels,
        growth,
    })
}

/// Average observed growth of `variable` over the months that build the
/// window's level path (`window.start` excluded).
pub fn window_mean_growth(hd: &HistDecomp, variable: usize, window: DateRange) -> Result<f64> {
    let (t0, t1) = match (hd.row_of(window.start), hd.row_of(window.end)) {
        (Some(a), Some(b)) if b > a => (a, b),
        _ => {
            return Err(Error::Invalid(format!(
                "window {window} is not inside the effective sample"
            )))
        }
    };
    let offset = hd.mean.as_ref().map_or(0.0, |m| m[variable]);
    let sum: f64 = (t0 + 1..=t1).map(|t| hd.observed[(t, variable)] + offset).sum();
    Ok(sum / (t1 - t0) as f64)
}
