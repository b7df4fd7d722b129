//! Table and JSON artifacts.
//!
//! CSV files start with one `#` provenance line, then a header, then rows
//! with numbers in fixed 6-decimal notation. JSON files hold
//! `{"provenance": ..., "data": ...}` where `data` is the full in-memory
//! result.

use std::fs;
use std::path::{Path, PathBuf};

use oilshock::bootstrap::BandSet;
use oilshock::date::{DateRange, YearMonth};
use oilshock::dynamics::{CounterfactualPath, FevdTable, HistDecomp, IrfSet};
use oilshock::identify::StructuralModel;
use oilshock::ingest::TimeSeriesFrame;
use oilshock::network::EmploymentResponse;
use oilshock::var::VarModel;
use oilshock::wages::WageRegression;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_sha256: String, seed: u64) -> Self {
        Self {
            tool: "oilshock".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn comment(&self) -> String {
        format!(
            "# {} {} config_sha256={} seed={}\n",
            self.tool, self.version, self.config_sha256, self.seed
        )
    }
}

pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    /// A value already rounded to millionths.
    Micros(i64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => fixed6(*v),
            Cell::Micros(m) => {
                let sign = if *m < 0 { "-" } else { "" };
                let a = m.unsigned_abs();
                format!("{sign}{}.{:06}", a / 1_000_000, a % 1_000_000)
            }
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<YearMonth> for Cell {
    fn from(d: YearMonth) -> Self {
        Cell::Text(d.to_string())
    }
}

/// `-0.000000` is printed as `0.000000` so sign noise in tiny values does
/// not show up in diffs.
pub fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Rounds percentages to millionths so that they still add up to exactly
/// `round(sum)` (largest-remainder rounding).
pub fn round_preserving_sum(values: &[f64]) -> Vec<i64> {
    let scaled: Vec<f64> = values.iter().map(|v| v * 1e6).collect();
    let target = scaled.iter().sum::<f64>().round() as i64;
    let mut out: Vec<i64> = scaled.iter().map(|v| v.floor() as i64).collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - scaled[a].floor();
        let fb = scaled[b] - scaled[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let short = target - out.iter().sum::<i64>();
    for &i in order.iter().cycle().take(short.max(0) as usize) {
        out[i] += 1;
    }
    out
}

pub trait Table: Serialize {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<Cell>>;
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn render_csv<T: Table + ?Sized>(table: &T, prov: &Provenance) -> Result<Vec<u8>, CliError> {
    let mut buf = prov.comment().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(table.header())?;
        for row in table.rows() {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush().map_err(|e| CliError::Io(format!("csv buffer: {e}")))?;
    }
    Ok(buf)
}

#[derive(Serialize)]
struct JsonOut<'a, T: ?Sized> {
    provenance: &'a Provenance,
    data: &'a T,
}

#[derive(Deserialize)]
struct JsonIn<T> {
    provenance: Provenance,
    data: T,
}

pub fn render_json<T: Serialize + ?Sized>(value: &T, prov: &Provenance) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(&JsonOut {
        provenance: prov,
        data: value,
    })?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Writes `table` to `path` in the given format.
pub fn emit_table<T: Table + ?Sized>(
    table: &T,
    format: Format,
    path: &Path,
    prov: &Provenance,
) -> Result<PathBuf, CliError> {
    let bytes = match format {
        Format::Csv => render_csv(table, prov)?,
        Format::Json => render_json(table, prov)?,
    };
    write_file(path, &bytes)?;
    Ok(path.to_path_buf())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<(Provenance, T), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let v: JsonIn<T> = serde_json::from_str(&text)?;
    Ok((v.provenance, v.data))
}

impl Table for TimeSeriesFrame {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["date".to_string()];
        h.extend(self.names.iter().cloned());
        h
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        (0..self.nrows())
            .map(|r| {
                let mut row = vec![Cell::from(self.date(r))];
                row.extend(self.columns.iter().map(|c| Cell::Num(c[r])));
                row
            })
            .collect()
    }
}

impl Table for VarModel {
    fn header(&self) -> Vec<String> {
        strings(&["equation", "regressor", "lag", "coefficient"])
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        let mut out = Vec::new();
        for (i, eq) in self.names.iter().enumerate() {
            out.push(vec![
                eq.as_str().into(),
                "const".into(),
                0usize.into(),
                self.intercept[i].into(),
            ]);
            for (l, a) in self.coeffs.iter().enumerate() {
                for (j, x) in self.names.iter().enumerate() {
                    out.push(vec![
                        eq.as_str().into(),
                        x.as_str().into(),
                        (l + 1).into(),
                        a[(i, j)].into(),
                    ]);
                }
            }
        }
        out
    }
}

/// Identified model together with the panel's variable names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identified {
    pub variables: Vec<String>,
    pub model: StructuralModel,
}

impl Table for Identified {
    fn header(&self) -> Vec<String> {
        strings(&["variable", "shock", "impact"])
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        let b = self.model.impact();
        let mut out = Vec::new();
        for (i, var) in self.variables.iter().enumerate() {
            for (j, shock) in self.model.labels.iter().enumerate() {
                out.push(vec![var.as_str().into(), shock.as_str().into(), b[(i, j)].into()]);
            }
        }
        out
    }
}

impl Table for IrfSet {
    fn header(&self) -> Vec<String> {
        strings(&["shock", "variable", "horizon", "response"])
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        let mut out = Vec::new();
        for (j, shock) in self.responses.iter().enumerate() {
            for (i, path) in shock.iter().enumerate() {
                for (h, v) in path.iter().enumerate() {
                    out.push(vec![
                        self.shocks[j].as_str().into(),
                        self.variables[i].as_str().into(),
                        h.into(),
                        (*v).into(),
                    ]);
                }
            }
        }
        out
    }
}

/// Shares are rounded per (variable, horizon) so each printed row set
/// adds up to exactly 100.000000.
impl Table for FevdTable {
    fn header(&self) -> Vec<String> {
        strings(&["variable", "shock", "horizon", "share"])
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        let mut out = Vec::new();
        for (i, var) in self.variables.iter().enumerate() {
            for (hi, h) in self.horizons.iter().enumerate() {
                let shares: Vec<f64> = self.shares[i].iter().map(|s| s[hi]).collect();
                for (j, m) in round_preserving_sum(&shares).into_iter().enumerate() {
                    out.push(vec![
                        var.as_str().into(),
                        self.shocks[j].as_str().into(),
                        h.to_string().into(),
                        Cell::Micros(m),
                    ]);
                }
            }
        }
        out
    }
}

impl Table for BandSet {
    fn header(&self) -> Vec<String> {
        strings(&[
            "shock", "variable", "horizon", "point", "se", "lo1", "hi1", "lo2", "hi2",
        ])
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.rows()
            .into_iter()
            .map(|r| {
                vec![
                    r.shock.into(),
                    r.variable.into(),
                    r.horizon.into(),
                    r.point.into(),
                    r.se.into(),
                    r.lo1.into(),
                    r.hi1.into(),
                    r.lo2.into(),
                    r.hi2.into(),
                ]
            })
            .collect()
    }
}

/// Wide historical decomposition: one row per (date, variable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistDecompTable {
    pub shocks: Vec<String>,
    pub rows: Vec<HistDecompRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistDecompRow {
    pub date: YearMonth,
    pub variable: String,
    pub observed: f64,
    pub base: f64,
    pub contributions: Vec<f64>,
}

impl From<&HistDecomp> for HistDecompTable {
    fn from(hd: &HistDecomp) -> Self {
        let mut rows = Vec::with_capacity(hd.dates.len() * hd.variables.len());
        for (t, date) in hd.dates.iter().enumerate() {
            for (i, var) in hd.variables.iter().enumerate() {
                rows.push(HistDecompRow {
                    date: *date,
                    variable: var.clone(),
                    observed: hd.observed[(t, i)],
                    base: hd.base[(t, i)],
                    contributions: hd.contributions.iter().map(|c| c[(t, i)]).collect(),
                });
            }
        }
        Self {
            shocks: hd.shocks.clone(),
            rows,
        }
    }
}

impl Table for HistDecompTable {
    fn header(&self) -> Vec<String> {
        let mut h = strings(&["date", "variable", "observed", "base"]);
        h.extend(self.shocks.iter().cloned());
        h
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.date.into(),
                    r.variable.as_str().into(),
                    r.observed.into(),
                    r.base.into(),
                ];
                row.extend(r.contributions.iter().map(|c| Cell::Num(*c)));
                row
            })
            .collect()
    }
}

/// Level paths for one window; `shock_removed = None` is the observed path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualTable {
    pub variable: String,
    pub window: DateRange,
    pub paths: Vec<CounterfactualPath>,
}

impl Table for CounterfactualTable {
    fn header(&self) -> Vec<String> {
        strings(&["shock_removed", "date", "growth", "level"])
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        let mut out = Vec::new();
        for p in &self.paths {
            let label = p.shock_removed.as_deref().unwrap_or("none");
            for ((d, g), l) in p.dates.iter().zip(&p.growth).zip(&p.levels) {
                out.push(vec![label.into(), (*d).into(), (*g).into(), (*l).into()]);
            }
        }
        out
    }
}

impl Table for WageRegression {
    fn header(&self) -> Vec<String> {
        strings(&["shock", "lag", "phi", "cumulative"])
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.phi
            .iter()
            .zip(&self.cumulative_irf)
            .enumerate()
            .map(|(l, (p, c))| vec![self.shock.as_str().into(), l.into(), (*p).into(), (*c).into()])
            .collect()
    }
}

impl Table for EmploymentResponse {
    fn header(&self) -> Vec<String> {
        strings(&["sector", "dln_l", "own_income", "own_demand", "network", "dl"])
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        (0..self.dln_l.len())
            .map(|i| {
                vec![
                    (i + 1).into(),
                    self.dln_l[i].into(),
                    self.own_income[i].into(),
                    self.own_demand[i].into(),
                    self.network[i].into(),
                    self.dl[i].into(),
                ]
            })
            .collect()
    }
}
