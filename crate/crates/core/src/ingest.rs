//! Raw series loading and the transformations that produce the estimation
//! panel.
//!
//! Growth rates are natural-log differences (not scaled by 100). Missing
//! cells are carried as `None` and are only rejected when they fall inside
//! the requested estimation window.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::date::{DateRange, YearMonth};
use crate::error::{Error, Result};

/// Canonical column order of the estimation panel.
pub const PANEL_VARIABLES: [&str; 4] = [
    "oil_production_growth",
    "real_activity",
    "real_oil_price",
    "employment_growth",
];

/// Tokens read as a missing cell in columns that permit missing values.
const MISSING_TOKENS: [&str; 6] = ["", "na", "n/a", "nan", ".", "null"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Monthly,
    Quarterly,
}

impl Frequency {
    pub fn months(self) -> i64 {
        match self {
            Frequency::Monthly => 1,
            Frequency::Quarterly => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub name: String,
    pub freq: Frequency,
    pub observations: Vec<(YearMonth, Option<f64>)>,
}

impl RawSeries {
    /// Builds a series, checking that dates advance by exactly one period.
    pub fn new(name: impl Into<String>, freq: Frequency, observations: Vec<(YearMonth, Option<f64>)>) -> Result<Self> {
        let s = Self {
            name: name.into(),
            freq,
            observations,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_values(name: impl Into<String>, freq: Frequency, start: YearMonth, values: &[f64]) -> Result<Self> {
        let step = freq.months();
        let obs = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (start.add_months(i as i64 * step), Some(v)))
            .collect();
        Self::new(name, freq, obs)
    }

    fn validate(&self) -> Result<()> {
        let step = self.freq.months();
        if self.freq == Frequency::Quarterly {
            if let Some((d, _)) = self.observations.iter().find(|(d, _)| (d.month() - 1) % 3 != 0) {
                return Err(Error::Frequency(format!(
                    "quarterly series '{}' has date {d} not at a quarter start",
                    self.name
                )));
            }
        }
        for w in self.observations.windows(2) {
            let (a, b) = (w[0].0, w[1].0);
            if a == b {
                return Err(Error::DuplicateDate {
                    series: self.name.clone(),
                    date: a,
                });
            }
            if a.months_until(b) != step {
                return Err(Error::Frequency(format!(
                    "series '{}' jumps from {a} to {b}; expected a step of {step} month(s)",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = YearMonth> + '_ {
        self.observations.iter().map(|(d, _)| *d)
    }

    pub fn get(&self, date: YearMonth) -> Option<f64> {
        let first = self.observations.first()?.0;
        let off = first.months_until(date);
        if off < 0 || off % self.freq.months() != 0 {
            return None;
        }
        self.observations
            .get((off / self.freq.months()) as usize)
            .and_then(|(_, v)| *v)
    }

    /// Values with missing cells as NaN.
    pub fn values_nan(&self) -> Vec<f64> {
        self.observations.iter().map(|(_, v)| v.unwrap_or(f64::NAN)).collect()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// One declared CSV column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    /// Header text in the file.
    pub column: String,
    /// Name given to the loaded series.
    pub name: String,
    #[serde(default = "default_freq")]
    pub freq: Frequency,
    /// Whether missing-value tokens are accepted in this column.
    #[serde(default = "default_true")]
    pub allow_missing: bool,
}

fn default_freq() -> Frequency {
    Frequency::Monthly
}

fn default_true() -> bool {
    true
}

impl ColumnSpec {
    pub fn new(column: &str, name: &str, freq: Frequency) -> Self {
        Self {
            column: column.to_string(),
            name: name.to_string(),
            freq,
            allow_missing: true,
        }
    }

    pub fn strict(mut self) -> Self {
        self.allow_missing = false;
        self
    }
}

pub type CsvSchema = Vec<ColumnSpec>;

/// Loads the declared columns of a dated CSV file.
///
/// The first column must be `date` (`YYYY-MM`). Rows may appear in any order;
/// output observations are sorted by date.
pub fn load_csv(path: &Path, schema: &[ColumnSpec]) -> Result<Vec<RawSeries>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, &path.display().to_string(), schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, file: &str, schema: &[ColumnSpec]) -> Result<Vec<RawSeries>> {
    let perr = |row: usize, msg: String| Error::Parse {
        file: file.to_string(),
        row,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(|h| h.trim_start_matches('\u{feff}')) != Some("date") {
        return Err(perr(0, "first column must be 'date'".into()));
    }
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let cols: Vec<usize> = schema
        .iter()
        .map(|c| {
            index
                .get(c.column.as_str())
                .copied()
                .ok_or_else(|| perr(0, format!("declared column '{}' not present", c.column)))
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<(YearMonth, usize, Vec<Option<f64>>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let date: YearMonth = rec
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e: Error| perr(row, e.to_string()))?;
        let mut vals = Vec::with_capacity(schema.len());
        for (spec, &ci) in schema.iter().zip(&cols) {
            let cell = rec.get(ci).unwrap_or("");
            vals.push(parse_cell(cell, spec).map_err(|m| perr(row, m))?);
        }
        rows.push((date, row, vals));
    }
    rows.sort_by_key(|r| r.0);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(perr(w[1].1, format!("duplicate date {}", w[1].0)));
        }
    }

    schema
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let obs = rows.iter().map(|(d, _, v)| (*d, v[k])).collect();
            RawSeries::new(spec.name.clone(), spec.freq, obs)
        })
        .collect()
}

fn parse_cell(cell: &str, spec: &ColumnSpec) -> std::result::Result<Option<f64>, String> {
    if let Ok(v) = cell.parse::<f64>() {
        if v.is_finite() {
            return Ok(Some(v));
        }
    }
    let lower = cell.to_ascii_lowercase();
    if spec.allow_missing && MISSING_TOKENS.contains(&lower.as_str()) {
        return Ok(None);
    }
    Err(format!("non-numeric value '{cell}' in column '{}'", spec.column))
}

/// `ln(s[t]) - ln(s[t-1])`; the first date is dropped.
pub fn log_difference(s: &RawSeries) -> Result<RawSeries> {
    check_positive(s)?;
    let obs = s
        .observations
        .windows(2)
        .map(|w| {
            let v = match (w[0].1, w[1].1) {
                (Some(a), Some(b)) => Some(b.ln() - a.ln()),
                _ => None,
            };
            (w[1].0, v)
        })
        .collect();
    RawSeries::new(s.name.clone(), s.freq, obs)
}

/// Natural log of every observation.
pub fn log_level(s: &RawSeries) -> Result<RawSeries> {
    check_positive(s)?;
    let obs = s.observations.iter().map(|(d, v)| (*d, v.map(f64::ln))).collect();
    RawSeries::new(s.name.clone(), s.freq, obs)
}

fn check_positive(s: &RawSeries) -> Result<()> {
    if let Some((d, v)) = s.observations.iter().find(|(_, v)| matches!(v, Some(x) if *x <= 0.0)) {
        return Err(Error::Domain {
            series: s.name.clone(),
            date: *d,
            msg: format!("log of nonpositive value {}", v.unwrap()),
        });
    }
    Ok(())
}

/// Nominal divided by the price index on the common dates.
pub fn deflate(nominal: &RawSeries, cpi: &RawSeries) -> Result<RawSeries> {
    if nominal.freq != cpi.freq {
        return Err(Error::Frequency(format!(
            "cannot deflate {:?} series '{}' by {:?} series '{}'",
            nominal.freq, nominal.name, cpi.freq, cpi.name
        )));
    }
    let index: BTreeMap<YearMonth, Option<f64>> = cpi.observations.iter().copied().collect();
    let mut obs = Vec::new();
    for &(d, v) in &nominal.observations {
        let Some(&c) = index.get(&d) else { continue };
        if c == Some(0.0) {
            return Err(Error::Domain {
                series: cpi.name.clone(),
                date: d,
                msg: "zero price index".into(),
            });
        }
        obs.push((d, v.zip(c).map(|(n, c)| n / c)));
    }
    if obs.is_empty() {
        return Err(Error::Invalid(format!(
            "'{}' and '{}' share no dates",
            nominal.name, cpi.name
        )));
    }
    RawSeries::new(nominal.name.clone(), nominal.freq, obs)
}

/// Mean of each complete calendar quarter; partial edge quarters are dropped.
/// A quarter containing a missing month is kept as missing.
pub fn quarterly_average(s: &RawSeries) -> Result<RawSeries> {
    if s.freq != Frequency::Monthly {
        return Err(Error::Frequency(format!(
            "quarterly_average needs a monthly series, '{}' is quarterly",
            s.name
        )));
    }
    let mut out = Vec::new();
    let mut i = 0;
    let obs = &s.observations;
    while i < obs.len() {
        let (d, _) = obs[i];
        if (d.month() - 1) % 3 != 0 || i + 3 > obs.len() {
            i += 1;
            continue;
        }
        let vals: Option<Vec<f64>> = obs[i..i + 3].iter().map(|(_, v)| *v).collect();
        out.push((d, vals.map(|v| (v[0] + v[1] + v[2]) / 3.0)));
        i += 3;
    }
    if out.is_empty() {
        return Err(Error::InsufficientSample(format!(
            "'{}' contains no complete calendar quarter",
            s.name
        )));
    }
    RawSeries::new(s.name.clone(), Frequency::Quarterly, out)
}

/// Date-indexed panel of equal-length named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    pub start: YearMonth,
    pub freq: Frequency,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub mask: Vec<Vec<bool>>,
}

impl TimeSeriesFrame {
    pub fn from_columns(start: YearMonth, freq: Frequency, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Invalid("names and columns differ in count".into()));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Invalid("frame columns differ in length".into()));
        }
        let mask = columns
            .iter()
            .map(|c| c.iter().map(|v| !v.is_finite()).collect())
            .collect();
        Ok(Self {
            start,
            freq,
            names,
            columns,
            mask,
        })
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn date(&self, row: usize) -> YearMonth {
        self.start.add_months(row as i64 * self.freq.months())
    }

    pub fn dates(&self) -> Vec<YearMonth> {
        (0..self.nrows()).map(|r| self.date(r)).collect()
    }

    pub fn row_of(&self, date: YearMonth) -> Option<usize> {
        let off = self.start.months_until(date);
        let step = self.freq.months();
        (off >= 0 && off % step == 0 && ((off / step) as usize) < self.nrows()).then_some((off / step) as usize)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn has_missing(&self) -> bool {
        self.mask.iter().flatten().any(|&m| m)
    }

    /// Observations as a `T x K` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |r, c| self.columns[c][r])
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for r in 0..self.nrows() {
            let mut rec = vec![self.date(r).to_string()];
            rec.extend(self.columns.iter().map(|c| format!("{:?}", c[r])));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::Io {
            path: "<panel>".into(),
            source: e,
        })?;
        Ok(())
    }

    /// Reads a monthly panel written by [`TimeSeriesFrame::write_csv`]; all
    /// non-date columns are loaded in file order.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let header = text.lines().find(|l| !l.starts_with('#')).ok_or_else(|| Error::Parse {
            file: file.into(),
            row: 0,
            msg: "empty file".into(),
        })?;
        let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        let schema: Vec<ColumnSpec> = names
            .iter()
            .map(|n| ColumnSpec::new(n, n, Frequency::Monthly).strict())
            .collect();
        let series = read_csv(text.as_bytes(), file, &schema)?;
        let start = series
            .first()
            .and_then(|s| s.observations.first())
            .map(|o| o.0)
            .ok_or_else(|| Error::Parse {
                file: file.into(),
                row: 1,
                msg: "panel has no rows".into(),
            })?;
        let columns = series.iter().map(|s| s.values_nan()).collect();
        Self::from_columns(start, Frequency::Monthly, names, columns)
    }
}

/// Aligns the four transformed series into the estimation panel, ordered as
/// [`PANEL_VARIABLES`] regardless of input order.
pub fn build_panel(series: &[RawSeries], window: DateRange) -> Result<TimeSeriesFrame> {
    let mut columns = Vec::with_capacity(PANEL_VARIABLES.len());
    for name in PANEL_VARIABLES {
        let s = series
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Invalid(format!("panel series '{name}' not supplied")))?;
        if s.freq != Frequency::Monthly {
            return Err(Error::Frequency(format!("panel series '{name}' must be monthly")));
        }
        let mut col = Vec::with_capacity(window.len());
        let mut missing = Vec::new();
        for d in window.iter() {
            match s.get(d) {
                Some(v) => col.push(v),
                None => missing.push(d),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Coverage {
                series: name.to_string(),
                missing,
            });
        }
        columns.push(col);
    }
    TimeSeriesFrame::from_columns(
        window.start,
        Frequency::Monthly,
        PANEL_VARIABLES.iter().map(|s| s.to_string()).collect(),
        columns,
    )
}

/// Raw input series, in their published units.
#[derive(Debug, Clone)]
pub struct RawInputs {
    /// Global crude-oil production (level).
    pub oil_production: RawSeries,
    /// Index of global real economic activity, used as-is.
    pub real_activity: RawSeries,
    /// Nominal refiners' acquisition cost of imported crude.
    pub oil_price_nominal: RawSeries,
    pub cpi: RawSeries,
    /// Regional employment level.
    pub employment: RawSeries,
}

/// Applies the panel transformations: log growth of production and
/// employment, the activity index untouched, and the log of the
/// CPI-deflated oil price.
pub fn transform_inputs(raw: &RawInputs) -> Result<Vec<RawSeries>> {
    Ok(vec![
        log_difference(&raw.oil_production)?.renamed(PANEL_VARIABLES[0]),
        raw.real_activity.clone().renamed(PANEL_VARIABLES[1]),
        log_level(&deflate(&raw.oil_price_nominal, &raw.cpi)?)?.renamed(PANEL_VARIABLES[2]),
        log_difference(&raw.employment)?.renamed(PANEL_VARIABLES[3]),
    ])
}

/// Input files and the header of each series within them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSources {
    /// Production, activity index, nominal oil price and CPI, monthly.
    pub oil_market: PathBuf,
    pub employment: PathBuf,
    /// Quarterly nominal wage, dated by the first month of each quarter.
    #[serde(default)]
    pub wages: Option<PathBuf>,
    #[serde(default)]
    pub columns: ColumnNames,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnNames {
    pub oil_production: String,
    pub real_activity: String,
    pub oil_price: String,
    pub cpi: String,
    pub employment: String,
    pub wage: String,
}

impl Default for ColumnNames {
    fn default() -> Self {
        Self {
            oil_production: "oil_production".into(),
            real_activity: "igrea".into(),
            oil_price: "rac_nominal".into(),
            cpi: "cpi".into(),
            employment: "employment".into(),
            wage: "avg_weekly_wage".into(),
        }
    }
}

impl DataSources {
    /// Interprets relative paths against `base`.
    pub fn resolve(&self, base: &Path) -> Self {
        let join = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        Self {
            oil_market: join(&self.oil_market),
            employment: join(&self.employment),
            wages: self.wages.as_deref().map(join),
            columns: self.columns.clone(),
        }
    }

    pub fn load_inputs(&self) -> Result<RawInputs> {
        let c = &self.columns;
        let m = Frequency::Monthly;
        let mut market = load_csv(
            &self.oil_market,
            &[
                ColumnSpec::new(&c.oil_production, "oil_production", m),
                ColumnSpec::new(&c.real_activity, "real_activity", m),
                ColumnSpec::new(&c.oil_price, "oil_price_nominal", m),
                ColumnSpec::new(&c.cpi, "cpi", m),
            ],
        )?
        .into_iter();
        let mut emp = load_csv(&self.employment, &[ColumnSpec::new(&c.employment, "employment", m)])?;
        let mut next = || market.next().expect("one series per declared column");
        Ok(RawInputs {
            oil_production: next(),
            real_activity: next(),
            oil_price_nominal: next(),
            cpi: next(),
            employment: emp.remove(0),
        })
    }

    /// Quarterly nominal wage series, if configured.
    pub fn load_wages(&self) -> Result<Option<RawSeries>> {
        let Some(path) = &self.wages else { return Ok(None) };
        let mut s = load_csv(
            path,
            &[ColumnSpec::new(&self.columns.wage, "wage", Frequency::Quarterly)],
        )?;
        Ok(Some(s.remove(0)))
    }

    pub fn load_panel(&self, window: DateRange) -> Result<TimeSeriesFrame> {
        build_panel(&transform_inputs(&self.load_inputs()?)?, window)
    }
}
