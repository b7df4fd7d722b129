use std::path::PathBuf;

use thiserror::Error;

use crate::date::YearMonth;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file} row {row}: {msg}")]
    Parse { file: String, row: usize, msg: String },

    #[error("invalid date '{0}': expected YYYY-MM")]
    Date(String),

    #[error("duplicate date {date} in series '{series}'")]
    DuplicateDate { series: String, date: YearMonth },

    #[error("domain error in series '{series}' at {date}: {msg}")]
    Domain {
        series: String,
        date: YearMonth,
        msg: String,
    },

    #[error("coverage gap in series '{series}': missing {}", fmt_dates(.missing))]
    Coverage { series: String, missing: Vec<YearMonth> },

    #[error("frequency error: {0}")]
    Frequency(String),

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("matrix not positive definite: leading minor {minor} is not positive")]
    NotPositiveDefinite { minor: usize },

    #[error("model is not stable (max companion modulus {modulus:.6})")]
    Unstable { modulus: f64 },

    #[error("unknown shock '{0}'")]
    UnknownShock(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("bootstrap failed: {failed} of {total} replications could not be estimated")]
    Bootstrap { failed: usize, total: usize },

    #[error("network error: {0}")]
    Network(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn fmt_dates(dates: &[YearMonth]) -> String {
    const SHOWN: usize = 12;
    let mut out: Vec<String> = dates.iter().take(SHOWN).map(|d| d.to_string()).collect();
    if dates.len() > SHOWN {
        out.push(format!("... ({} total)", dates.len()));
    }
    out.join(", ")
}
