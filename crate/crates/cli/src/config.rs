//! Run configuration, read from a TOML file.
//!
//! Every key is optional; a missing key takes the default used for the
//! bundled fixture run (12 lags, 2000 replications of block length 24,
//! 15-month responses). Relative input paths are resolved against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use oilshock::bootstrap::BootstrapConfig;
use oilshock::date::{DateRange, YearMonth};
use oilshock::dynamics::{Compounding, Convention, Horizon};
use oilshock::identify::SHOCK_LABELS;
use oilshock::ingest::{ColumnNames, DataSources};
use oilshock::var::DEFAULT_LAGS;
use oilshock::wages;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSources,
    /// Panel window before lags are dropped. Defaults to the full span
    /// covered by every transformed series.
    pub sample: Option<DateRange>,
    pub lags: usize,
    pub output_dir: PathBuf,
    pub bootstrap: BootstrapConfig,
    pub fevd: FevdConfig,
    pub counterfactual: CounterfactualConfig,
    pub wages: WageConfig,
    pub network: Option<NetworkConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FevdConfig {
    pub horizons: Vec<Horizon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualConfig {
    pub windows: Vec<DateRange>,
    pub convention: Convention,
    pub compounding: Compounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WageConfig {
    pub shock: String,
    pub lags: usize,
    pub block_length: usize,
    pub replications: usize,
    /// Falls back to the VAR bootstrap seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub spec: PathBuf,
    pub d_omega: f64,
    pub dz_tilde: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSources {
                oil_market: "fixtures/oil_market.csv".into(),
                employment: "fixtures/kern_employment.csv".into(),
                wages: Some("fixtures/kern_wages.csv".into()),
                columns: ColumnNames::default(),
            },
            sample: None,
            lags: DEFAULT_LAGS,
            output_dir: "out".into(),
            bootstrap: BootstrapConfig::default(),
            fevd: FevdConfig::default(),
            counterfactual: CounterfactualConfig::default(),
            wages: WageConfig::default(),
            network: None,
        }
    }
}

impl Default for FevdConfig {
    fn default() -> Self {
        Self {
            horizons: vec![
                Horizon::Finite(1),
                Horizon::Finite(2),
                Horizon::Finite(3),
                Horizon::Finite(12),
                Horizon::Infinite,
            ],
        }
    }
}

fn range(a: &str, b: &str) -> DateRange {
    DateRange::new(a.parse::<YearMonth>().unwrap(), b.parse::<YearMonth>().unwrap()).unwrap()
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        Self {
            windows: vec![range("1997-01", "2009-12"), range("2010-01", "2024-12")],
            convention: Convention::ExactIdentity,
            compounding: Compounding::Log,
        }
    }
}

impl Default for WageConfig {
    fn default() -> Self {
        Self {
            shock: SHOCK_LABELS[2].into(),
            lags: wages::DEFAULT_LAGS,
            block_length: wages::DEFAULT_BLOCK,
            replications: wages::DEFAULT_REPLICATIONS,
            seed: None,
        }
    }
}

/// A validated config together with where its relative paths point.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = Self::parse(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, base_dir })
    }

    /// Checks that need no data.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.lags == 0 {
            return bad("lags must be at least 1".into());
        }
        if let Some(s) = self.sample {
            if s.end < s.start {
                return bad(format!("sample {s} is empty"));
            }
        }
        let b = &self.bootstrap;
        if b.replications < 2 {
            return bad("bootstrap.replications must be at least 2".into());
        }
        if b.block_length == 0 {
            return bad("bootstrap.block_length must be at least 1".into());
        }
        if self.fevd.horizons.is_empty() {
            return bad("fevd.horizons is empty".into());
        }
        for w in &self.counterfactual.windows {
            if w.end <= w.start {
                return bad(format!("counterfactual window {w} needs at least two months"));
            }
        }
        let w = &self.wages;
        if !SHOCK_LABELS.contains(&w.shock.as_str()) {
            return bad(format!(
                "wages.shock '{}' is not one of {}",
                w.shock,
                SHOCK_LABELS.join(", ")
            ));
        }
        if w.replications < 2 || w.block_length == 0 {
            return bad("wages bootstrap needs replications >= 2 and block_length >= 1".into());
        }
        if let Some(n) = &self.network {
            if !n.d_omega.is_finite() || n.dz_tilde.iter().any(|v| !v.is_finite()) {
                return bad("network shock must be finite".into());
            }
        }
        Ok(())
    }

    /// Checks windows against the effective sample, `sample.start + lags`
    /// through `sample.end`.
    pub fn validate_coverage(&self, sample: DateRange) -> Result<(), CliError> {
        let start = sample.start.add_months(self.lags as i64);
        if start > sample.end {
            return Err(CliError::Config(format!(
                "sample {sample} is shorter than {} lags",
                self.lags
            )));
        }
        let eff = DateRange::new(start, sample.end)?;
        for w in &self.counterfactual.windows {
            if !eff.contains(w.start) || !eff.contains(w.end) {
                return Err(CliError::Config(format!(
                    "counterfactual window {w} lies outside the effective sample {eff}"
                )));
            }
        }
        Ok(())
    }

    pub fn wage_seed(&self) -> u64 {
        self.wages.seed.unwrap_or(self.bootstrap.seed)
    }

    /// SHA-256 of the canonical JSON form, so overrides from the command
    /// line change the hash.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl LoadedConfig {
    pub fn defaults() -> Self {
        Self {
            config: RunConfig::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn sources(&self) -> DataSources {
        self.config.data.resolve(&self.base_dir)
    }

    pub fn network_spec(&self) -> Option<PathBuf> {
        self.config.network.as_ref().map(|n| {
            if n.spec.is_relative() {
                self.base_dir.join(&n.spec)
            } else {
                n.spec.clone()
            }
        })
    }
}
