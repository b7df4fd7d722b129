//! Subcommands. Each one runs the pipeline as far as it needs, starting
//! from the input files, and writes its tables to the output directory.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use oilshock::bootstrap::{irf_bands, Centering};
use oilshock::date::{DateRange, YearMonth};
use oilshock::dynamics::{
    counterfactual_levels, historical_decomposition, model_fevd, model_irfs, parse_horizons, window_mean_growth,
    Compounding, Convention, CounterfactualSpec, HistDecomp, CUMULATE_DEFAULT,
};
use oilshock::identify::{identify, StructuralModel};
use oilshock::ingest::{build_panel, transform_inputs, RawInputs, RawSeries, TimeSeriesFrame, PANEL_VARIABLES};
use oilshock::network::{employment_response, IONetwork, OilShock};
use oilshock::var::{companion, estimate_ols, is_stable, VarModel};
use oilshock::wages::{aggregate_shocks, fit_wage_design, real_wage_growth, wage_bands, wage_design, WageBootstrap};
use oilshock::Error;

use crate::config::{LoadedConfig, NetworkConfig, RunConfig};
use crate::report::{emit_table, CounterfactualTable, Format, HistDecompTable, Identified, Provenance, Table};
use crate::CliError;

/// Column of the employment growth rate in the panel.
const EMPLOYMENT: usize = 3;

#[derive(Debug, Parser)]
#[command(
    name = "oilshock",
    version,
    about = "Structural VAR of the oil market and regional employment"
)]
pub struct Cli {
    /// Run configuration (TOML). Without it the built-in defaults are used,
    /// reading `fixtures/*.csv` from the working directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true, env = "OILSHOCK_OUT_DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// VAR lag order.
    #[arg(long, global = true)]
    pub lags: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the estimation panel from the input files.
    Ingest,
    /// Fit the reduced-form VAR.
    Estimate,
    /// Recursive identification; writes the impact matrix.
    Identify,
    /// Impulse responses to one-standard-deviation shocks.
    Irf {
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Forecast error variance decomposition.
    Fevd {
        /// Comma-separated list, e.g. `1,2,3,12,inf`.
        #[arg(long)]
        horizons: Option<String>,
    },
    /// Historical decomposition of every panel variable.
    Histdecomp,
    /// Employment levels with shocks removed.
    Counterfactual(CounterfactualArgs),
    /// Bootstrap standard-error bands for the impulse responses.
    Bands(BandArgs),
    /// Cumulative real-wage response to quarterly shocks.
    Wages(WageArgs),
    /// Sector employment response in an input-output network.
    Network(NetworkArgs),
    /// Every step above, in order.
    Replicate,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    /// Shock to remove, or `none`. Default: each shock in turn.
    #[arg(long)]
    pub remove: Option<String>,
    /// Window start (YYYY-MM); replaces the configured windows.
    #[arg(long, requires = "to")]
    pub from: Option<YearMonth>,
    #[arg(long, requires = "from")]
    pub to: Option<YearMonth>,
    /// Window-mean growth plus the retained contributions.
    #[arg(long)]
    pub paper_convention: bool,
    #[arg(long, value_parser = ["log", "simple"])]
    pub compounding: Option<String>,
}

#[derive(Debug, Args)]
pub struct BandArgs {
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_parser = ["bjt", "none"])]
    pub centering: Option<String>,
}

#[derive(Debug, Args)]
pub struct WageArgs {
    #[arg(long)]
    pub shock: Option<String>,
    /// Lags of the quarterly shock in the wage regression.
    #[arg(long)]
    pub wage_lags: Option<usize>,
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Network description (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub domega: Option<f64>,
    /// Comma-separated demand shifts, one per sector.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pub dz: Option<Vec<f64>>,
}

/// Loads the config, applies command-line overrides and runs the command.
/// Returns the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut loaded = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => LoadedConfig::defaults(),
    };
    apply_overrides(&mut loaded.config, cli)?;
    loaded.config.validate()?;
    let out_dir = cli.out.clone().unwrap_or_else(|| loaded.config.output_dir.clone());
    let run = Run {
        prov: Provenance::new(loaded.config.hash(), loaded.config.bootstrap.seed),
        cfg: loaded,
        out_dir,
        format: cli.format,
    };
    match &cli.command {
        Command::Ingest => run.ingest(),
        Command::Estimate => run.estimate(),
        Command::Identify => run.identify(),
        Command::Irf { .. } => run.irf(),
        Command::Fevd { .. } => run.fevd(),
        Command::Histdecomp => run.histdecomp(),
        Command::Counterfactual(a) => run.counterfactual(a.remove.as_deref()),
        Command::Bands(_) => run.bands(),
        Command::Wages(_) => run.wages(),
        Command::Network(_) => run.network(),
        Command::Replicate => run.replicate(),
    }
}

fn apply_overrides(c: &mut RunConfig, cli: &Cli) -> Result<(), CliError> {
    if let Some(p) = cli.lags {
        c.lags = p;
    }
    match &cli.command {
        Command::Irf { horizon: Some(h) } => c.bootstrap.horizon = *h,
        Command::Fevd { horizons: Some(h) } => {
            c.fevd.horizons = parse_horizons(h).map_err(|e| CliError::Usage(e.to_string()))?
        }
        Command::Counterfactual(a) => {
            if let (Some(from), Some(to)) = (a.from, a.to) {
                let w = DateRange::new(from, to).map_err(|e| CliError::Usage(e.to_string()))?;
                c.counterfactual.windows = vec![w];
            }
            if a.paper_convention {
                c.counterfactual.convention = Convention::WindowMean;
            }
            match a.compounding.as_deref() {
                Some("simple") => c.counterfactual.compounding = Compounding::Simple,
                Some(_) => c.counterfactual.compounding = Compounding::Log,
                None => {}
            }
        }
        Command::Bands(a) => {
            let b = &mut c.bootstrap;
            b.replications = a.reps.unwrap_or(b.replications);
            b.block_length = a.block.unwrap_or(b.block_length);
            b.seed = a.seed.unwrap_or(b.seed);
            b.horizon = a.horizon.unwrap_or(b.horizon);
            match a.centering.as_deref() {
                Some("none") => b.centering = Centering::None,
                Some(_) => b.centering = Centering::Bjt,
                None => {}
            }
        }
        Command::Wages(a) => {
            let w = &mut c.wages;
            w.shock = a.shock.clone().unwrap_or_else(|| w.shock.clone());
            w.lags = a.wage_lags.unwrap_or(w.lags);
            w.block_length = a.block.unwrap_or(w.block_length);
            w.replications = a.reps.unwrap_or(w.replications);
            w.seed = a.seed.or(w.seed);
        }
        Command::Network(a) if a.spec.is_some() || a.domega.is_some() || a.dz.is_some() => {
            let base = c.network.clone();
            // a path given on the command line is relative to the working directory
            let cli_spec = a
                .spec
                .as_deref()
                .map(std::path::absolute)
                .transpose()
                .map_err(|e| CliError::Io(e.to_string()))?;
            let spec = cli_spec
                .or_else(|| base.as_ref().map(|n| n.spec.clone()))
                .ok_or_else(|| CliError::Usage("network needs --spec or a [network] config section".into()))?;
            let d_omega = a.domega.or(base.as_ref().map(|n| n.d_omega)).unwrap_or(0.0);
            let dz_tilde = a.dz.clone().or(base.map(|n| n.dz_tilde)).unwrap_or_default();
            c.network = Some(NetworkConfig {
                spec,
                d_omega,
                dz_tilde,
            });
        }
        _ => {}
    }
    Ok(())
}

struct Run {
    cfg: LoadedConfig,
    out_dir: PathBuf,
    format: Format,
    prov: Provenance,
}

struct Data {
    inputs: RawInputs,
    panel: TimeSeriesFrame,
}

struct Fitted {
    data: Data,
    model: VarModel,
    structural: StructuralModel,
}

/// Months where every series has a value, from the latest first
/// observation to the earliest last one.
fn common_coverage(series: &[RawSeries]) -> Result<DateRange, CliError> {
    let mut start: Option<YearMonth> = None;
    let mut end: Option<YearMonth> = None;
    for s in series {
        let present = || s.observations.iter().filter(|(_, v)| v.is_some()).map(|(d, _)| *d);
        let (Some(a), Some(b)) = (present().next(), present().next_back()) else {
            return Err(Error::InsufficientSample(format!("series '{}' has no observations", s.name)).into());
        };
        start = Some(start.map_or(a, |x| x.max(a)));
        end = Some(end.map_or(b, |x| x.min(b)));
    }
    match (start, end) {
        (Some(a), Some(b)) if a <= b => Ok(DateRange::new(a, b)?),
        _ => Err(Error::InsufficientSample("input series do not overlap".into()).into()),
    }
}

impl Run {
    fn config(&self) -> &RunConfig {
        &self.cfg.config
    }

    fn path(&self, stem: &str) -> PathBuf {
        self.out_dir.join(format!("{stem}.{}", self.format.extension()))
    }

    fn emit<T: Table + ?Sized>(&self, stem: &str, table: &T) -> Result<PathBuf, CliError> {
        emit_table(table, self.format, &self.path(stem), &self.prov)
    }

    fn load(&self) -> Result<Data, CliError> {
        let inputs = self.cfg.sources().load_inputs()?;
        let series = transform_inputs(&inputs)?;
        let sample = match self.config().sample {
            Some(s) => s,
            None => common_coverage(&series)?,
        };
        self.config().validate_coverage(sample)?;
        let panel = build_panel(&series, sample)?;
        Ok(Data { inputs, panel })
    }

    fn fit(&self) -> Result<Fitted, CliError> {
        let data = self.load()?;
        let model = estimate_ols(&data.panel, self.config().lags)?;
        let cf = companion(&model);
        if !is_stable(&cf, 0.0) {
            log::warn!(
                "estimated VAR is not stable (max companion modulus {:.6})",
                cf.max_modulus()
            );
        }
        let structural = identify(&model)?;
        Ok(Fitted {
            data,
            model,
            structural,
        })
    }

    fn ingest(&self) -> Result<Vec<PathBuf>, CliError> {
        let data = self.load()?;
        Ok(vec![self.emit("panel", &data.panel)?])
    }

    fn estimate(&self) -> Result<Vec<PathBuf>, CliError> {
        let f = self.fit()?;
        Ok(vec![self.emit("var_model", &f.model)?])
    }

    fn identify(&self) -> Result<Vec<PathBuf>, CliError> {
        let f = self.fit()?;
        Ok(vec![self.emit_identified(&f)?])
    }

    fn irf(&self) -> Result<Vec<PathBuf>, CliError> {
        let f = self.fit()?;
        Ok(vec![self.emit_irf(&f)?])
    }

    fn fevd(&self) -> Result<Vec<PathBuf>, CliError> {
        let f = self.fit()?;
        Ok(vec![self.emit_fevd(&f)?])
    }

    fn histdecomp(&self) -> Result<Vec<PathBuf>, CliError> {
        let f = self.fit()?;
        let hd = historical_decomposition(&f.model, &f.structural, false);
        Ok(vec![self.emit("histdecomp", &HistDecompTable::from(&hd))?])
    }

    fn counterfactual(&self, remove: Option<&str>) -> Result<Vec<PathBuf>, CliError> {
        let f = self.fit()?;
        let hd = historical_decomposition(&f.model, &f.structural, false);
        self.emit_counterfactuals(&f, &hd, remove)
    }

    fn bands(&self) -> Result<Vec<PathBuf>, CliError> {
        let f = self.fit()?;
        Ok(vec![self.emit_bands(&f)?])
    }

    fn wages(&self) -> Result<Vec<PathBuf>, CliError> {
        let f = self.fit()?;
        self.emit_wages(&f)
    }

    fn network(&self) -> Result<Vec<PathBuf>, CliError> {
        if self.config().network.is_none() {
            return Err(CliError::Usage(
                "network needs --spec or a [network] config section".into(),
            ));
        }
        self.emit_network()
    }

    fn replicate(&self) -> Result<Vec<PathBuf>, CliError> {
        let f = self.fit()?;
        let hd = historical_decomposition(&f.model, &f.structural, false);
        let mut out = vec![
            self.emit("panel", &f.data.panel)?,
            self.emit("var_model", &f.model)?,
            self.emit_identified(&f)?,
            self.emit_irf(&f)?,
            self.emit_fevd(&f)?,
            self.emit("histdecomp", &HistDecompTable::from(&hd))?,
        ];
        out.extend(self.emit_counterfactuals(&f, &hd, None)?);
        out.push(self.emit_bands(&f)?);
        if self.config().data.wages.is_some() {
            out.extend(self.emit_wages(&f)?);
        }
        if self.config().network.is_some() {
            out.extend(self.emit_network()?);
        }
        Ok(out)
    }

    fn emit_identified(&self, f: &Fitted) -> Result<PathBuf, CliError> {
        let id = Identified {
            variables: f.model.names.clone(),
            model: f.structural.clone(),
        };
        self.emit("impact", &id)
    }

    fn emit_irf(&self, f: &Fitted) -> Result<PathBuf, CliError> {
        let irf = model_irfs(
            &f.model,
            &f.structural,
            self.config().bootstrap.horizon,
            &CUMULATE_DEFAULT,
        );
        self.emit("irf", &irf)
    }

    fn emit_fevd(&self, f: &Fitted) -> Result<PathBuf, CliError> {
        let t = model_fevd(&f.model, &f.structural, &self.config().fevd.horizons)?;
        self.emit("fevd", &t)
    }

    fn emit_bands(&self, f: &Fitted) -> Result<PathBuf, CliError> {
        let bands = irf_bands(&f.model, &f.structural, &self.config().bootstrap, &CUMULATE_DEFAULT)?;
        if bands.failed > 0 {
            log::warn!("{} bootstrap replications dropped", bands.failed);
        }
        self.emit("bands", &bands)
    }

    fn emit_counterfactuals(
        &self,
        f: &Fitted,
        hd: &HistDecomp,
        remove: Option<&str>,
    ) -> Result<Vec<PathBuf>, CliError> {
        let removals: Vec<Option<usize>> = match remove {
            None => std::iter::once(None)
                .chain((0..f.structural.labels.len()).map(Some))
                .collect(),
            Some("none") => vec![None],
            Some(label) => vec![None, Some(f.structural.shock_index(label)?)],
        };
        let emp = &f.data.inputs.employment;
        let cf = &self.config().counterfactual;
        let mut out = Vec::new();
        for &window in &cf.windows {
            let base_level = emp
                .get(window.start)
                .ok_or_else(|| CliError::Config(format!("no employment level at {}", window.start)))?;
            let mean_growth = window_mean_growth(hd, EMPLOYMENT, window)?;
            let mut paths = Vec::with_capacity(removals.len());
            for &r in &removals {
                let spec = CounterfactualSpec {
                    variable: EMPLOYMENT,
                    remove: r,
                    window,
                    base_level,
                    mean_growth,
                    convention: if r.is_none() {
                        Convention::ExactIdentity
                    } else {
                        cf.convention
                    },
                    compounding: cf.compounding,
                };
                paths.push(counterfactual_levels(hd, &spec)?);
            }
            let table = CounterfactualTable {
                variable: PANEL_VARIABLES[EMPLOYMENT].to_string(),
                window,
                paths,
            };
            let stem = format!("counterfactual_{}_{}", window.start, window.end);
            out.push(self.emit(&stem, &table)?);
        }
        Ok(out)
    }

    fn emit_wages(&self, f: &Fitted) -> Result<Vec<PathBuf>, CliError> {
        let nominal = self
            .cfg
            .sources()
            .load_wages()?
            .ok_or_else(|| CliError::Config("no wage series configured ([data] wages)".into()))?;
        let growth = real_wage_growth(&nominal, &f.data.inputs.cpi)?;
        let s = &f.structural;
        let zeta = aggregate_shocks(f.model.sample.start, &s.oriented_shocks(), &s.labels)?;
        let w = &self.config().wages;
        let shock = s.shock_index(&w.shock)?;
        let design = wage_design(&growth, &zeta, shock, w.lags)?;
        let reg = fit_wage_design(&design, &w.shock)?;
        let config = WageBootstrap {
            block_length: w.block_length,
            replications: w.replications,
            seed: self.config().wage_seed(),
        };
        let bands = wage_bands(&design, &w.shock, &config)?;
        let prov = self.prov.with_seed(config.seed);
        Ok(vec![
            emit_table(&reg, self.format, &self.path("wage_irf"), &prov)?,
            emit_table(&bands, self.format, &self.path("wage_bands"), &prov)?,
        ])
    }

    fn emit_network(&self) -> Result<Vec<PathBuf>, CliError> {
        let n = self.config().network.as_ref().expect("checked by caller");
        let path = self.cfg.network_spec().expect("network configured");
        let net = IONetwork::load(&path)?;
        let dz_tilde = if n.dz_tilde.is_empty() {
            vec![0.0; net.n()]
        } else {
            n.dz_tilde.clone()
        };
        let shock = OilShock {
            d_omega: n.d_omega,
            dz_tilde,
        };
        let r = employment_response(&net, &shock)?;
        Ok(vec![self.emit("network", &r)?])
    }
}
