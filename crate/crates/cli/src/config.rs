//! TOML run configuration. Every section is optional and falls back to the
//! library defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use deepvarwt::metrics::EvalConfig;
use deepvarwt::simulation::{self, InitMode, TrendSource, DEFAULT_BURN_IN};
use deepvarwt::trainer::TrainConfig;
use deepvarwt::{CausalVarParams, Error, Matrix, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub train: TrainConfig,
    pub simulate: SimulateSection,
    pub forecast: ForecastSection,
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendChoice {
    Synthetic,
    Zero,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitChoice {
    Stationary,
    BurnIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub len: usize,
    pub replications: usize,
    pub init: InitChoice,
    pub burn_in: usize,
    pub trend: TrendChoice,
    pub trend_file: Option<PathBuf>,
    /// Seed of the synthetic trend; defaults to the run seed.
    pub trend_seed: Option<u64>,
    /// Coefficient matrices `A_1 … A_p`, each a list of rows. Empty selects the
    /// built-in three-series VAR(2).
    pub a: Vec<Vec<Vec<f64>>>,
    pub sigma: Vec<Vec<f64>>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            len: 800,
            replications: 1,
            init: InitChoice::Stationary,
            burn_in: DEFAULT_BURN_IN,
            trend: TrendChoice::Synthetic,
            trend_file: None,
            trend_seed: None,
            a: Vec::new(),
            sigma: Vec::new(),
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidConfig(format!(
            "{what} must be a nonempty square matrix"
        )));
    }
    Ok(Matrix::from_vec(n, n, rows.concat()))
}

impl SimulateSection {
    pub fn parameters(&self) -> Result<CausalVarParams> {
        if self.a.is_empty() && self.sigma.is_empty() {
            return Ok(simulation::benchmark_var2());
        }
        let sigma = matrix_from_rows(&self.sigma, "simulate.sigma")?;
        let a_causal = self
            .a
            .iter()
            .map(|rows| matrix_from_rows(rows, "simulate.a"))
            .collect::<Result<Vec<_>>>()?;
        if a_causal.is_empty() || a_causal.iter().any(|a| a.rows() != sigma.rows()) {
            return Err(Error::InvalidConfig(
                "simulate.a must list at least one matrix of the same size as simulate.sigma"
                    .into(),
            ));
        }
        let causal = CausalVarParams { a_causal, sigma };
        if causal.spectral_radius()? >= 1.0 {
            return Err(Error::InvalidConfig(
                "simulate.a does not define a causal VAR".into(),
            ));
        }
        Ok(causal)
    }

    pub fn init_mode(&self) -> InitMode {
        match self.init {
            InitChoice::Stationary => InitMode::Stationary,
            InitChoice::BurnIn => InitMode::BurnIn(self.burn_in),
        }
    }

    /// `trend_override` is a `--trend` path, which wins over the section.
    pub fn trend_source(
        &self,
        run_seed: u64,
        trend_override: Option<&Path>,
    ) -> Result<TrendSource<f64>> {
        if let Some(path) = trend_override {
            return Ok(TrendSource::File(path.to_path_buf()));
        }
        Ok(match self.trend {
            TrendChoice::Synthetic => TrendSource::Synthetic {
                seed: self.trend_seed.unwrap_or(run_seed),
            },
            TrendChoice::Zero => TrendSource::Zero,
            TrendChoice::File => TrendSource::File(self.trend_file.clone().ok_or_else(|| {
                Error::InvalidConfig("simulate.trend = \"file\" needs simulate.trend_file".into())
            })?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    pub horizon: usize,
    pub level: f64,
    pub round_z: bool,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            horizon: 8,
            level: 0.95,
            round_z: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub alpha: f64,
    pub seasonality: usize,
    pub horizons: Vec<usize>,
    pub origins: usize,
    pub window: usize,
    /// Level added to every simulated stand-in series, keeping actuals away
    /// from zero so APE stays defined.
    pub stand_in_level: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        let d = EvalConfig::default();
        Self {
            alpha: d.alpha,
            seasonality: d.seasonality,
            horizons: d.horizons,
            origins: d.origins,
            window: d.window,
            stand_in_level: 5.0,
        }
    }
}

impl EvaluateSection {
    pub fn metrics(&self) -> EvalConfig {
        EvalConfig {
            alpha: self.alpha,
            seasonality: self.seasonality,
            horizons: self.horizons.clone(),
            origins: self.origins,
            window: self.window,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Open {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))
    }
}
