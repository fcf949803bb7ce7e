//! Scenario generators and the Monte Carlo coverage driver.

mod regression;
mod study;
mod trial;

pub use regression::{
    generate_regression_data, ObserveProbability, RegressionScenario, RegressionScenarioParams,
    LOGNORMAL_ERROR_SDLOG, REGRESSION_COLUMNS,
};
pub use study::{
    calibration_estimate, default_battery, estimate_coverage, run_study, CoverageEstimate,
    MethodSpec, SimulationSummary, StudyReport,
};
pub use trial::{generate_trial_data, TrialScenarioParams, TRIAL_COLUMNS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalyzerSpec;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::imputation::ImputerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataModel {
    Regression(RegressionScenarioParams),
    Trial(TrialScenarioParams),
}

impl DataModel {
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        match self {
            DataModel::Regression(p) => generate_regression_data(p, rng),
            DataModel::Trial(p) => generate_trial_data(p, rng),
        }
    }
}

/// A complete simulation scenario: how data are generated, imputed and
/// analysed, and the value intervals are scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub model: DataModel,
    pub imputer: ImputerSpec,
    pub analyzer: AnalyzerSpec,
    pub true_theta: f64,
}

const BUILTIN: [(&str, &str); 6] = [
    ("subgroup", include_str!("../../scenarios/subgroup.json")),
    ("heteroscedastic", include_str!("../../scenarios/heteroscedastic.json")),
    ("omitted-interaction", include_str!("../../scenarios/omitted-interaction.json")),
    ("non-normal", include_str!("../../scenarios/non-normal.json")),
    ("trial-mar", include_str!("../../scenarios/trial-mar.json")),
    ("trial-j2r", include_str!("../../scenarios/trial-j2r.json")),
];

impl ScenarioConfig {
    pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(id, _)| *id)
    }

    /// One of the scenarios shipped in `scenarios/`.
    pub fn builtin(id: &str) -> Result<ScenarioConfig> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(k, _)| *k == id)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown scenario `{id}`")))?;
        ScenarioConfig::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<ScenarioConfig> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpec(format!("scenario JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.model {
            DataModel::Regression(p) => p.validate()?,
            DataModel::Trial(p) => p.validate()?,
        }
        self.imputer.validate()?;
        self.analyzer.validate()
    }
}
