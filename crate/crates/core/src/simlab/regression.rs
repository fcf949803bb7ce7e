//! Generator for the sex / age / height / weight / loginsindex regression
//! study.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionScenario {
    Subgroup,
    Heteroscedastic,
    OmittedInteraction,
    NonNormal,
}

/// Probability that weight is observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObserveProbability {
    All(f64),
    BySex { women: f64, men: f64 },
}

impl ObserveProbability {
    fn for_sex(self, sex: f64) -> f64 {
        match self {
            ObserveProbability::All(p) => p,
            ObserveProbability::BySex { women, men } => {
                if sex == 1.0 {
                    men
                } else {
                    women
                }
            }
        }
    }
}

/// Data model parameters. Sex is coded 1 for men.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionScenarioParams {
    pub scenario: RegressionScenario,
    pub n: usize,
    pub pi: f64,
    pub alpha0: [f64; 2],
    pub alpha1: [f64; 2],
    pub sigma: [[f64; 2]; 2],
    /// ι₀..ι₃: intercept, sex, age and height coefficients of weight.
    pub iota: [f64; 4],
    pub lambda: f64,
    /// β₀..β₂: intercept, sex and age coefficients of loginsindex.
    pub beta: [f64; 3],
    /// Coefficient of weight in the loginsindex model.
    pub theta: f64,
    pub omega: f64,
    /// Error standard-deviation multiplier applied when sex = 1.
    pub eta: f64,
    pub p_observe_weight: ObserveProbability,
}

/// Log-scale standard deviation of the non-normal scenario's errors.
pub const LOGNORMAL_ERROR_SDLOG: f64 = 0.25;

pub const REGRESSION_COLUMNS: [&str; 5] = ["sex", "age", "height", "weight", "loginsindex"];

impl RegressionScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let probs = match self.p_observe_weight {
            ObserveProbability::All(p) => vec![p],
            ObserveProbability::BySex { women, men } => vec![women, men],
        };
        if probs.iter().chain([&self.pi]).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidSpec("probabilities must lie in [0, 1]".into()));
        }
        let s = self.sigma;
        if s[0][1] != s[1][0] || !(s[0][0] > 0.0) || !(s[0][0] * s[1][1] - s[0][1] * s[1][0] > 0.0)
        {
            return Err(Error::InvalidSpec(
                "age/height covariance must be symmetric positive definite".into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be positive".into()));
        }
        Ok(())
    }

    fn error<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match self.scenario {
            RegressionScenario::NonNormal => (LOGNORMAL_ERROR_SDLOG * z).exp(),
            _ => z,
        }
    }
}

pub fn generate_regression_data<R: Rng + ?Sized>(
    params: &RegressionScenarioParams,
    rng: &mut R,
) -> Result<Dataset> {
    params.validate()?;
    let p = params;
    let l11 = p.sigma[0][0].sqrt();
    let l21 = p.sigma[1][0] / l11;
    let l22 = (p.sigma[1][1] - l21 * l21).sqrt();

    let mut cols: [Vec<Option<f64>>; 5] = Default::default();
    for c in cols.iter_mut() {
        c.reserve(p.n);
    }
    for _ in 0..p.n {
        let sex = if rng.random::<f64>() < p.pi { 1.0 } else { 0.0 };
        let (z1, z2): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        let age = p.alpha0[0] + p.alpha1[0] * sex + l11 * z1;
        let height = p.alpha0[1] + p.alpha1[1] * sex + l21 * z1 + l22 * z2;
        let scale = if sex == 1.0 { p.eta } else { 1.0 };
        let weight = p.iota[0]
            + p.iota[1] * sex
            + p.iota[2] * age
            + p.iota[3] * height
            + scale * p.lambda * p.error(rng);
        let loginsindex = p.beta[0]
            + p.beta[1] * sex
            + p.beta[2] * age
            + p.theta * weight
            + scale * p.omega * p.error(rng);
        let observed = rng.random::<f64>() < p.p_observe_weight.for_sex(sex);
        cols[0].push(Some(sex));
        cols[1].push(Some(age));
        cols[2].push(Some(height));
        cols[3].push(observed.then_some(weight));
        cols[4].push(Some(loginsindex));
    }
    Dataset::new(
        REGRESSION_COLUMNS.iter().map(|s| s.to_string()).collect(),
        cols.into(),
    )
}
