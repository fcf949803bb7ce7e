//! Two-arm trial generator: baseline X and outcome Y bivariate normal within
//! arm, with an additive treatment effect on the mean of Y.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialScenarioParams {
    pub n_per_arm: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    pub treatment_effect: f64,
    pub covariance: [[f64; 2]; 2],
    pub p_missing: f64,
}

impl Default for TrialScenarioParams {
    fn default() -> Self {
        TrialScenarioParams {
            n_per_arm: 250,
            mean_x: 2.0,
            mean_y: 2.0,
            treatment_effect: 0.2,
            covariance: [[0.4, 0.2], [0.2, 0.4]],
            p_missing: 0.5,
        }
    }
}

pub const TRIAL_COLUMNS: [&str; 3] = ["x", "z", "y"];

impl TrialScenarioParams {
    pub fn n(&self) -> usize {
        2 * self.n_per_arm
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.covariance;
        if c[0][1] != c[1][0] || !(c[0][0] > 0.0) || !(c[0][0] * c[1][1] - c[0][1] * c[1][0] > 0.0)
        {
            return Err(Error::InvalidSpec(
                "trial covariance must be symmetric positive definite".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_missing) {
            return Err(Error::InvalidSpec("p_missing must lie in [0, 1]".into()));
        }
        if self.n_per_arm == 0 {
            return Err(Error::InvalidSpec("n_per_arm must be positive".into()));
        }
        Ok(())
    }
}

/// Control rows (z = 0) first, then active rows (z = 1). Y is missing
/// completely at random with probability `p_missing`.
pub fn generate_trial_data<R: Rng + ?Sized>(
    params: &TrialScenarioParams,
    rng: &mut R,
) -> Result<Dataset> {
    params.validate()?;
    let c = params.covariance;
    let l11 = c[0][0].sqrt();
    let l21 = c[1][0] / l11;
    let l22 = (c[1][1] - l21 * l21).sqrt();
    let n = params.n();
    let (mut x, mut z, mut y) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let arm = if i < params.n_per_arm { 0.0 } else { 1.0 };
        let (e1, e2): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        let xi = params.mean_x + l11 * e1;
        let yi = params.mean_y + params.treatment_effect * arm + l21 * e1 + l22 * e2;
        let missing = rng.random::<f64>() < params.p_missing;
        x.push(Some(xi));
        z.push(Some(arm));
        y.push((!missing).then_some(yi));
    }
    Dataset::new(
        TRIAL_COLUMNS.iter().map(|s| s.to_string()).collect(),
        vec![x, z, y],
    )
}
