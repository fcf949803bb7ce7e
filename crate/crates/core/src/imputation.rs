//! Proper normal linear-regression imputation of a single incomplete column.
//!
//! Each call takes one posterior draw of the regression parameters under the
//! standard noninformative prior (σ² from a scaled inverse χ², β from the
//! conditional normal) and then draws every missing value from the implied
//! predictive distribution. Jump-to-reference fits the regression on the
//! reference arm only and uses it for every missing row, whatever its arm.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMode {
    MarProper,
    JumpToReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputerSpec {
    pub target: String,
    pub predictors: Vec<String>,
    pub mode: ImputationMode,
    #[serde(default)]
    pub reference_arm_column: Option<String>,
    #[serde(default)]
    pub reference_arm_value: Option<f64>,
}

impl ImputerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.predictors.contains(&self.target) {
            return Err(Error::InvalidSpec(format!(
                "imputation target `{}` is also a predictor",
                self.target
            )));
        }
        if self.mode == ImputationMode::JumpToReference
            && (self.reference_arm_column.is_none() || self.reference_arm_value.is_none())
        {
            return Err(Error::InvalidSpec(
                "jump_to_reference needs reference_arm_column and reference_arm_value".into(),
            ));
        }
        Ok(())
    }

    pub fn bind(&self, data: &Dataset) -> Result<BoundImputer> {
        self.validate()?;
        let reference = match self.mode {
            ImputationMode::MarProper => None,
            ImputationMode::JumpToReference => Some((
                data.column_index(self.reference_arm_column.as_deref().expect("validated"))?,
                self.reference_arm_value.expect("validated"),
            )),
        };
        Ok(BoundImputer {
            layout: data.column_names().to_vec(),
            target: data.column_index(&self.target)?,
            predictors: self
                .predictors
                .iter()
                .map(|p| data.column_index(p))
                .collect::<Result<_>>()?,
            reference,
        })
    }
}

/// An [`ImputerSpec`] resolved against a dataset layout.
#[derive(Debug, Clone)]
pub struct BoundImputer {
    layout: Vec<String>,
    target: usize,
    predictors: Vec<usize>,
    reference: Option<(usize, f64)>,
}

/// Least-squares summary from which posterior parameter draws are taken.
struct RegressionPosterior {
    beta_hat: Vec<f64>,
    chol: Cholesky,
    rss: f64,
    df: usize,
}

impl RegressionPosterior {
    /// Draws `(β*, σ*)`.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let chi2: f64 = ChiSquared::new(self.df as f64)
            .expect("df is positive")
            .sample(rng);
        let sigma = (self.rss / chi2).sqrt();
        let z: Vec<f64> = (0..self.beta_hat.len())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        // Cov(R⁻¹z) = (XᵀX)⁻¹
        let u = self.chol.back(&z);
        let beta = self
            .beta_hat
            .iter()
            .zip(&u)
            .map(|(b, u)| b + sigma * u)
            .collect();
        (beta, sigma)
    }
}

impl BoundImputer {
    fn row_design(&self, data: &Dataset, row: usize, x: &mut [f64]) {
        x[0] = 1.0;
        for (k, &c) in self.predictors.iter().enumerate() {
            x[k + 1] = data.column_raw(c).0[row];
        }
    }

    fn predictors_observed(&self, data: &Dataset, row: usize) -> bool {
        self.predictors.iter().all(|&c| data.is_observed(row, c))
    }

    fn fit(&self, data: &Dataset) -> Result<RegressionPosterior> {
        let p = self.predictors.len() + 1;
        let (y, y_obs) = data.column_raw(self.target);
        let rows: Vec<usize> = (0..data.nrows())
            .filter(|&r| y_obs[r] && self.predictors_observed(data, r))
            .filter(|&r| match self.reference {
                None => true,
                Some((col, value)) => data.get(r, col) == Some(value),
            })
            .collect();
        if rows.len() <= p + 2 {
            return Err(Error::TooFew {
                what: "complete cases for the imputation model",
                needed: p + 3,
                found: rows.len(),
            });
        }
        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p];
        let mut x = vec![0.0; p];
        for &r in &rows {
            self.row_design(data, r, &mut x);
            for i in 0..p {
                xty[i] += x[i] * y[r];
                for j in i..p {
                    xtx[i * p + j] += x[i] * x[j];
                }
            }
        }
        let chol = Cholesky::factor(&xtx, p).map_err(|j| Error::Singular {
            term: if j == 0 {
                crate::analysis::INTERCEPT.to_string()
            } else {
                self.layout[self.predictors[j - 1]].clone()
            },
        })?;
        let beta_hat = chol.solve(&xty);
        let rss = rows
            .iter()
            .map(|&r| {
                self.row_design(data, r, &mut x);
                let fitted: f64 = x.iter().zip(&beta_hat).map(|(a, b)| a * b).sum();
                (y[r] - fitted).powi(2)
            })
            .sum();
        Ok(RegressionPosterior {
            beta_hat,
            chol,
            rss,
            df: rows.len() - p,
        })
    }

    /// One completed copy of `data`. Observed cells are never touched; with
    /// nothing to impute the input is returned unchanged and `rng` is unused.
    pub fn impute<R: Rng + ?Sized>(&self, data: &Dataset, rng: &mut R) -> Result<Dataset> {
        if data.column_names() != self.layout.as_slice() {
            return Err(Error::InvalidSpec(
                "dataset layout differs from the one the imputer was bound to".into(),
            ));
        }
        let y_obs = data.column_raw(self.target).1;
        let missing: Vec<usize> = (0..data.nrows()).filter(|&r| !y_obs[r]).collect();
        if missing.is_empty() {
            return Ok(data.clone());
        }
        if let Some(&r) = missing.iter().find(|&&r| !self.predictors_observed(data, r)) {
            let col = *self
                .predictors
                .iter()
                .find(|&&c| !data.is_observed(r, c))
                .expect("some predictor is missing");
            return Err(Error::MissingValue {
                column: self.layout[col].clone(),
                row: r,
            });
        }
        let posterior = self.fit(data)?;
        let (beta, sigma) = posterior.draw(rng);
        let noise: Vec<f64> = missing.iter().map(|_| StandardNormal.sample(rng)).collect();
        let shifts = match self.reference {
            Some((arm_col, ref_value)) => self.arm_shifts(data, &missing, arm_col, ref_value, &beta, rng)?,
            None => vec![0.0; missing.len()],
        };
        let mut out = data.clone();
        let mut x = vec![0.0; beta.len()];
        for ((&r, e), shift) in missing.iter().zip(noise).zip(shifts) {
            self.row_design(data, r, &mut x);
            let mean: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            out.fill(r, self.target, mean + shift + sigma * e);
        }
        Ok(out)
    }

    /// Jump to reference keeps each arm's own predictor mean: a missing row
    /// in a non-reference arm is centred at `β*ᵀ(x − μ*_arm + μ*_ref)`
    /// rather than `β*ᵀx`. Returns that offset per missing row.
    fn arm_shifts<R: Rng + ?Sized>(
        &self,
        data: &Dataset,
        missing: &[usize],
        arm_col: usize,
        ref_value: f64,
        beta: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let arm_of = |r: usize| data.get(r, arm_col);
        let mut arms: Vec<Option<f64>> = Vec::new();
        for &r in missing {
            let a = arm_of(r);
            if a != Some(ref_value) && !arms.contains(&a) {
                arms.push(a);
            }
        }
        if arms.is_empty() {
            return Ok(vec![0.0; missing.len()]);
        }
        let mut offsets = Vec::with_capacity(arms.len());
        let reference = self.draw_predictor_mean(data, Some(ref_value), arm_col, rng)?;
        for &arm in &arms {
            let own = self.draw_predictor_mean(data, arm, arm_col, rng)?;
            let offset: f64 = beta[1..]
                .iter()
                .zip(reference.iter().zip(&own))
                .map(|(b, (m_ref, m_own))| b * (m_ref - m_own))
                .sum();
            offsets.push((arm, offset));
        }
        Ok(missing
            .iter()
            .map(|&r| {
                let a = arm_of(r);
                offsets.iter().find(|(arm, _)| *arm == a).map_or(0.0, |o| o.1)
            })
            .collect())
    }

    /// Posterior draw of the predictor mean vector within one arm, from the
    /// multivariate t marginal of the normal model under the Jeffreys prior.
    fn draw_predictor_mean<R: Rng + ?Sized>(
        &self,
        data: &Dataset,
        arm: Option<f64>,
        arm_col: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let k = self.predictors.len();
        let rows: Vec<usize> = (0..data.nrows())
            .filter(|&r| data.get(r, arm_col) == arm && self.predictors_observed(data, r))
            .collect();
        let n = rows.len();
        if n <= k + 1 {
            return Err(Error::TooFew {
                what: "rows with observed predictors in an arm",
                needed: k + 2,
                found: n,
            });
        }
        let cols: Vec<&[f64]> = self.predictors.iter().map(|&c| data.column_raw(c).0).collect();
        let means: Vec<f64> = cols
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).sum::<f64>() / n as f64)
            .collect();
        let dof = (n - k) as f64;
        let mut scale = vec![0.0; k * k];
        for &r in &rows {
            for i in 0..k {
                for j in i..k {
                    scale[i * k + j] += (cols[i][r] - means[i]) * (cols[j][r] - means[j]);
                }
            }
        }
        scale.iter_mut().for_each(|v| *v /= n as f64 * dof);
        let chol = Cholesky::factor(&scale, k).map_err(|j| Error::Singular {
            term: self.layout[self.predictors[j]].clone(),
        })?;
        let chi2: f64 = ChiSquared::new(dof).expect("dof is positive").sample(rng);
        let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        let stretch = (dof / chi2).sqrt();
        Ok(means
            .iter()
            .zip(chol.lower_mul(&z))
            .map(|(m, d)| m + stretch * d)
            .collect())
    }
}

fn impute_checked<R: Rng + ?Sized>(
    data: &Dataset,
    spec: &ImputerSpec,
    mode: ImputationMode,
    rng: &mut R,
) -> Result<Dataset> {
    if spec.mode != mode {
        return Err(Error::InvalidSpec(format!(
            "imputer spec has mode {:?}, expected {mode:?}",
            spec.mode
        )));
    }
    spec.bind(data)?.impute(data, rng)
}

/// Proper MAR imputation from the regression of the target on its predictors.
pub fn impute_mar_proper<R: Rng + ?Sized>(
    data: &Dataset,
    spec: &ImputerSpec,
    rng: &mut R,
) -> Result<Dataset> {
    impute_checked(data, spec, ImputationMode::MarProper, rng)
}

/// Jump-to-reference imputation. The outcome regression is drawn from the
/// reference arm's complete cases and every missing value, in either arm, is
/// imputed from it; rows outside the reference arm keep their own arm's
/// predictor mean, so their conditional mean is `β*ᵀ(x − μ*_arm + μ*_ref)`.
pub fn impute_jump_to_reference<R: Rng + ?Sized>(
    data: &Dataset,
    spec: &ImputerSpec,
    rng: &mut R,
) -> Result<Dataset> {
    impute_checked(data, spec, ImputationMode::JumpToReference, rng)
}

/// Dispatches on `spec.mode`.
pub fn impute<R: Rng + ?Sized>(data: &Dataset, spec: &ImputerSpec, rng: &mut R) -> Result<Dataset> {
    spec.bind(data)?.impute(data, rng)
}
