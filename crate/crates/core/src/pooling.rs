//! Turning grids of estimates into point estimates, variances and intervals.
//!
//! `alpha` is always the two-sided miss rate: every procedure targets a
//! `1 − alpha` interval. The t-based methods use the `1 − alpha/2` quantile
//! and the percentile methods the `alpha/2` and `1 − alpha/2` empirical
//! percentiles.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::data::{mean, Estimate, EstimateGrid, Method, Orientation, PooledResult, VarianceComponents};
use crate::error::{Error, Result};

/// Degrees of freedom at and above which the t quantile is taken from its
/// Cornish–Fisher expansion in 1/ν (error below 1e-14 there).
const T_EXPANSION_DF: f64 = 500.0;

/// Inverse CDF of Student's t with (possibly non-integer or infinite) `df`.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability {p} outside (0, 1)");
    assert!(df > 0.0, "degrees of freedom must be positive, got {df}");
    let z = Normal::standard().inverse_cdf(p);
    if df.is_infinite() {
        return z;
    }
    if df >= T_EXPANSION_DF {
        let z2 = z * z;
        let g1 = z * (z2 + 1.0) / 4.0;
        let g2 = z * ((5.0 * z2 + 16.0) * z2 + 3.0) / 96.0;
        let g3 = z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / 384.0;
        let g4 = z * ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) / 92160.0;
        return z + g1 / df + g2 / df.powi(2) + g3 / df.powi(3) + g4 / df.powi(4);
    }
    StudentsT::new(0.0, 1.0, df)
        .expect("valid df")
        .inverse_cdf(p)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("alpha {alpha} outside (0, 0.5)")))
    }
}

fn check_orientation(grid: &EstimateGrid, expected: Orientation) -> Result<()> {
    if grid.orientation() == expected {
        Ok(())
    } else {
        Err(Error::Orientation {
            expected,
            found: grid.orientation(),
        })
    }
}

fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

/// Interpolated order statistic at 1-based position `q(n − 1) + 1`.
pub fn empirical_percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::TooFew {
            what: "values for an empirical percentile",
            needed: 1,
            found: 0,
        });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidSpec(format!("percentile level {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn percentile_interval(values: &[f64], alpha: f64) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (
        percentile_sorted(&sorted, alpha / 2.0),
        percentile_sorted(&sorted, 1.0 - alpha / 2.0),
    )
}

/// Which point estimate a percentile method reports. The interval is the
/// same either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointChoice {
    /// Mean of the resampled estimates (θ̂_MB or θ̂_BM).
    #[default]
    Pooled,
    /// θ̂_M, the MI estimate on the original data (needs direct estimates).
    Direct,
}

/// Inputs to Rubin's rules.
#[derive(Debug, Clone, PartialEq)]
pub struct RubinInputs {
    pub estimates: Vec<f64>,
    pub within_variances: Vec<f64>,
    pub alpha: f64,
}

impl RubinInputs {
    pub fn from_estimates(estimates: &[Estimate], alpha: f64) -> Self {
        RubinInputs {
            estimates: estimates.iter().map(|e| e.estimate).collect(),
            within_variances: estimates.iter().map(|e| e.variance).collect(),
            alpha,
        }
    }
}

/// Rubin's rules. Zero between-imputation variance gives `df = ∞`.
pub fn pool_rubin(inputs: &RubinInputs) -> Result<PooledResult> {
    check_alpha(inputs.alpha)?;
    let m = inputs.estimates.len();
    if inputs.within_variances.len() != m {
        return Err(Error::InvalidData(format!(
            "{m} estimates but {} within variances",
            inputs.within_variances.len()
        )));
    }
    if m < 2 {
        return Err(Error::TooFew {
            what: "imputations for Rubin's rules",
            needed: 2,
            found: m,
        });
    }
    if inputs.within_variances.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidData("within variances must be nonnegative".into()));
    }
    let mf = m as f64;
    let point = mean(&inputs.estimates);
    let between = sample_variance(&inputs.estimates);
    let within = mean(&inputs.within_variances);
    let inflated = (1.0 + 1.0 / mf) * between;
    let variance = inflated + within;
    let df = if inflated > 0.0 {
        (mf - 1.0) * (variance / inflated).powi(2)
    } else {
        f64::INFINITY
    };
    let half = t_quantile(1.0 - inputs.alpha / 2.0, df) * variance.sqrt();
    Ok(PooledResult {
        method: Method::MiRubin,
        m,
        b: 0,
        point,
        variance,
        df,
        ci_lower: point - half,
        ci_upper: point + half,
        alpha: inputs.alpha,
        fallback_used: false,
    })
}

/// Rubin's rules on the direct estimates carried by a grid.
pub fn pool_mi_rubin(grid: &EstimateGrid, alpha: f64) -> Result<PooledResult> {
    let direct = grid.direct().ok_or_else(|| {
        Error::InvalidData("grid carries no direct (original-data) estimates".into())
    })?;
    pool_rubin(&RubinInputs::from_estimates(direct, alpha))
}

/// Per-imputation bootstrap variances `(B − 1)⁻¹ Σ_b (θ̂_{m,b} − θ̃_m)²`.
pub fn bootstrap_within_variances(grid: &EstimateGrid) -> Result<Vec<f64>> {
    check_orientation(grid, Orientation::ImputationOuter)?;
    if grid.reps() < 2 {
        return Err(Error::TooFew {
            what: "bootstrap resamples per imputation",
            needed: 2,
            found: grid.reps(),
        });
    }
    Ok(grid.rows().map(sample_variance).collect())
}

/// MI boot Rubin: Rubin's rules with bootstrap within-imputation variances.
pub fn pool_mi_boot_rubin(grid: &EstimateGrid, alpha: f64) -> Result<PooledResult> {
    let within = bootstrap_within_variances(grid)?;
    let direct = grid.direct().ok_or_else(|| {
        Error::InvalidData("MI boot Rubin needs the direct estimates of each imputation".into())
    })?;
    if direct.len() != grid.groups() {
        return Err(Error::InvalidData(format!(
            "{} direct estimates for {} imputations",
            direct.len(),
            grid.groups()
        )));
    }
    let mut result = pool_rubin(&RubinInputs {
        estimates: direct.iter().map(|d| d.estimate).collect(),
        within_variances: within,
        alpha,
    })?;
    result.method = Method::MiBootRubin;
    result.b = grid.reps();
    Ok(result)
}

fn direct_mean(grid: &EstimateGrid) -> Result<f64> {
    let direct = grid
        .direct()
        .ok_or_else(|| Error::InvalidData("grid carries no direct estimates".into()))?;
    Ok(direct.iter().map(|d| d.estimate).sum::<f64>() / direct.len() as f64)
}

/// Percentile interval from the pooled M·B sample; variance is the
/// divisor-MB sample variance of that pool.
pub fn pool_mi_boot_pooled_percentile(
    grid: &EstimateGrid,
    alpha: f64,
    point: PointChoice,
) -> Result<PooledResult> {
    check_alpha(alpha)?;
    check_orientation(grid, Orientation::ImputationOuter)?;
    let values = grid.values();
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFew {
            what: "pooled estimates (M·B)",
            needed: 2,
            found: n,
        });
    }
    let pooled = mean(values);
    let variance = values.iter().map(|v| (v - pooled).powi(2)).sum::<f64>() / n as f64;
    let (ci_lower, ci_upper) = percentile_interval(values, alpha);
    Ok(PooledResult {
        method: Method::MiBootPooledPercentile,
        m: grid.groups(),
        b: grid.reps(),
        point: match point {
            PointChoice::Pooled => pooled,
            PointChoice::Direct => direct_mean(grid)?,
        },
        variance,
        df: (n - 1) as f64,
        ci_lower,
        ci_upper,
        alpha,
        fallback_used: false,
    })
}

/// One-way random-effects ANOVA of the grid with the REML component
/// estimates, falling back to (0, total sample variance) when MSB ≤ MSW.
pub fn one_way_anova(grid: &EstimateGrid) -> Result<VarianceComponents> {
    let (g, m) = (grid.groups(), grid.reps());
    if g < 2 || m < 2 {
        return Err(Error::TooFew {
            what: "groups and repetitions for one-way ANOVA (each)",
            needed: 2,
            found: g.min(m),
        });
    }
    let (gf, mf) = (g as f64, m as f64);
    let grand = grid.grand_mean();
    let row_means = grid.row_means();
    let ss_between: f64 = mf * row_means.iter().map(|r| (r - grand).powi(2)).sum::<f64>();
    let ss_within: f64 = grid
        .rows()
        .zip(&row_means)
        .map(|(row, rm)| row.iter().map(|v| (v - rm).powi(2)).sum::<f64>())
        .sum();
    let msb = ss_between / (gf - 1.0);
    let msw = ss_within / (gf * (mf - 1.0));
    if msb - msw > 0.0 {
        Ok(VarianceComponents {
            msb,
            msw,
            sigma2_inf: (msb - msw) / mf,
            sigma2_btw: msw,
            fallback_used: false,
        })
    } else {
        Ok(VarianceComponents {
            msb,
            msw,
            sigma2_inf: 0.0,
            sigma2_btw: (ss_between + ss_within) / (gf * mf - 1.0),
            fallback_used: true,
        })
    }
}

/// Variance of θ̂_BM under the variance-components model, evaluated at the
/// given component estimates.
pub fn von_hippel_variance(components: &VarianceComponents, b: usize, m: usize) -> f64 {
    let (bf, mf) = (b as f64, m as f64);
    (1.0 + 1.0 / bf) * components.sigma2_inf + components.sigma2_btw / (bf * mf)
}

/// Satterthwaite degrees of freedom for `((B+1)/(BM))·MSB − MSW/M`.
pub fn satterthwaite_df(msb: f64, msw: f64, b: usize, m: usize) -> f64 {
    let (bf, mf) = (b as f64, m as f64);
    let c = (bf + 1.0) / (bf * mf);
    let num = (c * msb - msw / mf).powi(2);
    let den = (c * msb).powi(2) / (bf - 1.0) + msw.powi(2) / (bf * mf * mf * (mf - 1.0));
    num / den
}

/// Boot MI von Hippel: θ̂_BM with ANOVA-based variance and Satterthwaite df.
pub fn pool_von_hippel(grid: &EstimateGrid, alpha: f64) -> Result<PooledResult> {
    check_alpha(alpha)?;
    check_orientation(grid, Orientation::BootstrapOuter)?;
    let (b, m) = (grid.groups(), grid.reps());
    let comps = one_way_anova(grid)?;
    let point = grid.grand_mean();
    let (variance, df) = if comps.fallback_used {
        (von_hippel_variance(&comps, b, m), (b * m - 1) as f64)
    } else {
        let (bf, mf) = (b as f64, m as f64);
        (
            (bf + 1.0) / (bf * mf) * comps.msb - comps.msw / mf,
            satterthwaite_df(comps.msb, comps.msw, b, m),
        )
    };
    let half = t_quantile(1.0 - alpha / 2.0, df) * variance.sqrt();
    Ok(PooledResult {
        method: Method::VonHippel,
        m,
        b,
        point,
        variance,
        df,
        ci_lower: point - half,
        ci_upper: point + half,
        alpha,
        fallback_used: comps.fallback_used,
    })
}

/// Boot MI percentile: percentile interval of the B bootstrap row means.
pub fn pool_boot_mi_percentile(
    grid: &EstimateGrid,
    alpha: f64,
    point: PointChoice,
) -> Result<PooledResult> {
    check_alpha(alpha)?;
    check_orientation(grid, Orientation::BootstrapOuter)?;
    let b = grid.groups();
    if b < 2 {
        return Err(Error::TooFew {
            what: "bootstrap resamples",
            needed: 2,
            found: b,
        });
    }
    let row_means = grid.row_means();
    let (ci_lower, ci_upper) = percentile_interval(&row_means, alpha);
    Ok(PooledResult {
        method: Method::BootMiPercentile,
        m: grid.reps(),
        b,
        point: match point {
            PointChoice::Pooled => grid.grand_mean(),
            PointChoice::Direct => direct_mean(grid)?,
        },
        variance: sample_variance(&row_means),
        df: (b - 1) as f64,
        ci_lower,
        ci_upper,
        alpha,
        fallback_used: false,
    })
}

/// Applies `method` to a grid with default point conventions.
pub fn pool(method: Method, grid: &EstimateGrid, alpha: f64) -> Result<PooledResult> {
    match method {
        Method::MiRubin => pool_mi_rubin(grid, alpha),
        Method::MiBootRubin => pool_mi_boot_rubin(grid, alpha),
        Method::MiBootPooledPercentile => {
            pool_mi_boot_pooled_percentile(grid, alpha, PointChoice::Pooled)
        }
        Method::BootMiPercentile => pool_boot_mi_percentile(grid, alpha, PointChoice::Pooled),
        Method::VonHippel => pool_von_hippel(grid, alpha),
    }
}
