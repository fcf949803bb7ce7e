use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScenarioConfig;
use crate::data::{Method, PooledResult};
use crate::engines::{run_boot_then_mi, run_mi, run_mi_then_boot, ResampleOrder, ResamplePlan};
use crate::error::{Error, Result};
use crate::pooling::{self, RubinInputs};
use crate::rng::{derive_seed, substream, tag, Stream};

/// Largest tolerated fraction of failed replicates.
const MAX_FAILURE_RATE: f64 = 0.001;

/// One entry of a method battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    pub m: usize,
    /// Bootstrap count; ignored (0) for plain MI Rubin.
    pub b: usize,
}

impl MethodSpec {
    pub fn new(method: Method, m: usize, b: usize) -> Self {
        MethodSpec { method, m, b }
    }

    fn validate(&self) -> Result<()> {
        let (min_m, min_b) = match self.method {
            Method::MiRubin | Method::MiBootRubin => (2, 2),
            Method::MiBootPooledPercentile => (1, 1),
            Method::BootMiPercentile => (1, 2),
            Method::VonHippel => (2, 2),
        };
        let b_needed = self.method != Method::MiRubin;
        if self.m < min_m || (b_needed && self.b < min_b) || (self.m * self.b.max(1) < 2) {
            return Err(Error::InvalidSpec(format!(
                "{} cannot run with M = {}, B = {}",
                self.method, self.m, self.b
            )));
        }
        Ok(())
    }
}

/// MI Rubin (10), MI boot Rubin (10, 200), MI boot pooled percentile
/// (10, 200), Boot MI percentile (10, 200) and (1, 200), von Hippel (2, 200).
pub fn default_battery() -> Vec<MethodSpec> {
    vec![
        MethodSpec::new(Method::MiRubin, 10, 0),
        MethodSpec::new(Method::MiBootRubin, 10, 200),
        MethodSpec::new(Method::MiBootPooledPercentile, 10, 200),
        MethodSpec::new(Method::BootMiPercentile, 10, 200),
        MethodSpec::new(Method::BootMiPercentile, 1, 200),
        MethodSpec::new(Method::VonHippel, 2, 200),
    ]
}

/// Aggregate performance of one method over a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub method: Method,
    pub m: usize,
    pub b: usize,
    /// Replicates that contributed (failed replicates excluded).
    pub nsim: usize,
    pub coverage: f64,
    pub median_ci_width: f64,
    pub mc_se_coverage: f64,
    pub mean_point: f64,
    pub true_theta: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub scenario: String,
    pub master_seed: u64,
    pub alpha: f64,
    pub nsim: usize,
    pub failures: usize,
    pub summaries: Vec<SimulationSummary>,
}

impl StudyReport {
    pub fn summary(&self, method: Method, m: usize, b: usize) -> Option<&SimulationSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.m == m && s.b == b)
    }
}

/// Grid sizes needed to serve every method of a battery from one run per
/// resampling order.
#[derive(Debug, Default, Clone, Copy)]
struct GridNeeds {
    mi_m: usize,
    mi_b: usize,
    boot_b: usize,
    boot_m: usize,
}

impl GridNeeds {
    fn of(battery: &[MethodSpec]) -> Self {
        let mut g = GridNeeds::default();
        for s in battery {
            match s.method {
                Method::MiRubin => g.mi_m = g.mi_m.max(s.m),
                Method::MiBootRubin | Method::MiBootPooledPercentile => {
                    g.mi_m = g.mi_m.max(s.m);
                    g.mi_b = g.mi_b.max(s.b);
                }
                Method::BootMiPercentile | Method::VonHippel => {
                    g.boot_b = g.boot_b.max(s.b);
                    g.boot_m = g.boot_m.max(s.m);
                }
            }
        }
        g
    }
}

/// Runs the engines once per resampling order and pools every battery entry
/// from the leading block of the shared grid.
fn run_replicate(
    scenario: &ScenarioConfig,
    battery: &[MethodSpec],
    needs: GridNeeds,
    master_seed: u64,
    replicate: u64,
    alpha: f64,
) -> Result<Vec<PooledResult>> {
    let data = scenario
        .model
        .generate(&mut substream(master_seed, &[tag::DATA, replicate]))?;
    let seed = derive_seed(master_seed, &[tag::ENGINE, replicate]);

    let mi_grid = if needs.mi_b > 0 {
        let plan = ResamplePlan {
            m: needs.mi_m,
            b: needs.mi_b,
            seed,
            order: ResampleOrder::MiThenBoot,
        };
        Some(run_mi_then_boot(&data, &scenario.imputer, &scenario.analyzer, &plan)?)
    } else {
        None
    };
    let direct = match &mi_grid {
        Some(g) => g.direct().expect("engine attaches direct estimates").to_vec(),
        None if needs.mi_m > 0 => {
            run_mi(&data, &scenario.imputer, &scenario.analyzer, needs.mi_m, seed)?
        }
        None => Vec::new(),
    };
    let boot_grid = if needs.boot_b > 0 {
        let plan = ResamplePlan {
            m: needs.boot_m,
            b: needs.boot_b,
            seed,
            order: ResampleOrder::BootThenMi,
        };
        Some(run_boot_then_mi(&data, &scenario.imputer, &scenario.analyzer, &plan)?)
    } else {
        None
    };

    battery
        .iter()
        .map(|s| match s.method {
            Method::MiRubin => pooling::pool_rubin(&RubinInputs::from_estimates(&direct[..s.m], alpha)),
            Method::MiBootRubin | Method::MiBootPooledPercentile => {
                let grid = mi_grid.as_ref().expect("needed").leading_block(s.m, s.b)?;
                pooling::pool(s.method, &grid, alpha)
            }
            Method::BootMiPercentile | Method::VonHippel => {
                let grid = boot_grid.as_ref().expect("needed").leading_block(s.b, s.m)?;
                pooling::pool(s.method, &grid, alpha)
            }
        })
        .collect()
}

/// Coverage, median width and mean point of a set of intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate {
    pub n: usize,
    pub coverage: f64,
    pub mc_se: f64,
    pub median_width: f64,
    pub mean_point: f64,
}

impl CoverageEstimate {
    fn from_results<'a>(results: impl Iterator<Item = &'a PooledResult>, truth: f64) -> Self {
        let mut covered = 0usize;
        let mut widths = Vec::new();
        let mut point_sum = 0.0;
        for r in results {
            covered += usize::from(r.covers(truth));
            widths.push(r.width());
            point_sum += r.point;
        }
        let n = widths.len();
        let coverage = covered as f64 / n as f64;
        CoverageEstimate {
            n,
            coverage,
            mc_se: (coverage * (1.0 - coverage) / n as f64).sqrt(),
            median_width: median(&mut widths),
            mean_point: point_sum / n as f64,
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Generic coverage loop: `replicate` gets an independent stream per index
/// and returns an interval.
pub fn estimate_coverage<F>(nsim: usize, master_seed: u64, truth: f64, replicate: F) -> CoverageEstimate
where
    F: Fn(&mut Stream) -> PooledResult + Sync,
{
    let results: Vec<PooledResult> = (0..nsim as u64)
        .into_par_iter()
        .map(|r| replicate(&mut substream(master_seed, &[tag::DATA, r])))
        .collect();
    CoverageEstimate::from_results(results.iter(), truth)
}

/// Monte Carlo study of a method battery on one scenario.
pub fn run_study(
    scenario: &ScenarioConfig,
    battery: &[MethodSpec],
    nsim: usize,
    master_seed: u64,
    alpha: f64,
) -> Result<StudyReport> {
    if nsim == 0 {
        return Err(Error::InvalidSpec("nsim must be at least 1".into()));
    }
    if battery.is_empty() {
        return Err(Error::InvalidSpec("empty method battery".into()));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidSpec(format!("alpha {alpha} outside (0, 0.5)")));
    }
    scenario.validate()?;
    for s in battery {
        s.validate()?;
    }
    let needs = GridNeeds::of(battery);

    let outcomes: Vec<Result<Vec<PooledResult>>> = (0..nsim as u64)
        .into_par_iter()
        .map(|r| run_replicate(scenario, battery, needs, master_seed, r, alpha))
        .collect();

    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    if failures as f64 > MAX_FAILURE_RATE * nsim as f64 {
        let first = outcomes
            .iter()
            .find_map(|o| o.as_ref().err())
            .map(ToString::to_string)
            .unwrap_or_default();
        return Err(Error::StudyFailed {
            failures,
            nsim,
            first,
        });
    }
    let ok: Vec<&Vec<PooledResult>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let summaries = battery
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let est = CoverageEstimate::from_results(ok.iter().map(|r| &r[k]), scenario.true_theta);
            SimulationSummary {
                method: s.method,
                m: s.m,
                b: if s.method == Method::MiRubin { 0 } else { s.b },
                nsim: est.n,
                coverage: est.coverage,
                median_ci_width: est.median_width,
                mc_se_coverage: est.mc_se,
                mean_point: est.mean_point,
                true_theta: scenario.true_theta,
                failures,
            }
        })
        .collect();
    Ok(StudyReport {
        scenario: scenario.id.clone(),
        master_seed,
        alpha,
        nsim,
        failures,
        summaries,
    })
}

/// A single large-sample MI analysis of one dataset drawn from `scenario`,
/// pooled with Rubin's rules. Used to pin down the estimand of uncongenial
/// imputation schemes before coverage is scored against it.
pub fn calibration_estimate(scenario: &ScenarioConfig, m: usize, seed: u64) -> Result<PooledResult> {
    let data = scenario
        .model
        .generate(&mut substream(seed, &[tag::CALIBRATION]))?;
    let direct = run_mi(&data, &scenario.imputer, &scenario.analyzer, m, seed)?;
    pooling::pool_rubin(&RubinInputs::from_estimates(&direct, 0.05))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn battery_validation() {
        assert!(MethodSpec::new(Method::MiRubin, 1, 0).validate().is_err());
        assert!(MethodSpec::new(Method::VonHippel, 1, 200).validate().is_err());
        assert!(MethodSpec::new(Method::BootMiPercentile, 1, 200).validate().is_ok());
        assert!(MethodSpec::new(Method::MiBootRubin, 10, 1).validate().is_err());
        for s in default_battery() {
            s.validate().unwrap();
        }
    }

    #[test]
    fn grid_needs_cover_battery() {
        let n = GridNeeds::of(&default_battery());
        assert_eq!((n.mi_m, n.mi_b, n.boot_b, n.boot_m), (10, 200, 200, 10));
        let n = GridNeeds::of(&[MethodSpec::new(Method::MiRubin, 5, 0)]);
        assert_eq!((n.mi_m, n.mi_b, n.boot_b), (5, 0, 0));
    }
}
