//! Resampling drivers producing [`EstimateGrid`]s.
//!
//! Every cell draws from its own stream keyed by `(plan.seed, stage, g, j)`,
//! so a grid is a pure function of its inputs and the leading block of a
//! large plan equals the grid of a smaller plan with the same seed.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{AnalyzerSpec, BoundAnalyzer};
use crate::data::{Dataset, Estimate, EstimateGrid, Orientation};
use crate::error::{Error, Result};
use crate::imputation::{BoundImputer, ImputerSpec};
use crate::rng::{substream, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleOrder {
    MiThenBoot,
    BootThenMi,
}

impl ResampleOrder {
    pub fn orientation(self) -> Orientation {
        match self {
            ResampleOrder::MiThenBoot => Orientation::ImputationOuter,
            ResampleOrder::BootThenMi => Orientation::BootstrapOuter,
        }
    }
}

/// Numbers of imputations and bootstraps plus the seed everything derives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub m: usize,
    pub b: usize,
    pub seed: u64,
    pub order: ResampleOrder,
}

impl ResamplePlan {
    pub fn validate(&self, expected: ResampleOrder) -> Result<()> {
        if self.order != expected {
            return Err(Error::InvalidSpec(format!(
                "plan order is {:?}, engine runs {expected:?}",
                self.order
            )));
        }
        if self.m == 0 || self.b == 0 {
            return Err(Error::InvalidSpec(format!(
                "plan needs m ≥ 1 and b ≥ 1 (got m = {}, b = {})",
                self.m, self.b
            )));
        }
        Ok(())
    }
}

/// n rows drawn uniformly with replacement; masks travel with their rows.
pub fn bootstrap_sample<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Dataset {
    let n = data.nrows();
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    data.select_rows(&rows)
}

/// Imputer and analyzer bound to one dataset layout.
struct Pipeline {
    imputer: BoundImputer,
    analyzer: BoundAnalyzer,
}

impl Pipeline {
    fn new(data: &Dataset, imputer: &ImputerSpec, analyzer: &AnalyzerSpec) -> Result<Self> {
        Ok(Pipeline {
            imputer: imputer.bind(data)?,
            analyzer: analyzer.bind(data)?,
        })
    }

    fn impute_and_analyze(&self, data: &Dataset, seed: u64, path: &[u64]) -> Result<Estimate> {
        let completed = self.imputer.impute(data, &mut substream(seed, path))?;
        self.analyzer.estimate(&completed)
    }

    /// The M imputations of the original data and their analyses.
    fn direct(&self, data: &Dataset, m: usize, seed: u64) -> Result<Vec<(Dataset, Estimate)>> {
        (0..m)
            .into_par_iter()
            .map(|i| {
                let completed = self
                    .imputer
                    .impute(data, &mut substream(seed, &[tag::DIRECT_IMPUTE, i as u64]))
                    .map_err(|e| e.in_cell(i, 0))?;
                let est = self.analyzer.estimate(&completed).map_err(|e| e.in_cell(i, 0))?;
                Ok((completed, est))
            })
            .collect()
    }
}

/// Plain multiple imputation: M completed datasets, each analysed once.
pub fn run_mi(
    data: &Dataset,
    imputer: &ImputerSpec,
    analyzer: &AnalyzerSpec,
    m: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if m == 0 {
        return Err(Error::InvalidSpec("m must be at least 1".into()));
    }
    let pipeline = Pipeline::new(data, imputer, analyzer)?;
    Ok(pipeline
        .direct(data, m, seed)?
        .into_iter()
        .map(|(_, e)| e)
        .collect())
}

/// Impute M times, then bootstrap each completed dataset B times.
/// Row m of the grid holds θ̂_{m,1..B}; direct estimates hold θ̂_m.
pub fn run_mi_then_boot(
    data: &Dataset,
    imputer: &ImputerSpec,
    analyzer: &AnalyzerSpec,
    plan: &ResamplePlan,
) -> Result<EstimateGrid> {
    plan.validate(ResampleOrder::MiThenBoot)?;
    let pipeline = Pipeline::new(data, imputer, analyzer)?;
    let direct = pipeline.direct(data, plan.m, plan.seed)?;
    let rows = direct
        .par_iter()
        .enumerate()
        .map(|(i, (completed, _))| {
            (0..plan.b)
                .map(|j| {
                    let mut rng = substream(plan.seed, &[tag::INNER_BOOT, i as u64, j as u64]);
                    let resample = bootstrap_sample(completed, &mut rng);
                    pipeline
                        .analyzer
                        .estimate(&resample)
                        .map(|e| e.estimate)
                        .map_err(|e| e.in_cell(i, j))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    EstimateGrid::new(Orientation::ImputationOuter, rows)?
        .with_direct(direct.into_iter().map(|(_, e)| e).collect())
}

/// Bootstrap the incomplete data B times, then impute each resample M times.
/// Row b of the grid holds θ̂_{b,1..M}. Direct estimates (M imputations of
/// the original data) are attached for the θ̂_M point convention.
pub fn run_boot_then_mi(
    data: &Dataset,
    imputer: &ImputerSpec,
    analyzer: &AnalyzerSpec,
    plan: &ResamplePlan,
) -> Result<EstimateGrid> {
    plan.validate(ResampleOrder::BootThenMi)?;
    let pipeline = Pipeline::new(data, imputer, analyzer)?;
    let rows = (0..plan.b)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(plan.seed, &[tag::OUTER_BOOT, i as u64]);
            let resample = bootstrap_sample(data, &mut rng);
            (0..plan.m)
                .map(|j| {
                    pipeline
                        .impute_and_analyze(
                            &resample,
                            plan.seed,
                            &[tag::BOOT_IMPUTE, i as u64, j as u64],
                        )
                        .map(|e| e.estimate)
                        .map_err(|e| e.in_cell(i, j))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let direct = pipeline.direct(data, plan.m, plan.seed)?;
    EstimateGrid::new(Orientation::BootstrapOuter, rows)?
        .with_direct(direct.into_iter().map(|(_, e)| e).collect())
}

/// Dispatches on `plan.order`.
pub fn run_plan(
    data: &Dataset,
    imputer: &ImputerSpec,
    analyzer: &AnalyzerSpec,
    plan: &ResamplePlan,
) -> Result<EstimateGrid> {
    match plan.order {
        ResampleOrder::MiThenBoot => run_mi_then_boot(data, imputer, analyzer, plan),
        ResampleOrder::BootThenMi => run_boot_then_mi(data, imputer, analyzer, plan),
    }
}
