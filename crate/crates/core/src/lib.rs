//! Combining bootstrap resampling with multiple imputation.
//!
//! The crate provides
//!
//! * complete-data OLS analysis ([`analysis`]),
//! * proper MAR and jump-to-reference regression imputation ([`imputation`]),
//! * impute-then-bootstrap and bootstrap-then-impute drivers ([`engines`]),
//! * the five pooling procedures: Rubin's rules, MI boot Rubin, MI boot pooled
//!   percentile, Boot MI percentile and the ANOVA-based von Hippel estimator
//!   ([`pooling`]),
//! * scenario generators and a coverage simulation driver ([`simlab`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod data;
pub mod engines;
mod error;
pub mod imputation;
mod linalg;
pub mod pooling;
pub mod rng;
pub mod simlab;

pub use analysis::{analyze, fit_ols, AnalyzerSpec, OlsFit, RowFilter};
pub use data::{
    grid_grand_mean, grid_row_means, Dataset, Estimate, EstimateGrid, Method, Orientation,
    PooledResult, VarianceComponents,
};
pub use engines::{
    bootstrap_sample, run_boot_then_mi, run_mi, run_mi_then_boot, run_plan, ResampleOrder,
    ResamplePlan,
};
pub use error::{Error, ErrorKind, Result};
pub use imputation::{
    impute, impute_jump_to_reference, impute_mar_proper, ImputationMode, ImputerSpec,
};
pub use linalg::PIVOT_TOLERANCE;
pub use pooling::{
    empirical_percentile, one_way_anova, pool, pool_boot_mi_percentile, pool_mi_boot_pooled_percentile,
    pool_mi_boot_rubin, pool_rubin, pool_von_hippel, PointChoice, RubinInputs,
};
