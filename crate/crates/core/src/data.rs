//! Shared data containers: datasets with a missingness mask, grids of
//! resampled estimates, and pooled inference records.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value stored in masked-out cells. Never meant to be read; if it leaks into
/// arithmetic the result turns NaN and tests catch it.
pub const MISSING_SENTINEL: f64 = f64::NAN;

/// Rectangular numeric data with an explicit observed/missing mask.
///
/// Storage is column-major. The mask is authoritative: `true` means observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    nrows: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl Dataset {
    /// Builds a dataset from columns of optional values (`None` = missing).
    pub fn new(names: Vec<String>, columns: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidData(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let nrows = columns.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(nrows * columns.len());
        let mut mask = Vec::with_capacity(nrows * columns.len());
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != nrows {
                return Err(Error::InvalidData(format!(
                    "column `{name}` has {} rows, expected {nrows}",
                    col.len()
                )));
            }
            for cell in col {
                match cell {
                    Some(v) if v.is_finite() => {
                        values.push(*v);
                        mask.push(true);
                    }
                    Some(v) => {
                        return Err(Error::InvalidData(format!(
                            "non-finite value {v} in column `{name}`"
                        )))
                    }
                    None => {
                        values.push(MISSING_SENTINEL);
                        mask.push(false);
                    }
                }
            }
        }
        Self::check_names(&names)?;
        Ok(Dataset {
            names,
            nrows,
            values,
            mask,
        })
    }

    /// Builds a fully observed dataset.
    pub fn complete(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let cols = columns
            .into_iter()
            .map(|c| c.into_iter().map(Some).collect())
            .collect();
        Self::new(names, cols)
    }

    fn check_names(names: &[String]) -> Result<()> {
        let mut seen = HashSet::new();
        for n in names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidData(format!("duplicate column name `{n}`")));
            }
        }
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Observed value at `(row, col)`, or `None` when the cell is missing.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = col * self.nrows + row;
        self.mask[i].then(|| self.values[i])
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[col * self.nrows + row]
    }

    /// Raw column storage and its mask. Entries where the mask is `false`
    /// hold the sentinel and must not be used.
    pub fn column_raw(&self, col: usize) -> (&[f64], &[bool]) {
        let r = col * self.nrows..(col + 1) * self.nrows;
        (&self.values[r.clone()], &self.mask[r])
    }

    pub fn missing_count(&self, col: usize) -> usize {
        self.column_raw(col).1.iter().filter(|o| !**o).count()
    }

    pub(crate) fn fill(&mut self, row: usize, col: usize, value: f64) {
        let i = col * self.nrows + row;
        debug_assert!(!self.mask[i], "imputation must not overwrite an observed cell");
        self.values[i] = value;
        self.mask[i] = true;
    }

    /// New dataset made of the given rows, in order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let p = self.ncols();
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut mask = Vec::with_capacity(rows.len() * p);
        for col in 0..p {
            let (v, m) = self.column_raw(col);
            values.extend(rows.iter().map(|&r| v[r]));
            mask.extend(rows.iter().map(|&r| m[r]));
        }
        Dataset {
            names: self.names.clone(),
            nrows: rows.len(),
            values,
            mask,
        }
    }

    /// True when every observed cell of `self` is bitwise identical in `other`.
    pub fn observed_cells_preserved_in(&self, other: &Dataset) -> bool {
        self.names == other.names
            && self.nrows == other.nrows
            && self
                .mask
                .iter()
                .zip(&self.values)
                .zip(other.mask.iter().zip(&other.values))
                .all(|((&m, &v), (&m2, &v2))| !m || (m2 && v.to_bits() == v2.to_bits()))
    }
}

/// Which resampling loop is outermost in an [`EstimateGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Rows are imputations, columns bootstrap resamples of that imputation.
    ImputationOuter,
    /// Rows are bootstrap resamples, columns imputations of that resample.
    BootstrapOuter,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::ImputationOuter => "imputation_outer",
            Orientation::BootstrapOuter => "bootstrap_outer",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imputation_outer" => Ok(Orientation::ImputationOuter),
            "bootstrap_outer" => Ok(Orientation::BootstrapOuter),
            other => Err(Error::InvalidSpec(format!("unknown orientation `{other}`"))),
        }
    }
}

/// A point estimate with its complete-data (analytic) variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub variance: f64,
}

/// G × M matrix of point estimates produced by one of the resampling engines.
///
/// Direct estimates are the M analyses of the imputations of the original
/// (non-resampled) data, kept alongside the grid because Rubin-type poolers
/// need them.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateGrid {
    orientation: Orientation,
    groups: usize,
    reps: usize,
    estimates: Vec<f64>,
    within: Option<Vec<f64>>,
    direct: Option<Vec<Estimate>>,
}

impl EstimateGrid {
    pub fn new(orientation: Orientation, rows: Vec<Vec<f64>>) -> Result<Self> {
        let groups = rows.len();
        let reps = rows.first().map_or(0, Vec::len);
        if groups == 0 || reps == 0 {
            return Err(Error::InvalidData("estimate grid must be at least 1 × 1".into()));
        }
        if rows.iter().any(|r| r.len() != reps) {
            return Err(Error::InvalidData("estimate grid rows differ in length".into()));
        }
        let estimates: Vec<f64> = rows.into_iter().flatten().collect();
        check_finite(&estimates, "estimate")?;
        Ok(EstimateGrid {
            orientation,
            groups,
            reps,
            estimates,
            within: None,
            direct: None,
        })
    }

    /// Attaches a per-cell within variance matrix of the same shape.
    pub fn with_within_variances(mut self, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != self.groups || rows.iter().any(|r| r.len() != self.reps) {
            return Err(Error::InvalidData(
                "within-variance matrix does not match grid dimensions".into(),
            ));
        }
        let within: Vec<f64> = rows.into_iter().flatten().collect();
        check_finite(&within, "within variance")?;
        if within.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidData("negative within variance".into()));
        }
        self.within = Some(within);
        Ok(self)
    }

    /// Attaches the direct estimates (one per imputation of the original data).
    pub fn with_direct(mut self, direct: Vec<Estimate>) -> Result<Self> {
        if direct.is_empty() {
            return Err(Error::InvalidData("empty direct estimate list".into()));
        }
        for d in &direct {
            if !d.estimate.is_finite() || !d.variance.is_finite() || d.variance < 0.0 {
                return Err(Error::InvalidData(format!(
                    "invalid direct estimate {} (variance {})",
                    d.estimate, d.variance
                )));
            }
        }
        self.direct = Some(direct);
        Ok(self)
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Number of outer groups (G).
    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Number of repetitions per group.
    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn row(&self, g: usize) -> &[f64] {
        &self.estimates[g * self.reps..(g + 1) * self.reps]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.estimates.chunks_exact(self.reps)
    }

    pub fn values(&self) -> &[f64] {
        &self.estimates
    }

    pub fn within_variance(&self, g: usize, j: usize) -> Option<f64> {
        self.within.as_ref().map(|w| w[g * self.reps + j])
    }

    pub fn direct(&self) -> Option<&[Estimate]> {
        self.direct.as_deref()
    }

    pub fn row_means(&self) -> Vec<f64> {
        self.rows().map(mean).collect()
    }

    pub fn grand_mean(&self) -> f64 {
        mean(&self.estimates)
    }

    /// The leading `groups × reps` block. For engine output this is exactly
    /// the grid a smaller plan with the same seed would have produced.
    pub fn leading_block(&self, groups: usize, reps: usize) -> Result<EstimateGrid> {
        if groups == 0 || reps == 0 || groups > self.groups || reps > self.reps {
            return Err(Error::InvalidSpec(format!(
                "block {groups} × {reps} does not fit in a {} × {} grid",
                self.groups, self.reps
            )));
        }
        let take = |src: &[f64]| -> Vec<f64> {
            (0..groups)
                .flat_map(|g| src[g * self.reps..g * self.reps + reps].iter().copied())
                .collect()
        };
        let direct_len = match self.orientation {
            Orientation::ImputationOuter => groups,
            Orientation::BootstrapOuter => reps,
        };
        Ok(EstimateGrid {
            orientation: self.orientation,
            groups,
            reps,
            estimates: take(&self.estimates),
            within: self.within.as_deref().map(take),
            direct: self
                .direct
                .as_ref()
                .map(|d| d[..direct_len.min(d.len())].to_vec()),
        })
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::InvalidData(format!("non-finite {what} {v}"))),
        None => Ok(()),
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Row means of a grid, one per outer group.
pub fn grid_row_means(grid: &EstimateGrid) -> Vec<f64> {
    grid.row_means()
}

/// Mean of all G·M grid entries.
pub fn grid_grand_mean(grid: &EstimateGrid) -> f64 {
    grid.grand_mean()
}

/// The five combination procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MiRubin,
    MiBootRubin,
    MiBootPooledPercentile,
    BootMiPercentile,
    VonHippel,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MiRubin,
        Method::MiBootRubin,
        Method::MiBootPooledPercentile,
        Method::BootMiPercentile,
        Method::VonHippel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::MiRubin => "mi-rubin",
            Method::MiBootRubin => "mi-boot-rubin",
            Method::MiBootPooledPercentile => "mi-boot-pooled-percentile",
            Method::BootMiPercentile => "boot-mi-percentile",
            Method::VonHippel => "von-hippel",
        }
    }

    /// Grid orientation the method consumes.
    pub fn orientation(self) -> Orientation {
        match self {
            Method::MiRubin | Method::MiBootRubin | Method::MiBootPooledPercentile => {
                Orientation::ImputationOuter
            }
            Method::BootMiPercentile | Method::VonHippel => Orientation::BootstrapOuter,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown method `{s}`")))
    }
}

/// Outcome of one pooling procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledResult {
    pub method: Method,
    /// Number of imputations (M).
    pub m: usize,
    /// Number of bootstrap resamples (B); 0 for plain MI.
    pub b: usize,
    pub point: f64,
    pub variance: f64,
    /// Degrees of freedom; `f64::INFINITY` means normal quantiles were used.
    pub df: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub alpha: f64,
    pub fallback_used: bool,
}

impl PooledResult {
    pub fn width(&self) -> f64 {
        self.ci_upper - self.ci_lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// One-way ANOVA decomposition of a grid of estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub msb: f64,
    pub msw: f64,
    pub sigma2_inf: f64,
    pub sigma2_btw: f64,
    pub fallback_used: bool,
}
