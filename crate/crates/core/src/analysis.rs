//! Complete-data analysis: ordinary least squares with an implicit intercept,
//! optional subgroup filtering and product (interaction) terms.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Estimate};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

pub const INTERCEPT: &str = "(intercept)";

/// Keep only rows where `column == equals`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub equals: f64,
}

/// The analyst's regression model and the coefficient reported as θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSpec {
    pub outcome: String,
    pub covariates: Vec<String>,
    #[serde(default)]
    pub interactions: Vec<[String; 2]>,
    #[serde(default)]
    pub filter: Option<RowFilter>,
    /// Name of the reported term: a covariate, or `a:b` for an interaction.
    pub target: String,
}

impl AnalyzerSpec {
    /// Design term names in column order, intercept first.
    pub fn term_names(&self) -> Vec<String> {
        std::iter::once(INTERCEPT.to_string())
            .chain(self.covariates.iter().cloned())
            .chain(self.interactions.iter().map(|[a, b]| format!("{a}:{b}")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.covariates.contains(&self.outcome) {
            return Err(Error::InvalidSpec(format!(
                "outcome `{}` is also listed as a covariate",
                self.outcome
            )));
        }
        let filter_col = self.filter.as_ref().map(|f| f.column.as_str());
        for pair in &self.interactions {
            for name in pair {
                if !self.covariates.contains(name) && Some(name.as_str()) != filter_col {
                    return Err(Error::InvalidSpec(format!(
                        "interaction term references `{name}`, which is neither a covariate nor the filter column"
                    )));
                }
            }
        }
        let names = self.term_names();
        if !names.iter().skip(1).any(|n| *n == self.target) {
            return Err(Error::InvalidSpec(format!(
                "target `{}` is not a term of the analysis model",
                self.target
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidSpec(format!("term `{dup}` appears twice")));
        }
        Ok(())
    }

    /// Resolves column names against a dataset layout.
    pub fn bind(&self, data: &Dataset) -> Result<BoundAnalyzer> {
        self.validate()?;
        let terms = self
            .covariates
            .iter()
            .map(|c| data.column_index(c).map(Term::Column))
            .chain(self.interactions.iter().map(|[a, b]| {
                Ok(Term::Product(data.column_index(a)?, data.column_index(b)?))
            }))
            .collect::<Result<Vec<_>>>()?;
        let names = self.term_names();
        let target = names.iter().position(|n| *n == self.target).expect("validated");
        Ok(BoundAnalyzer {
            layout: data.column_names().to_vec(),
            outcome: data.column_index(&self.outcome)?,
            terms,
            names,
            filter: self
                .filter
                .as_ref()
                .map(|f| data.column_index(&f.column).map(|c| (c, f.equals)))
                .transpose()?,
            target,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Column(usize),
    Product(usize, usize),
}

/// Least-squares fit output. Matrices are row-major, indexed like `terms`.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub covariance: Vec<f64>,
    pub residual_variance: f64,
    pub n_used: usize,
}

impl OlsFit {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        let i = self.terms.iter().position(|t| t == term)?;
        Some(self.coefficients[i])
    }

    pub fn variance(&self, term: &str) -> Option<f64> {
        let i = self.terms.iter().position(|t| t == term)?;
        Some(self.covariance[i * self.terms.len() + i])
    }
}

/// An [`AnalyzerSpec`] resolved to column indices of one dataset layout.
/// Resampled and imputed copies share the layout, so engines bind once.
#[derive(Debug, Clone)]
pub struct BoundAnalyzer {
    layout: Vec<String>,
    outcome: usize,
    terms: Vec<Term>,
    names: Vec<String>,
    filter: Option<(usize, f64)>,
    target: usize,
}

impl BoundAnalyzer {
    fn columns_used(&self) -> Vec<usize> {
        let mut cols = vec![self.outcome];
        for t in &self.terms {
            match *t {
                Term::Column(c) => cols.push(c),
                Term::Product(a, b) => cols.extend([a, b]),
            }
        }
        cols.sort_unstable();
        cols.dedup();
        cols
    }

    fn selected_rows(&self, data: &Dataset) -> Result<Vec<usize>> {
        let rows: Vec<usize> = match self.filter {
            None => (0..data.nrows()).collect(),
            Some((col, value)) => {
                let (v, m) = data.column_raw(col);
                let mut rows = Vec::new();
                for r in 0..data.nrows() {
                    if !m[r] {
                        return Err(Error::MissingValue {
                            column: self.layout[col].clone(),
                            row: r,
                        });
                    }
                    if v[r] == value {
                        rows.push(r);
                    }
                }
                rows
            }
        };
        for col in self.columns_used() {
            let mask = data.column_raw(col).1;
            if let Some(&r) = rows.iter().find(|&&r| !mask[r]) {
                return Err(Error::MissingValue {
                    column: self.layout[col].clone(),
                    row: r,
                });
            }
        }
        Ok(rows)
    }

    pub fn fit(&self, data: &Dataset) -> Result<OlsFit> {
        if data.column_names() != self.layout.as_slice() {
            return Err(Error::InvalidSpec(
                "dataset layout differs from the one the analyzer was bound to".into(),
            ));
        }
        let rows = self.selected_rows(data)?;
        let p = self.terms.len() + 1;
        let n = rows.len();
        if n <= p {
            return Err(Error::TooFew {
                what: "rows for the analysis model (must exceed the number of terms)",
                needed: p + 1,
                found: n,
            });
        }
        let y = data.column_raw(self.outcome).0;
        let cols: Vec<(&[f64], Option<&[f64]>)> = self
            .terms
            .iter()
            .map(|t| match *t {
                Term::Column(c) => (data.column_raw(c).0, None),
                Term::Product(a, b) => (data.column_raw(a).0, Some(data.column_raw(b).0)),
            })
            .collect();
        let fill = |r: usize, x: &mut [f64]| {
            x[0] = 1.0;
            for (k, (a, b)) in cols.iter().enumerate() {
                x[k + 1] = match b {
                    None => a[r],
                    Some(b) => a[r] * b[r],
                };
            }
        };

        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p];
        let mut x = vec![0.0; p];
        for &r in &rows {
            fill(r, &mut x);
            for i in 0..p {
                xty[i] += x[i] * y[r];
                for j in i..p {
                    xtx[i * p + j] += x[i] * x[j];
                }
            }
        }
        let chol = Cholesky::factor(&xtx, p).map_err(|j| Error::Singular {
            term: self.names[j].clone(),
        })?;
        let coefficients = chol.solve(&xty);
        let rss: f64 = rows
            .iter()
            .map(|&r| {
                fill(r, &mut x);
                let fitted: f64 = x.iter().zip(&coefficients).map(|(a, b)| a * b).sum();
                (y[r] - fitted).powi(2)
            })
            .sum();
        let residual_variance = rss / (n - p) as f64;
        let covariance = chol
            .inverse()
            .into_iter()
            .map(|v| v * residual_variance)
            .collect();
        Ok(OlsFit {
            terms: self.names.clone(),
            coefficients,
            covariance,
            residual_variance,
            n_used: n,
        })
    }

    /// θ̂ and its analytic variance.
    pub fn estimate(&self, data: &Dataset) -> Result<Estimate> {
        let fit = self.fit(data)?;
        let p = fit.terms.len();
        Ok(Estimate {
            estimate: fit.coefficients[self.target],
            variance: fit.covariance[self.target * p + self.target],
        })
    }
}

/// OLS of the spec's outcome on its design, with `σ̂²(XᵀX)⁻¹` covariance.
pub fn fit_ols(data: &Dataset, spec: &AnalyzerSpec) -> Result<OlsFit> {
    spec.bind(data)?.fit(data)
}

/// The target coefficient and its variance.
pub fn analyze(data: &Dataset, spec: &AnalyzerSpec) -> Result<Estimate> {
    spec.bind(data)?.estimate(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(outcome: &str, covs: &[&str], target: &str) -> AnalyzerSpec {
        AnalyzerSpec {
            outcome: outcome.into(),
            covariates: covs.iter().map(|s| s.to_string()).collect(),
            interactions: vec![],
            filter: None,
            target: target.into(),
        }
    }

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_fit_recovers_slope() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let d = Dataset::complete(names(&["x", "y"]), vec![x, y]).unwrap();
        let fit = fit_ols(&d, &spec("y", &["x"], "x")).unwrap();
        assert!((fit.coefficient("x").unwrap() - 2.0).abs() < 1e-12);
        assert!(fit.residual_variance < 1e-20);
        let est = analyze(&d, &spec("y", &["x"], "x")).unwrap();
        assert!((est.estimate - 2.0).abs() < 1e-12);
        assert!(est.variance < 1e-20);
    }

    #[test]
    fn collinear_covariates_are_singular() {
        let x: Vec<f64> = (0..10).map(|v| f64::from(v).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let d = Dataset::complete(names(&["x", "z", "y"]), vec![x.clone(), x, y]).unwrap();
        let err = fit_ols(&d, &spec("y", &["x", "z"], "x")).unwrap_err();
        assert!(matches!(err, Error::Singular { ref term } if term == "z"), "{err}");
    }

    #[test]
    fn empty_subgroup_is_an_error() {
        let d = Dataset::complete(
            names(&["x", "g", "y"]),
            vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4], vec![1.0, 3.0, 2.0, 5.0]],
        )
        .unwrap();
        let mut s = spec("y", &["x"], "x");
        s.filter = Some(RowFilter {
            column: "g".into(),
            equals: 1.0,
        });
        assert!(matches!(analyze(&d, &s), Err(Error::TooFew { found: 0, .. })));
    }

    #[test]
    fn constant_modifier_interaction_is_singular() {
        let x: Vec<f64> = (0..20).map(|v| f64::from(v).cos()).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + (i as f64).sin()).collect();
        let d = Dataset::complete(names(&["x", "g", "y"]), vec![x, vec![1.0; 20], y]).unwrap();
        let mut s = spec("y", &["x"], "x");
        s.filter = Some(RowFilter {
            column: "g".into(),
            equals: 1.0,
        });
        s.interactions = vec![["x".into(), "g".into()]];
        assert!(matches!(fit_ols(&d, &s), Err(Error::Singular { .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(spec("y", &["y"], "y").validate().is_err());
        assert!(spec("y", &["x"], "z").validate().is_err());
        assert!(spec("y", &["x"], INTERCEPT).validate().is_err());
        let mut s = spec("y", &["x"], "x:w");
        s.interactions = vec![["x".into(), "w".into()]];
        assert!(s.validate().is_err());
        s.covariates.push("w".into());
        assert!(s.validate().is_ok());
    }

    #[test]
    fn missing_analysis_value_is_reported() {
        let d = Dataset::new(
            names(&["x", "y"]),
            vec![
                vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
                vec![Some(1.0), None, Some(2.0), Some(5.0)],
            ],
        )
        .unwrap();
        let err = analyze(&d, &spec("y", &["x"], "x")).unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 1, .. }));
    }

    #[test]
    fn unknown_column_is_config_error() {
        let d = Dataset::complete(names(&["x", "y"]), vec![vec![1.0; 3], vec![1.0; 3]]).unwrap();
        let err = analyze(&d, &spec("y", &["w"], "w")).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Config);
    }
}
