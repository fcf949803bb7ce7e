//! CSV and JSON reading and writing.
//!
//! Floats in CSV output are written with 17 significant digits in
//! scientific notation, which round-trips every `f64` and does not depend on
//! locale. Infinite degrees of freedom are written as `inf`.

use std::collections::BTreeMap;
use std::io::Read;

use bootmi::simlab::StudyReport;
use bootmi::{Dataset, Estimate, EstimateGrid, Orientation, PooledResult};
use serde_json::Value;

use crate::config::Format;
use crate::error::CliError;

pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn data_error(what: impl std::fmt::Display) -> CliError {
    CliError::Data(what.to_string())
}

/// Header row of column names; an empty cell is a missing value.
pub fn read_dataset(source: impl Read) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let names: Vec<String> = reader
        .headers()
        .map_err(data_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(data_error)?;
        for (c, cell) in record.iter().enumerate() {
            let value = if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| {
                    data_error(format!("row {}, column `{}`: `{cell}` is not a number", i + 1, names[c]))
                })?)
            };
            columns[c].push(value);
        }
    }
    Ok(Dataset::new(names, columns)?)
}

fn parse_orientation(line: &str) -> Result<Orientation, CliError> {
    let meta = line
        .strip_prefix('#')
        .ok_or_else(|| CliError::Config("grid file must start with `# orientation=...`".into()))?;
    meta.split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == "orientation")
        .ok_or_else(|| CliError::Config("grid header comment declares no orientation".into()))?
        .1
        .parse()
        .map_err(CliError::Core)
}

/// Reads a grid CSV: a `# orientation=...` line, then
/// `group,rep,estimate[,within_variance]` rows. Rows whose rep is `direct`
/// carry the original-data estimates, indexed by imputation in `group`, with
/// their analytic variance in `within_variance`.
pub fn read_grid(text: &str) -> Result<EstimateGrid, CliError> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let orientation = parse_orientation(first.trim())?;

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header: Vec<String> = reader.headers().map_err(data_error)?.iter().map(str::to_string).collect();
    let expected = ["group", "rep", "estimate", "within_variance"];
    if header.len() < 3 || header.len() > 4 || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(data_error(format!(
            "grid columns must be group,rep,estimate[,within_variance], found {}",
            header.join(",")
        )));
    }

    let mut cells: BTreeMap<(usize, usize), (f64, Option<f64>)> = BTreeMap::new();
    let mut direct: BTreeMap<usize, Estimate> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(data_error)?;
        let at = |what: &str| data_error(format!("grid row {}: {what}", line + 1));
        let number = |i: usize| -> Result<Option<f64>, CliError> {
            match record.get(i).unwrap_or("") {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| at(&format!("`{s}` is not a number"))),
            }
        };
        let group: usize = record[0].parse().map_err(|_| at("group must be a non-negative integer"))?;
        let estimate = number(2)?.ok_or_else(|| at("missing estimate"))?;
        let within = number(3)?;
        if &record[1] == "direct" {
            let variance = within.ok_or_else(|| at("direct rows need within_variance"))?;
            if direct.insert(group, Estimate { estimate, variance }).is_some() {
                return Err(at("duplicate direct estimate"));
            }
            continue;
        }
        let rep: usize = record[1].parse().map_err(|_| at("rep must be an integer or `direct`"))?;
        if cells.insert((group, rep), (estimate, within)).is_some() {
            return Err(at("duplicate cell"));
        }
    }

    let groups = cells.keys().map(|k| k.0 + 1).max().unwrap_or(0);
    let reps = cells.keys().map(|k| k.1 + 1).max().unwrap_or(0);
    if cells.len() != groups * reps {
        return Err(data_error(format!(
            "grid has {} cells, expected a full {groups} × {reps} block",
            cells.len()
        )));
    }
    let rows: Vec<Vec<f64>> = (0..groups)
        .map(|g| (0..reps).map(|r| cells[&(g, r)].0).collect())
        .collect();
    let mut grid = EstimateGrid::new(orientation, rows)?;

    let within: Vec<Option<f64>> = cells.values().map(|c| c.1).collect();
    if within.iter().all(Option::is_some) {
        let rows = within
            .chunks(reps)
            .map(|r| r.iter().map(|v| v.expect("checked")).collect())
            .collect();
        grid = grid.with_within_variances(rows)?;
    } else if within.iter().any(Option::is_some) {
        return Err(data_error("within_variance must be given for every cell or none"));
    }

    if !direct.is_empty() {
        if direct.keys().copied().ne(0..direct.len()) {
            return Err(data_error("direct estimates must be numbered 0, 1, ... without gaps"));
        }
        grid = grid.with_direct(direct.into_values().collect())?;
    }
    Ok(grid)
}

pub fn write_grid(grid: &EstimateGrid) -> String {
    let mut out = format!("# orientation={}\n", grid.orientation());
    let with_within = grid.within_variance(0, 0).is_some() || grid.direct().is_some();
    out.push_str(if with_within {
        "group,rep,estimate,within_variance\n"
    } else {
        "group,rep,estimate\n"
    });
    for (g, row) in grid.rows().enumerate() {
        for (r, v) in row.iter().enumerate() {
            out.push_str(&format!("{g},{r},{}", float(*v)));
            if with_within {
                out.push(',');
                if let Some(w) = grid.within_variance(g, r) {
                    out.push_str(&float(w));
                }
            }
            out.push('\n');
        }
    }
    for (j, d) in grid.direct().unwrap_or(&[]).iter().enumerate() {
        out.push_str(&format!("{j},direct,{},{}\n", float(d.estimate), float(d.variance)));
    }
    out
}

fn json_text(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn result_json(r: &PooledResult) -> Value {
    let mut v = serde_json::to_value(r).expect("serializable");
    if r.df.is_infinite() {
        v["df"] = Value::from("inf");
    }
    v
}

pub fn format_result(r: &PooledResult, format: Format) -> String {
    match format {
        Format::Json => json_text(&result_json(r)),
        Format::Csv => {
            let header = "method,m,b,point,variance,df,ci_lower,ci_upper,alpha,fallback_used\n";
            format!(
                "{header}{},{},{},{},{},{},{},{},{},{}\n",
                r.method,
                r.m,
                r.b,
                float(r.point),
                float(r.variance),
                float(r.df),
                float(r.ci_lower),
                float(r.ci_upper),
                float(r.alpha),
                r.fallback_used
            )
        }
    }
}

pub fn format_report(report: &StudyReport, format: Format) -> String {
    match format {
        Format::Json => json_text(report),
        Format::Csv => {
            let mut out = String::from(
                "method,m,b,nsim,coverage,median_ci_width,mc_se_coverage,mean_point,true_theta,failures\n",
            );
            for s in &report.summaries {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    s.method,
                    s.m,
                    s.b,
                    s.nsim,
                    float(s.coverage),
                    float(s.median_ci_width),
                    float(s.mc_se_coverage),
                    float(s.mean_point),
                    float(s.true_theta),
                    s.failures
                ));
            }
            out
        }
    }
}
