//! CSV ingestion of regression data and CSV emission of regions and
//! simulation reports.

use std::io::{Read, Write};
use std::path::Path;

use crate::conformal::IntervalUnion;
use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::sim::StudyReport;

/// Min-max scaling of one predictor column onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnScaling {
    pub min: f64,
    pub max: f64,
}

impl ColumnScaling {
    pub fn to_unit(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        self.min + u * (self.max - self.min)
    }
}

/// How a predictor column was read.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Numeric,
    /// Two-level factor; the first level maps to 0, the second to 1.
    Binary([String; 2]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    /// Predictors rescaled to `[0, 1]`, response unchanged.
    pub dataset: Dataset,
    pub response: String,
    pub predictors: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub scaling: Vec<ColumnScaling>,
    /// Rows dropped for a missing value in a selected column.
    pub dropped: usize,
}

impl LoadedData {
    /// Predictors of row `i` in original units (binary factors as 0/1).
    pub fn original_x(&self, i: usize) -> Vec<f64> {
        self.unscale(self.dataset.x(i))
    }

    pub fn unscale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.scaling)
            .map(|(u, s)| s.from_unit(*u))
            .collect()
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.scaling)
            .map(|(v, s)| s.to_unit(*v))
            .collect()
    }

    pub fn predictor_index(&self, name: &str) -> Option<usize> {
        self.predictors.iter().position(|p| p == name)
    }

    /// Reads predictor rows (original units, same column names) from a headed
    /// CSV and scales them like the training predictors.
    pub fn read_points<R: Read>(&self, reader: R) -> Result<Vec<Vec<f64>>> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols = self
            .predictors
            .iter()
            .map(|p| {
                headers.iter().position(|h| h == p).ok_or_else(|| {
                    Error::InvalidInput(format!("query file lacks predictor column '{p}'"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let raw = cols
                .iter()
                .zip(&self.kinds)
                .zip(&self.predictors)
                .map(|((&c, kind), name)| {
                    let cell = record.get(c).unwrap_or("");
                    match kind {
                        ColumnKind::Numeric => cell
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| {
                                Error::InvalidInput(format!("non-numeric query value '{cell}'"))
                            }),
                        ColumnKind::Binary(levels) => levels
                            .iter()
                            .position(|l| l == cell)
                            .map(|k| k as f64)
                            .ok_or_else(|| {
                                Error::InvalidInput(format!(
                                    "query value '{cell}' is not a level of '{name}'"
                                ))
                            }),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(self.scale(&raw));
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("query file has no rows".into()));
        }
        Ok(out)
    }
}

fn is_missing(field: &str) -> bool {
    matches!(field.trim(), "" | "NA" | "na" | "NaN" | "nan" | "." | "?")
}

/// Reads the named columns from a headed CSV file.
pub fn load_csv(
    path: impl AsRef<Path>,
    response: &str,
    predictors: &[String],
) -> Result<LoadedData> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| {
        Error::InvalidInput(format!("cannot open {}: {e}", path.as_ref().display()))
    })?;
    read_csv(file, response, predictors)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, response: &str, predictors: &[String]) -> Result<LoadedData> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("column '{name}' not found in header")))
    };
    let response_col = find(response)?;
    let predictor_cols = predictors
        .iter()
        .map(|p| find(p))
        .collect::<Result<Vec<_>>>()?;

    let mut raw: Vec<Vec<String>> = Vec::new();
    let mut dropped = 0;
    for record in rdr.records() {
        let record = record?;
        let cells: Vec<&str> = std::iter::once(response_col)
            .chain(predictor_cols.iter().copied())
            .map(|c| record.get(c).unwrap_or(""))
            .collect();
        if cells.iter().any(|c| is_missing(c)) {
            dropped += 1;
            continue;
        }
        raw.push(cells.into_iter().map(str::to_string).collect());
    }
    if raw.is_empty() {
        return Err(Error::InvalidInput(
            "no complete rows in the selected columns".into(),
        ));
    }

    let ys = raw
        .iter()
        .map(|row| {
            row[0]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::InvalidInput(format!("non-numeric response value '{}'", row[0]))
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let d = predictors.len();
    let mut columns = Vec::with_capacity(d);
    let mut kinds = Vec::with_capacity(d);
    for (j, name) in predictors.iter().enumerate() {
        let (values, kind) = parse_predictor(name, raw.iter().map(|row| row[j + 1].as_str()))?;
        columns.push(values);
        kinds.push(kind);
    }

    let mut scaling = Vec::with_capacity(d);
    for (name, col) in predictors.iter().zip(&mut columns) {
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(Error::InvalidInput(format!(
                "predictor column '{name}' is constant"
            )));
        }
        let s = ColumnScaling { min, max };
        for v in col.iter_mut() {
            *v = s.to_unit(*v);
        }
        scaling.push(s);
    }

    let n = ys.len();
    let mut xs = Vec::with_capacity(n * d);
    for i in 0..n {
        xs.extend(columns.iter().map(|c| c[i]));
    }
    Ok(LoadedData {
        dataset: Dataset::new(d, xs, ys)?,
        response: response.to_string(),
        predictors: predictors.to_vec(),
        kinds,
        scaling,
        dropped,
    })
}

fn parse_predictor<'a>(
    name: &str,
    cells: impl Iterator<Item = &'a str> + Clone,
) -> Result<(Vec<f64>, ColumnKind)> {
    let numeric: Option<Vec<f64>> = cells
        .clone()
        .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    if let Some(values) = numeric {
        return Ok((values, ColumnKind::Numeric));
    }
    let mut levels: Vec<&str> = cells.clone().collect();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "predictor column '{name}' is neither numeric nor a two-level factor"
        )));
    }
    let values = cells
        .map(|c| if c == levels[0] { 0.0 } else { 1.0 })
        .collect();
    Ok((
        values,
        ColumnKind::Binary([levels[0].to_string(), levels[1].to_string()]),
    ))
}

/// Decimal text with 10 significant digits.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    if !(-6..15).contains(&magnitude) {
        return format!("{v:.9e}");
    }
    let decimals = (9 - magnitude).max(0) as usize;
    let text = format!("{v:.decimals$}");
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    }
}

/// One query point's region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecord {
    pub row_id: usize,
    /// Predictors in original units.
    pub predictors: Vec<f64>,
    pub region: IntervalUnion,
}

/// Writes one line per (query point, piece): `row_id`, predictors,
/// `piece_index`, `lower`, `upper`. Points with an empty region produce no
/// lines.
pub fn write_regions<W: Write>(
    writer: W,
    predictor_names: &[String],
    records: &[RegionRecord],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["row_id".to_string()];
    header.extend(predictor_names.iter().cloned());
    header.extend(["piece_index", "lower", "upper"].map(String::from));
    wtr.write_record(&header)?;
    for rec in records {
        for (k, &(a, b)) in rec.region.pieces().iter().enumerate() {
            let mut line = vec![rec.row_id.to_string()];
            line.extend(rec.predictors.iter().map(|v| format_value(*v)));
            line.push(k.to_string());
            line.push(format_value(a));
            line.push(format_value(b));
            wtr.write_record(&line)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Parsed line of a regions file.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub row_id: usize,
    pub predictors: Vec<f64>,
    pub piece_index: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Reads a file written by [`write_regions`].
pub fn read_regions<R: Read>(reader: R) -> Result<Vec<RegionRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 4 {
        return Err(Error::InvalidInput(
            "regions file has too few columns".into(),
        ));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad number '{s}' in regions file")))
    };
    let idx = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::InvalidInput(format!("bad index '{s}' in regions file")))
    };
    let mut out = Vec::new();
    for record in rdr.records() {
        let r = record?;
        if r.len() != width {
            return Err(Error::InvalidInput("ragged regions file".into()));
        }
        out.push(RegionRow {
            row_id: idx(&r[0])?,
            predictors: (1..width - 3).map(|j| num(&r[j])).collect::<Result<_>>()?,
            piece_index: idx(&r[width - 3])?,
            lower: num(&r[width - 2])?,
            upper: num(&r[width - 1])?,
        });
    }
    Ok(out)
}

/// Writes `method,metric,value` lines for every method of a study.
pub fn write_study_report<W: Write>(writer: W, report: &StudyReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["method", "metric", "value"])?;
    for (method, s) in &report.methods {
        let m = method.as_str();
        wtr.write_record([
            m,
            "marginal_coverage",
            &format_value(s.mean_marginal_coverage),
        ])?;
        for (bin, rate) in &s.mean_local_coverage {
            wtr.write_record([
                m,
                &format!("local_coverage_bin_{bin}"),
                &format_value(*rate),
            ])?;
        }
        wtr.write_record([m, "mean_area", &format_value(s.mean_area)])?;
        wtr.write_record([
            m,
            "prediction_error",
            &format_value(s.mean_prediction_error),
        ])?;
        wtr.write_record([m, "skipped_reps", &s.skipped.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
