//! CSV ingestion, JSON model files and atomic output.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pns::{PnsModel, Selection};
use crate::regress::RegressionModel;
use crate::simplex::{normalize, Alpha, Composition};

/// Major version this build reads; any `1.x` file is accepted.
pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub response_names: Vec<String>,
    pub predictor_names: Vec<String>,
    /// Empty when no response columns were requested.
    pub responses: Vec<Composition>,
    pub predictors: Vec<Vec<f64>>,
    /// Rows skipped because a requested cell was blank or `NA`.
    pub dropped_rows: usize,
}

impl DataTable {
    pub fn len(&self) -> usize {
        self.predictors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictors.is_empty()
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na")
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Reads the named columns from a CSV with a header row. Responses are
/// normalized to compositions; predictors are kept as given.
pub fn read_table(path: &Path, response_cols: &[String], predictor_cols: &[String]) -> Result<DataTable> {
    let file = std::fs::File::open(path)?;
    read_table_from(file, response_cols, predictor_cols)
}

pub fn read_table_from<R: Read>(
    reader: R,
    response_cols: &[String],
    predictor_cols: &[String],
) -> Result<DataTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let resp_idx = response_cols
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let pred_idx = predictor_cols
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;

    let mut table = DataTable {
        response_names: response_cols.to_vec(),
        predictor_names: predictor_cols.to_vec(),
        responses: Vec::new(),
        predictors: Vec::new(),
        dropped_rows: 0,
    };
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cells = |idx: &[usize]| idx.iter().map(|&j| record.get(j).unwrap_or("")).collect::<Vec<_>>();
        let (resp, pred) = (cells(&resp_idx), cells(&pred_idx));
        if resp.iter().chain(&pred).any(|c| is_missing(c)) {
            table.dropped_rows += 1;
            continue;
        }
        let parse = |cell: &str, column: &str| -> Result<f64> {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Cell {
                    row,
                    column: column.to_string(),
                    message: format!("cannot parse '{cell}' as a finite number"),
                }),
            }
        };
        let mut parts = Vec::with_capacity(resp.len());
        for (cell, name) in resp.iter().zip(response_cols) {
            let v = parse(cell, name)?;
            if v < 0.0 {
                return Err(Error::Cell {
                    row,
                    column: name.clone(),
                    message: format!("negative response value {v}"),
                });
            }
            parts.push(v);
        }
        if !parts.is_empty() {
            let comp = normalize(&parts).map_err(|e| Error::Cell {
                row,
                column: response_cols.join(","),
                message: e.to_string(),
            })?;
            table.responses.push(comp);
        }
        let x = pred
            .iter()
            .zip(predictor_cols)
            .map(|(cell, name)| parse(cell, name))
            .collect::<Result<Vec<_>>>()?;
        table.predictors.push(x);
    }
    if table.dropped_rows > 0 {
        log::info!("dropped {} row(s) with missing values", table.dropped_rows);
    }
    Ok(table)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub selection: Selection,
    /// Seconds since the Unix epoch; left out of seeded runs so output is
    /// reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: String,
    pub alpha: Alpha,
    pub pns: PnsModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression: Option<RegressionModel>,
    #[serde(default)]
    pub response_names: Vec<String>,
    #[serde(default)]
    pub predictor_names: Vec<String>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ModelFile {
    pub fn new(pns: PnsModel, regression: Option<RegressionModel>) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            alpha: pns.alpha(),
            pns,
            regression,
            response_names: Vec::new(),
            predictor_names: Vec::new(),
            provenance: Provenance::default(),
        }
    }

    fn check(&self) -> Result<()> {
        self.pns.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
        if self.alpha != self.pns.alpha() {
            return Err(Error::Corrupt("alpha disagrees with the PNS model".into()));
        }
        if let Some(reg) = &self.regression {
            if reg.pns != self.pns {
                return Err(Error::Corrupt("regression refers to a different PNS model".into()));
            }
            if !(1..=self.pns.dim()).contains(&reg.k_used) || reg.linear.len() + 1 != reg.k_used {
                return Err(Error::Corrupt("inconsistent number of modelled scores".into()));
            }
            if !self.predictor_names.is_empty() && self.predictor_names.len() != reg.n_predictors() {
                return Err(Error::Corrupt("predictor names disagree with coefficients".into()));
            }
        }
        if !self.response_names.is_empty() && self.response_names.len() != self.pns.dim() + 1 {
            return Err(Error::Corrupt("response names disagree with model dimension".into()));
        }
        Ok(())
    }
}

fn check_version(version: &str) -> Result<()> {
    let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    match major {
        Some(FORMAT_MAJOR) => Ok(()),
        _ => Err(Error::Version {
            found: version.to_string(),
            supported: FORMAT_MAJOR,
        }),
    }
}

pub fn model_to_json(model: &ModelFile) -> Result<String> {
    model.check()?;
    serde_json::to_string_pretty(model).map_err(|e| Error::Corrupt(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<ModelFile> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Corrupt(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Corrupt("missing format_version".into()))?;
    check_version(version)?;
    let model: ModelFile = serde_json::from_value(value).map_err(|e| Error::Corrupt(e.to_string()))?;
    model.check()?;
    Ok(model)
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    write_atomic(path, model_to_json(model)?.as_bytes())
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    model_from_json(&std::fs::read_to_string(path)?)
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// CSV text with a header and numeric rows at full precision.
pub fn numeric_csv(header: &[String], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_numeric_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, &numeric_csv(header, rows)?)
}
