//! Dataset representation, CSV ingestion, and design validation.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::design::{DesignKind, RdDesign};
use crate::error::{Error, Result};

/// One analysis unit: assignment value, optional treatment received, outcome,
/// and covariates. Covariate cells may be individually missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: f64,
    pub d: Option<u8>,
    pub y: f64,
    pub covariates: Vec<Option<f64>>,
}

/// Immutable collection of observations plus covariate labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdDataset {
    pub rows: Vec<Observation>,
    pub covariate_names: Vec<String>,
    /// Rows dropped at ingestion because x or y was missing.
    pub n_dropped_missing: usize,
}

impl RdDataset {
    pub fn new(rows: Vec<Observation>, covariate_names: Vec<String>) -> Result<RdDataset> {
        for (i, row) in rows.iter().enumerate() {
            if !row.x.is_finite() || !row.y.is_finite() {
                return Err(Error::NonNumeric {
                    row: i,
                    column: if row.x.is_finite() { "y" } else { "x" }.to_string(),
                    value: "non-finite".to_string(),
                });
            }
            if row.covariates.len() != covariate_names.len() {
                return Err(Error::InvalidConfig(format!(
                    "row {i} has {} covariates, expected {}",
                    row.covariates.len(),
                    covariate_names.len()
                )));
            }
        }
        Ok(RdDataset {
            rows,
            covariate_names,
            n_dropped_missing: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn has_treatment(&self) -> bool {
        self.rows.iter().any(|r| r.d.is_some())
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    pub fn x_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.x)
    }
}

/// Maps CSV header names onto analysis roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub x: String,
    pub y: String,
    #[serde(default)]
    pub d: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    trimmed
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::NonNumeric {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

/// Reads a headered CSV stream into a dataset. Rows with a missing assignment
/// value or outcome are dropped and counted; surviving rows keep their order.
pub fn load_dataset<R: Read>(source: R, mapping: &ColumnMapping) -> Result<RdDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let x_idx = find(&mapping.x)?;
    let y_idx = find(&mapping.y)?;
    let d_idx = mapping.d.as_deref().map(find).transpose()?;
    let cov_idx: Vec<usize> = mapping
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut n_dropped = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = i + 1; // 1-based data row, header excluded
        let x = parse_cell(record.get(x_idx).unwrap_or(""), row_no, &mapping.x)?;
        let y = parse_cell(record.get(y_idx).unwrap_or(""), row_no, &mapping.y)?;
        let (x, y) = match (x, y) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                n_dropped += 1;
                continue;
            }
        };
        let d = match d_idx {
            Some(idx) => {
                let name = mapping.d.as_deref().unwrap();
                match parse_cell(record.get(idx).unwrap_or(""), row_no, name)? {
                    None => None,
                    Some(v) if v == 0.0 => Some(0),
                    Some(v) if v == 1.0 => Some(1),
                    Some(_) => return Err(Error::InvalidTreatment { row: row_no }),
                }
            }
            None => None,
        };
        let covariates = cov_idx
            .iter()
            .zip(&mapping.covariates)
            .map(|(&idx, name)| parse_cell(record.get(idx).unwrap_or(""), row_no, name))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Observation {
            x,
            d,
            y,
            covariates,
        });
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut data = RdDataset::new(rows, mapping.covariates.clone())?;
    data.n_dropped_missing = n_dropped;
    Ok(data)
}

/// Coded validation warning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

impl Warning {
    fn new(code: &str, message: impl Into<String>) -> Warning {
        Warning {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

/// Result of checking the dataset against the assignment rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_dropped_missing: usize,
    pub cutoff_in_range: bool,
    /// Fraction of rows (with observed treatment) whose treatment matches the
    /// assignment rule. 1.0 when no treatment column is present.
    pub eligibility_consistency: f64,
    pub warnings: Vec<Warning>,
}

/// Checks that the cutoff lies inside the observed assignment range and that
/// realized treatment is consistent with the assignment rule.
pub fn validate_design(data: &RdDataset, design: &RdDesign) -> Result<ValidationReport> {
    design.validate()?;
    if design.kind == DesignKind::Fuzzy && !data.has_treatment() {
        return Err(Error::FuzzyWithoutTreatment);
    }

    let min = data.x_values().fold(f64::INFINITY, f64::min);
    let max = data.x_values().fold(f64::NEG_INFINITY, f64::max);
    let cutoff_in_range = min < design.cutoff && design.cutoff < max;

    let mut observed = 0usize;
    let mut consistent = 0usize;
    for row in &data.rows {
        if let Some(d) = row.d {
            observed += 1;
            if (d == 1) == design.is_treated_value(row.x) {
                consistent += 1;
            }
        }
    }
    let eligibility_consistency = if observed == 0 {
        1.0
    } else {
        consistent as f64 / observed as f64
    };

    let mut warnings = Vec::new();
    if !cutoff_in_range {
        warnings.push(Warning::new(
            "CUTOFF_OUT_OF_RANGE",
            format!(
                "cutoff {} lies outside the observed assignment range [{min}, {max}]",
                design.cutoff
            ),
        ));
    }
    if eligibility_consistency < 1.0 {
        if design.kind == DesignKind::Sharp {
            warnings.push(Warning::new(
                "SHARP_CROSSOVERS",
                "treatment crossovers present; a fuzzy design is appropriate",
            ));
        } else {
            warnings.push(Warning::new(
                "CROSSOVERS_PRESENT",
                "crossovers present; fuzzy design appropriate",
            ));
        }
    }
    if data.rows.iter().any(|r| r.x == design.cutoff) {
        warnings.push(Warning::new(
            "TIES_AT_CUTOFF",
            "observations exactly at the cutoff are assigned to the treated side by convention",
        ));
    }

    Ok(ValidationReport {
        n_dropped_missing: data.n_dropped_missing,
        cutoff_in_range,
        eligibility_consistency,
        warnings,
    })
}
