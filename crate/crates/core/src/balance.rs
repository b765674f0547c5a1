//! Covariate balance at the cutoff with multiple-testing corrections.
//!
//! Each covariate is run through the same jump estimator used for the main
//! outcome analysis; any discontinuity in a predetermined covariate is
//! evidence against the design. Family-wise or false-discovery-rate control
//! comes from Bonferroni or Benjamini-Hochberg adjustment.

use serde::{Deserialize, Serialize};

use crate::bandwidth::resolve_bandwidth;
use crate::data::RdDataset;
use crate::design::RdDesign;
use crate::error::{Error, Result};
use crate::estimate::{level_jump, RdEstimate};
use crate::wls::FitTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Bonferroni,
    BenjaminiHochberg,
    None,
}

/// Per-covariate balance result. Estimation failures are recorded in-row so
/// one degenerate covariate never aborts the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub name: String,
    pub estimate: Option<RdEstimate>,
    pub error: Option<String>,
    pub p_raw: Option<f64>,
    pub p_adjusted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceTable {
    pub rows: Vec<BalanceRow>,
    pub correction: Correction,
}

/// Multiplicity adjustment for `m` tests. Output order matches input order.
pub fn adjust_pvalues(p: &[f64], method: Correction, m: usize) -> Result<Vec<f64>> {
    for &v in p {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidP(v));
        }
    }
    let m = m.max(1) as f64;
    match method {
        Correction::None => Ok(p.to_vec()),
        Correction::Bonferroni => Ok(p.iter().map(|&v| (v * m).min(1.0)).collect()),
        Correction::BenjaminiHochberg => {
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
            // step-up: walk from the largest p down, keeping the running min
            let mut adjusted = vec![0.0; p.len()];
            let mut running = 1.0f64;
            for (rank, &idx) in order.iter().enumerate().rev() {
                let value = (p[idx] * m / (rank as f64 + 1.0)).min(1.0);
                running = running.min(value);
                adjusted[idx] = running;
            }
            Ok(adjusted)
        }
    }
}

/// Balance of every covariate in the dataset: the covariate is treated as the
/// outcome in the sharp jump estimator with the design's kernel, order, and
/// bandwidth.
pub fn covariate_balance(
    data: &RdDataset,
    design: &RdDesign,
    correction: Correction,
) -> Result<BalanceTable> {
    design.validate()?;
    let mut rows: Vec<BalanceRow> = Vec::with_capacity(data.covariate_names.len());
    if data.covariate_names.is_empty() {
        return Ok(BalanceTable {
            rows,
            correction,
        });
    }
    let h = resolve_bandwidth(data, design)?;
    // balance fits never re-use the covariate being tested as an adjustment
    let mut plain = design.clone();
    plain.covariate_adjust = false;
    plain.covariates.clear();

    for (i, name) in data.covariate_names.iter().enumerate() {
        match level_jump(data, &plain, h, FitTarget::Covariate(i)) {
            Ok(est) => {
                let p = est.p_value;
                rows.push(BalanceRow {
                    name: name.clone(),
                    estimate: Some(est),
                    error: None,
                    p_raw: Some(p),
                    p_adjusted: None,
                });
            }
            Err(e) => rows.push(BalanceRow {
                name: name.clone(),
                estimate: None,
                error: Some(e.code().to_string()),
                p_raw: None,
                p_adjusted: None,
            }),
        }
    }

    let tested: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].p_raw.is_some()).collect();
    let ps: Vec<f64> = tested.iter().map(|&i| rows[i].p_raw.unwrap()).collect();
    let adjusted = adjust_pvalues(&ps, correction, ps.len())?;
    for (k, &i) in tested.iter().enumerate() {
        rows[i].p_adjusted = Some(adjusted[k]);
    }
    Ok(BalanceTable { rows, correction })
}
