//! Binned-scatter computation for RD visualization. Bins never straddle the
//! cutoff; bin counts can be fixed per side or chosen by a data-driven rule.

use serde::{Deserialize, Serialize};

use crate::bandwidth::resolve_bandwidth;
use crate::data::RdDataset;
use crate::design::RdDesign;
use crate::error::{Error, Result};
use crate::wls::{fit_local_wls, FitTarget, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinsSpec {
    Fixed(usize),
    DataDriven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub center: f64,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedPlot {
    pub cutoff: f64,
    pub left: Vec<Bin>,
    pub right: Vec<Bin>,
    pub n_bins_left: usize,
    pub n_bins_right: usize,
    /// Samples (x, predicted value) of the two boundary fits at the main
    /// bandwidth.
    pub fitted: Vec<(f64, f64)>,
}

const DATA_DRIVEN_RANGE: std::ops::RangeInclusive<usize> = 5..=60;

fn side_values(
    data: &RdDataset,
    design: &RdDesign,
    target: FitTarget,
    side: Side,
) -> Vec<(f64, f64)> {
    data.rows
        .iter()
        .filter(|r| design.side_of(r.x) == side)
        .filter_map(|r| target.value(r).map(|v| (r.x, v)))
        .collect()
}

fn bin_side(values: &[(f64, f64)], lo: f64, hi: f64, k: usize) -> Vec<Bin> {
    let width = (hi - lo) / k as f64;
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for &(x, v) in values {
        let mut idx = if width > 0.0 {
            ((x - lo) / width).floor() as isize
        } else {
            0
        };
        idx = idx.clamp(0, k as isize - 1);
        sums[idx as usize] += v;
        counts[idx as usize] += 1;
    }
    (0..k)
        .filter(|&i| counts[i] > 0)
        .map(|i| Bin {
            center: lo + (i as f64 + 0.5) * width,
            mean: sums[i] / counts[i] as f64,
            count: counts[i],
        })
        .collect()
}

/// Integrated-squared-error proxy for the data-driven bin count: within-bin
/// squared deviations plus squared increments of adjacent bin means. The
/// first term falls and the second rises with finer binning.
fn bin_score(values: &[(f64, f64)], lo: f64, hi: f64, k: usize) -> f64 {
    let bins = bin_side(values, lo, hi, k);
    let width = (hi - lo) / k as f64;
    let mut within = 0.0;
    for &(x, v) in values {
        let mut idx = if width > 0.0 {
            ((x - lo) / width).floor() as isize
        } else {
            0
        };
        idx = idx.clamp(0, k as isize - 1);
        let center = lo + (idx as f64 + 0.5) * width;
        if let Some(bin) = bins.iter().find(|b| (b.center - center).abs() < width * 0.5) {
            within += (v - bin.mean) * (v - bin.mean);
        }
    }
    let mut between = 0.0;
    for pair in bins.windows(2) {
        let d = pair[1].mean - pair[0].mean;
        between += d * d;
    }
    within / values.len().max(1) as f64 + between
}

fn choose_k(values: &[(f64, f64)], lo: f64, hi: f64) -> usize {
    let mut best = (*DATA_DRIVEN_RANGE.start(), f64::INFINITY);
    for k in DATA_DRIVEN_RANGE {
        if k > values.len() {
            break;
        }
        let score = bin_score(values, lo, hi, k);
        if score < best.1 {
            best = (k, score);
        }
    }
    best.0
}

/// Per-side binned means of a variable against the assignment variable, plus
/// fitted-curve samples from the main local fit.
pub fn binned_scatter(
    data: &RdDataset,
    design: &RdDesign,
    target: FitTarget,
    bins: BinsSpec,
) -> Result<BinnedPlot> {
    design.validate()?;
    let c = design.cutoff;
    let left_vals = side_values(data, design, target, Side::Left);
    let right_vals = side_values(data, design, target, Side::Right);
    if left_vals.len() < 2 || right_vals.len() < 2 {
        return Err(Error::InsufficientData(
            "binned scatter needs at least two observations per side".into(),
        ));
    }
    if let BinsSpec::Fixed(k) = bins {
        if k < 2 {
            return Err(Error::InvalidConfig("need at least 2 bins per side".into()));
        }
    }

    let left_lo = left_vals.iter().map(|&(x, _)| x).fold(f64::INFINITY, f64::min);
    let right_hi = right_vals
        .iter()
        .map(|&(x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);

    let (k_left, k_right) = match bins {
        BinsSpec::Fixed(k) => (k, k),
        BinsSpec::DataDriven => (
            choose_k(&left_vals, left_lo, c),
            choose_k(&right_vals, c, right_hi),
        ),
    };

    let left = bin_side(&left_vals, left_lo, c, k_left);
    let right = bin_side(&right_vals, c, right_hi, k_right);

    // fitted curve from the boundary fits at the main bandwidth
    let mut fitted = Vec::new();
    if let Ok(h) = resolve_bandwidth(data, design) {
        for side in [Side::Left, Side::Right] {
            if let Ok(fit) = fit_local_wls(data, design, side, h, target) {
                let samples = 40;
                for i in 0..=samples {
                    let frac = i as f64 / samples as f64;
                    let xc = match side {
                        Side::Left => -h + frac * h,
                        Side::Right => frac * h,
                    };
                    fitted.push((c + xc, fit.predict(xc)));
                }
            }
        }
    }

    Ok(BinnedPlot {
        cutoff: c,
        n_bins_left: k_left,
        n_bins_right: k_right,
        left,
        right,
        fitted,
    })
}
