//! Kernel-weighted local polynomial fitting with heteroskedasticity-robust
//! (sandwich) covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::RdDataset;
use crate::design::{RdDesign, TreatedSide};
use crate::error::{Error, Result};
use crate::kernel::kernel_weight;

/// Geometric side relative to the cutoff. Ties `x == c` belong to the treated
/// side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl RdDesign {
    pub fn side_of(&self, x: f64) -> Side {
        if x < self.cutoff {
            Side::Left
        } else if x > self.cutoff {
            Side::Right
        } else {
            match self.treated_side {
                TreatedSide::Above => Side::Right,
                TreatedSide::Below => Side::Left,
            }
        }
    }

    pub fn treated_geometric_side(&self) -> Side {
        match self.treated_side {
            TreatedSide::Above => Side::Right,
            TreatedSide::Below => Side::Left,
        }
    }
}

/// Variable fitted as the regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    Outcome,
    Treatment,
    Covariate(usize),
}

impl FitTarget {
    pub fn value(&self, row: &crate::data::Observation) -> Option<f64> {
        match self {
            FitTarget::Outcome => Some(row.y),
            FitTarget::Treatment => row.d.map(f64::from),
            FitTarget::Covariate(i) => row.covariates.get(*i).copied().flatten(),
        }
    }
}

/// One-sided local polynomial fit in centered coordinates `x - c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Intercept first, then increasing powers of `x - c`.
    pub coefficients: Vec<f64>,
    pub robust_covariance: DMatrix<f64>,
    pub n_effective: usize,
    pub side: Side,
}

impl PolyFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slope(&self) -> f64 {
        self.coefficients[1]
    }

    pub fn var(&self, i: usize) -> f64 {
        self.robust_covariance[(i, i)]
    }

    /// Polynomial prediction at centered coordinate `xc`.
    pub fn predict(&self, xc: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coefficients.iter().rev() {
            acc = acc * xc + c;
        }
        acc
    }
}

/// Generic weighted least squares on an explicit design matrix, fitting one or
/// more targets that share the same weights. Returns per-target coefficients
/// and the sandwich covariance blocks `cov[i][j]`; off-diagonal blocks use
/// cross residuals `e_i * e_j`.
pub(crate) struct WlsSolution {
    pub coefs: Vec<DVector<f64>>,
    pub cov: Vec<Vec<DMatrix<f64>>>,
    pub bread: DMatrix<f64>,
}

pub(crate) fn solve_wls(
    design_matrix: &DMatrix<f64>,
    weights: &[f64],
    targets: &[&[f64]],
) -> Result<WlsSolution> {
    let n = design_matrix.nrows();
    let p = design_matrix.ncols();
    debug_assert_eq!(weights.len(), n);

    // A = X' W X
    let mut a = DMatrix::zeros(p, p);
    for i in 0..n {
        let w = weights[i];
        for r in 0..p {
            let xr = design_matrix[(i, r)] * w;
            for c in r..p {
                a[(r, c)] += xr * design_matrix[(i, c)];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            a[(r, c)] = a[(c, r)];
        }
    }

    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularDesign(format!("{p}x{p} weighted normal matrix")))?;
    // near-singular matrices can survive Cholesky on tiny rounding pivots;
    // reject them on the relative size of the smallest pivot
    let l = chol.l_dirty();
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot: f64 = 0.0;
    for r in 0..p {
        min_pivot = min_pivot.min(l[(r, r)]);
        max_pivot = max_pivot.max(l[(r, r)]);
    }
    // pivots scale as sqrt(condition), so this rejects condition > ~1e14
    if !(min_pivot > 1e-7 * max_pivot) {
        return Err(Error::SingularDesign(format!(
            "{p}x{p} weighted normal matrix is numerically singular"
        )));
    }
    let bread = chol.inverse();

    let mut coefs = Vec::with_capacity(targets.len());
    let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(targets.len());
    for t in targets {
        debug_assert_eq!(t.len(), n);
        let mut b = DVector::zeros(p);
        for i in 0..n {
            let w = weights[i] * t[i];
            for r in 0..p {
                b[r] += design_matrix[(i, r)] * w;
            }
        }
        let beta = chol.solve(&b);
        let mut e = Vec::with_capacity(n);
        for i in 0..n {
            let mut pred = 0.0;
            for r in 0..p {
                pred += design_matrix[(i, r)] * beta[r];
            }
            e.push(t[i] - pred);
        }
        coefs.push(beta);
        residuals.push(e);
    }

    // Sandwich blocks: bread * (X' W diag(e_i e_j) W X) * bread
    let mut cov = Vec::with_capacity(targets.len());
    for ei in &residuals {
        let mut row_blocks = Vec::with_capacity(targets.len());
        for ej in &residuals {
            let mut meat: DMatrix<f64> = DMatrix::zeros(p, p);
            for i in 0..n {
                let s = weights[i] * weights[i] * ei[i] * ej[i];
                for r in 0..p {
                    let xr = design_matrix[(i, r)] * s;
                    for c in 0..p {
                        meat[(r, c)] += xr * design_matrix[(i, c)];
                    }
                }
            }
            let v: DMatrix<f64> = &bread * meat * &bread;
            // enforce exact symmetry
            let v = (&v + v.transpose()) * 0.5;
            row_blocks.push(v);
        }
        cov.push(row_blocks);
    }

    Ok(WlsSolution { coefs, cov, bread })
}

/// Rows selected for a one-sided fit: centered x, kernel weight, target values.
pub(crate) struct WindowRows {
    pub xc: Vec<f64>,
    pub weights: Vec<f64>,
    pub targets: Vec<Vec<f64>>,
}

pub(crate) fn window_rows(
    data: &RdDataset,
    design: &RdDesign,
    side: Side,
    h: f64,
    targets: &[FitTarget],
) -> WindowRows {
    let mut out = WindowRows {
        xc: Vec::new(),
        weights: Vec::new(),
        targets: vec![Vec::new(); targets.len()],
    };
    for row in &data.rows {
        let xc = row.x - design.cutoff;
        if design.side_of(row.x) != side || xc.abs() > h || xc.abs() < design.donut_radius {
            continue;
        }
        let w = kernel_weight(xc / h, design.kernel);
        if w <= 0.0 {
            continue;
        }
        let values: Option<Vec<f64>> = targets.iter().map(|t| t.value(row)).collect();
        let Some(values) = values else { continue };
        out.xc.push(xc);
        out.weights.push(w);
        for (k, v) in values.into_iter().enumerate() {
            out.targets[k].push(v);
        }
    }
    out
}

pub(crate) fn power_design_matrix(xc: &[f64], order: usize) -> DMatrix<f64> {
    let n = xc.len();
    DMatrix::from_fn(n, order + 1, |i, j| xc[i].powi(j as i32))
}

fn fit_side(
    data: &RdDataset,
    design: &RdDesign,
    side: Side,
    h: f64,
    targets: &[FitTarget],
) -> Result<(WlsSolution, usize)> {
    let rows = window_rows(data, design, side, h, targets);
    let n_eff = rows.xc.len();
    if n_eff < design.order + 2 {
        return Err(Error::InsufficientData(format!(
            "{n_eff} weighted observations on the {side:?} side, need at least {}",
            design.order + 2
        )));
    }
    let xmat = power_design_matrix(&rows.xc, design.order);
    let target_slices: Vec<&[f64]> = rows.targets.iter().map(|t| t.as_slice()).collect();
    let sol = solve_wls(&xmat, &rows.weights, &target_slices)?;
    Ok((sol, n_eff))
}

/// Kernel-weighted local polynomial fit of one target on one side of the
/// cutoff. Exact on noiseless polynomial data of degree <= order.
pub fn fit_local_wls(
    data: &RdDataset,
    design: &RdDesign,
    side: Side,
    h: f64,
    target: FitTarget,
) -> Result<PolyFit> {
    let (sol, n_eff) = fit_side(data, design, side, h, &[target])?;
    Ok(PolyFit {
        coefficients: sol.coefs[0].iter().copied().collect(),
        robust_covariance: sol.cov[0][0].clone(),
        n_effective: n_eff,
        side,
    })
}

/// Joint fit of two targets sharing rows and weights. The third return value
/// is the cross-covariance block between the two coefficient vectors, needed
/// for the fuzzy delta-method variance.
pub fn fit_local_wls_pair(
    data: &RdDataset,
    design: &RdDesign,
    side: Side,
    h: f64,
    first: FitTarget,
    second: FitTarget,
) -> Result<(PolyFit, PolyFit, DMatrix<f64>)> {
    let (sol, n_eff) = fit_side(data, design, side, h, &[first, second])?;
    let a = PolyFit {
        coefficients: sol.coefs[0].iter().copied().collect(),
        robust_covariance: sol.cov[0][0].clone(),
        n_effective: n_eff,
        side,
    };
    let b = PolyFit {
        coefficients: sol.coefs[1].iter().copied().collect(),
        robust_covariance: sol.cov[1][1].clone(),
        n_effective: n_eff,
        side,
    };
    Ok((a, b, sol.cov[0][1].clone()))
}
