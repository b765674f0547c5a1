//! Sharp, fuzzy, and kink RD effect estimators.
//!
//! Sharp effects are the difference between the treated-side and control-side
//! local polynomial intercepts at the cutoff. Fuzzy effects divide the outcome
//! jump by the treatment-probability jump (a Wald/IV ratio) with a
//! delta-method standard error. Kink effects difference the boundary slopes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bandwidth::resolve_bandwidth;
use crate::data::{validate_design, RdDataset};
use crate::design::{DesignKind, RdDesign};
use crate::error::{Error, Result};
use crate::stats::{wald_p, Z_975};
use crate::wls::{fit_local_wls_pair, solve_wls, window_rows, FitTarget};

/// First-stage (treatment-probability jump) diagnostics for fuzzy designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStage {
    pub jump: f64,
    pub f_statistic: f64,
    /// Rule of thumb: the instrument is weak when F < 10.
    pub weak: bool,
}

/// Point estimate of the RD effect with normal-approximation inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdEstimate {
    pub tau: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub n_left: usize,
    pub n_right: usize,
    pub bandwidth_used: f64,
    pub kind: DesignKind,
    pub first_stage: Option<FirstStage>,
}

impl RdEstimate {
    fn from_tau(
        tau: f64,
        var: f64,
        n_left: usize,
        n_right: usize,
        h: f64,
        kind: DesignKind,
    ) -> RdEstimate {
        let se = var.max(0.0).sqrt();
        RdEstimate {
            tau,
            se,
            ci_low: tau - Z_975 * se,
            ci_high: tau + Z_975 * se,
            p_value: wald_p(tau, se),
            n_left,
            n_right,
            bandwidth_used: h,
            kind,
            first_stage: None,
        }
    }
}

/// Jumps (difference treated minus control) of one or more targets at the
/// cutoff, with the joint covariance of the jump estimates.
struct JumpFit {
    jumps: Vec<f64>,
    cov: Vec<Vec<f64>>,
    n_left: usize,
    n_right: usize,
}

/// Two independent one-sided fits per target; `coef_index` selects intercept
/// (level jump) or slope (kink).
fn side_jumps(
    data: &RdDataset,
    design: &RdDesign,
    h: f64,
    targets: (FitTarget, Option<FitTarget>),
    coef_index: usize,
) -> Result<JumpFit> {
    let treated = design.treated_geometric_side();
    let control = match treated {
        crate::wls::Side::Left => crate::wls::Side::Right,
        crate::wls::Side::Right => crate::wls::Side::Left,
    };

    let (first, second) = targets;
    match second {
        None => {
            let t = crate::wls::fit_local_wls(data, design, treated, h, first)?;
            let c = crate::wls::fit_local_wls(data, design, control, h, first)?;
            let (n_left, n_right) = counts(&t, &c);
            Ok(JumpFit {
                jumps: vec![t.coefficients[coef_index] - c.coefficients[coef_index]],
                cov: vec![vec![t.var(coef_index) + c.var(coef_index)]],
                n_left,
                n_right,
            })
        }
        Some(second) => {
            let (ta, tb, tcross) = fit_local_wls_pair(data, design, treated, h, first, second)?;
            let (ca, cb, ccross) = fit_local_wls_pair(data, design, control, h, first, second)?;
            let (n_left, n_right) = counts(&ta, &ca);
            let k = coef_index;
            let cross = tcross[(k, k)] + ccross[(k, k)];
            Ok(JumpFit {
                jumps: vec![
                    ta.coefficients[k] - ca.coefficients[k],
                    tb.coefficients[k] - cb.coefficients[k],
                ],
                cov: vec![
                    vec![ta.var(k) + ca.var(k), cross],
                    vec![cross, tb.var(k) + cb.var(k)],
                ],
                n_left,
                n_right,
            })
        }
    }
}

fn counts(treated: &crate::wls::PolyFit, control: &crate::wls::PolyFit) -> (usize, usize) {
    match treated.side {
        crate::wls::Side::Left => (treated.n_effective, control.n_effective),
        crate::wls::Side::Right => (control.n_effective, treated.n_effective),
    }
}

/// Pooled fit over both sides with fully side-interacted polynomial terms and
/// additive covariates. The jump coefficient never interacts with covariates.
fn pooled_jumps(
    data: &RdDataset,
    design: &RdDesign,
    h: f64,
    targets: &[FitTarget],
    coef_kind: CoefKind,
) -> Result<JumpFit> {
    let cov_indices: Vec<usize> = design
        .covariates
        .iter()
        .map(|name| {
            data.covariate_index(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown covariate `{name}`")))
        })
        .collect::<Result<_>>()?;

    let mut all_targets: Vec<FitTarget> = targets.to_vec();
    all_targets.extend(cov_indices.iter().map(|&i| FitTarget::Covariate(i)));

    let left = window_rows(data, design, crate::wls::Side::Left, h, &all_targets);
    let right = window_rows(data, design, crate::wls::Side::Right, h, &all_targets);
    let n_left = left.xc.len();
    let n_right = right.xc.len();
    let treated_is_right =
        design.treated_geometric_side() == crate::wls::Side::Right;

    let n = n_left + n_right;
    let order = design.order;
    let k_cov = cov_indices.len();
    let p = 2 + 2 * order + k_cov;
    if n < p + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} pooled observations for {p} parameters"
        )));
    }

    let mut xmat = DMatrix::zeros(n, p);
    let mut weights = Vec::with_capacity(n);
    let mut target_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); targets.len()];
    for (rows, is_left) in [(&left, true), (&right, false)] {
        for i in 0..rows.xc.len() {
            let row_idx = if is_left { i } else { n_left + i };
            let xc = rows.xc[i];
            let treated = if is_left { !treated_is_right } else { treated_is_right };
            let t = if treated { 1.0 } else { 0.0 };
            xmat[(row_idx, 0)] = 1.0;
            xmat[(row_idx, 1)] = t;
            for j in 1..=order {
                xmat[(row_idx, 1 + j)] = xc.powi(j as i32);
                xmat[(row_idx, 1 + order + j)] = t * xc.powi(j as i32);
            }
            for (kc, _) in cov_indices.iter().enumerate() {
                xmat[(row_idx, 2 + 2 * order + kc)] = rows.targets[targets.len() + kc][i];
            }
            weights.push(rows.weights[i]);
            for (kt, col) in target_cols.iter_mut().enumerate() {
                col.push(rows.targets[kt][i]);
            }
        }
    }
    // weights were pushed in left-then-right order matching row indices
    let target_slices: Vec<&[f64]> = target_cols.iter().map(|c| c.as_slice()).collect();
    let sol = solve_wls(&xmat, &weights, &target_slices)?;

    let coef = match coef_kind {
        CoefKind::Level => 1,
        // slope change at the cutoff: coefficient of t * xc
        CoefKind::Slope => 2 + order,
    };
    let m = targets.len();
    let mut jumps = Vec::with_capacity(m);
    let mut cov = vec![vec![0.0; m]; m];
    for i in 0..m {
        jumps.push(sol.coefs[i][coef]);
        for j in 0..m {
            cov[i][j] = sol.cov[i][j][(coef, coef)];
        }
    }
    Ok(JumpFit {
        jumps,
        cov,
        n_left,
        n_right,
    })
}

#[derive(Clone, Copy)]
enum CoefKind {
    Level,
    Slope,
}

fn jump_fit(
    data: &RdDataset,
    design: &RdDesign,
    h: f64,
    targets: (FitTarget, Option<FitTarget>),
    coef_kind: CoefKind,
) -> Result<JumpFit> {
    if design.covariate_adjust && !design.covariates.is_empty() {
        let mut list = vec![targets.0];
        if let Some(t) = targets.1 {
            list.push(t);
        }
        pooled_jumps(data, design, h, &list, coef_kind)
    } else {
        let idx = match coef_kind {
            CoefKind::Level => 0,
            CoefKind::Slope => 1,
        };
        side_jumps(data, design, h, targets, idx)
    }
}

/// Sharp-style level jump of an arbitrary target at the design's cutoff with
/// an explicit bandwidth. Shared by the main estimator, covariate balance,
/// placebo cutoffs, and the exposure scan.
pub(crate) fn level_jump(
    data: &RdDataset,
    design: &RdDesign,
    h: f64,
    target: FitTarget,
) -> Result<RdEstimate> {
    let fit = jump_fit(data, design, h, (target, None), CoefKind::Level)?;
    // a target constant across both windows carries no evidence of a jump;
    // pin it to exactly zero instead of letting 1e-16/1e-16 noise reach Wald
    let mut values = data
        .rows
        .iter()
        .filter(|r| {
            let xc = r.x - design.cutoff;
            xc.abs() <= h && xc.abs() >= design.donut_radius
        })
        .filter_map(|r| target.value(r));
    let constant = match values.next() {
        Some(first) => values.all(|v| v == first),
        None => true,
    };
    if constant {
        return Ok(RdEstimate::from_tau(
            0.0,
            0.0,
            fit.n_left,
            fit.n_right,
            h,
            DesignKind::Sharp,
        ));
    }
    Ok(RdEstimate::from_tau(
        fit.jumps[0],
        fit.cov[0][0],
        fit.n_left,
        fit.n_right,
        h,
        DesignKind::Sharp,
    ))
}

/// Sharp RD effect: jump in the outcome at the cutoff, treated side minus
/// control side.
pub fn estimate_sharp(data: &RdDataset, design: &RdDesign) -> Result<RdEstimate> {
    if design.kind != DesignKind::Sharp {
        return Err(Error::InvalidConfig("estimate_sharp needs a sharp design".into()));
    }
    let validation = validate_design(data, design)?;
    if data.has_treatment() && validation.eligibility_consistency < 1.0 {
        return Err(Error::SharpInconsistent);
    }
    let h = resolve_bandwidth(data, design)?;
    level_jump(data, design, h, FitTarget::Outcome)
}

/// Fuzzy RD effect: outcome jump over treatment-probability jump, both from
/// local fits sharing the same bandwidth and kernel. The standard error comes
/// from the delta method on the ratio, keeping the covariance between the two
/// jumps.
pub fn estimate_fuzzy(data: &RdDataset, design: &RdDesign) -> Result<RdEstimate> {
    if design.kind != DesignKind::Fuzzy {
        return Err(Error::InvalidConfig("estimate_fuzzy needs a fuzzy design".into()));
    }
    design.validate()?;
    if !data.has_treatment() {
        return Err(Error::FuzzyWithoutTreatment);
    }
    let h = resolve_bandwidth(data, design)?;
    let fit = jump_fit(
        data,
        design,
        h,
        (FitTarget::Outcome, Some(FitTarget::Treatment)),
        CoefKind::Level,
    )?;
    let (jy, jd) = (fit.jumps[0], fit.jumps[1]);
    if jd.abs() < 1e-8 {
        return Err(Error::WeakOrNoFirstStage);
    }
    let (vy, vd, cyd) = (fit.cov[0][0], fit.cov[1][1], fit.cov[0][1]);
    let tau = jy / jd;
    let g = (1.0 / jd, -jy / (jd * jd));
    let var = g.0 * g.0 * vy + g.1 * g.1 * vd + 2.0 * g.0 * g.1 * cyd;
    let mut est = RdEstimate::from_tau(tau, var, fit.n_left, fit.n_right, h, DesignKind::Fuzzy);

    let se_jd = vd.max(0.0).sqrt();
    let f_statistic = if se_jd > 0.0 {
        (jd / se_jd) * (jd / se_jd)
    } else {
        f64::INFINITY
    };
    est.first_stage = Some(FirstStage {
        jump: jd.clamp(-1.0, 1.0),
        f_statistic,
        weak: f_statistic < 10.0,
    });
    Ok(est)
}

/// Kink effect: change in the boundary slope at the cutoff.
pub fn estimate_kink(data: &RdDataset, design: &RdDesign) -> Result<RdEstimate> {
    if design.kind != DesignKind::Kink {
        return Err(Error::InvalidConfig("estimate_kink needs a kink design".into()));
    }
    design.validate()?;
    let h = resolve_bandwidth(data, design)?;
    let fit = jump_fit(data, design, h, (FitTarget::Outcome, None), CoefKind::Slope)?;
    let mut est = RdEstimate::from_tau(
        fit.jumps[0],
        fit.cov[0][0],
        fit.n_left,
        fit.n_right,
        h,
        DesignKind::Kink,
    );
    est.kind = DesignKind::Kink;
    Ok(est)
}

/// Dispatches on the design kind.
pub fn estimate_main(data: &RdDataset, design: &RdDesign) -> Result<RdEstimate> {
    match design.kind {
        DesignKind::Sharp => estimate_sharp(data, design),
        DesignKind::Fuzzy => estimate_fuzzy(data, design),
        DesignKind::Kink => estimate_kink(data, design),
    }
}
