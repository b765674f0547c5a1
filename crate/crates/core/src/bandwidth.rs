//! Data-driven bandwidth selection by leave-one-out cross-validation on a
//! fixed geometric grid.
//!
//! For each candidate bandwidth the two boundary fits are computed once per
//! side; leave-one-out residuals follow from the hat-matrix identity
//! `e_(-i) = e_i / (1 - h_ii)`, which is exact for (weighted) least squares.
//! The objective is evaluated only on observations within the median distance
//! of the cutoff, so very distant points never drive the choice.

use crate::data::RdDataset;
use crate::design::{BandwidthSpec, RdDesign};
use crate::error::{Error, Result};
use crate::wls::{power_design_matrix, solve_wls, window_rows, FitTarget, Side};

pub const GRID_SIZE: usize = 20;

/// Candidate grid: `GRID_SIZE` geometric points spanning
/// `[range/50, range/2]` of the centered assignment distances.
pub fn candidate_grid(data: &RdDataset, design: &RdDesign) -> Vec<f64> {
    let range = data
        .x_values()
        .map(|x| (x - design.cutoff).abs())
        .fold(0.0f64, f64::max);
    let lo = range / 50.0;
    let hi = range / 2.0;
    let ratio = (hi / lo).powf(1.0 / (GRID_SIZE as f64 - 1.0));
    (0..GRID_SIZE).map(|i| lo * ratio.powi(i as i32)).collect()
}

/// Leave-one-out squared prediction error of the two boundary fits at
/// bandwidth `h`, summed over observations within the median distance of the
/// cutoff. `None` when either side fit is infeasible at this bandwidth.
pub fn cv_objective(data: &RdDataset, design: &RdDesign, h: f64) -> Option<f64> {
    let distances = {
        let mut d: Vec<f64> = data
            .x_values()
            .map(|x| (x - design.cutoff).abs())
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d
    };
    let median = distances[distances.len() / 2];

    let mut total = 0.0;
    for side in [Side::Left, Side::Right] {
        // fit on everything the window admits
        let rows = window_rows(data, design, side, h, &[FitTarget::Outcome]);
        if rows.xc.len() < design.order + 2 {
            return None;
        }
        let xmat = power_design_matrix(&rows.xc, design.order);
        let sol = solve_wls(&xmat, &rows.weights, &[rows.targets[0].as_slice()]).ok()?;
        let beta = &sol.coefs[0];
        let bread = &sol.bread;

        // evaluation points: same-side rows within the median distance
        for row in &data.rows {
            let xc = row.x - design.cutoff;
            if design.side_of(row.x) != side
                || xc.abs() > median
                || xc.abs() < design.donut_radius
            {
                continue;
            }
            let mut pred = 0.0;
            let mut xvec = Vec::with_capacity(design.order + 1);
            for j in 0..=design.order {
                let p = xc.powi(j as i32);
                xvec.push(p);
                pred += p * beta[j];
            }
            let resid = row.y - pred;
            // leverage of this row in the weighted fit (zero outside the window)
            let w = if xc.abs() <= h {
                crate::kernel::kernel_weight(xc / h, design.kernel)
            } else {
                0.0
            };
            let mut leverage = 0.0;
            if w > 0.0 {
                for r in 0..=design.order {
                    for c in 0..=design.order {
                        leverage += xvec[r] * bread[(r, c)] * xvec[c];
                    }
                }
                leverage *= w;
            }
            if leverage >= 1.0 - 1e-10 {
                return None;
            }
            let loo = resid / (1.0 - leverage);
            total += loo * loo;
        }
    }
    Some(total)
}

/// Cross-validated bandwidth: the grid point minimizing the leave-one-out
/// objective. Deterministic given the data.
pub fn select_bandwidth_cv(data: &RdDataset, design: &RdDesign) -> Result<f64> {
    if data.n() < 4 * (design.order + 2) {
        return Err(Error::InsufficientData(format!(
            "{} observations, cross-validation needs at least {}",
            data.n(),
            4 * (design.order + 2)
        )));
    }
    let grid = candidate_grid(data, design);
    let mut best: Option<(f64, f64)> = None;
    for &h in &grid {
        if let Some(obj) = cv_objective(data, design, h) {
            let better = match best {
                None => true,
                Some((_, b)) => obj < b,
            };
            if better {
                best = Some((h, obj));
            }
        }
    }
    best.map(|(h, _)| h).ok_or_else(|| {
        Error::InsufficientData("no candidate bandwidth admits a feasible fit".into())
    })
}

/// Fixed bandwidths pass through; cross-validated designs run the grid search.
pub fn resolve_bandwidth(data: &RdDataset, design: &RdDesign) -> Result<f64> {
    match design.bandwidth {
        BandwidthSpec::Fixed(h) => {
            if h > 0.0 && h.is_finite() {
                Ok(h)
            } else {
                Err(Error::InvalidConfig(format!("fixed bandwidth {h} must be positive")))
            }
        }
        BandwidthSpec::CrossValidated => select_bandwidth_cv(data, design),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use crate::design::TreatedSide;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noisy_linear(n: usize, seed: u64) -> RdDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let x: f64 = rng.gen_range(-2.0..2.0);
                let e: f64 = rng.sample(StandardNormal);
                Observation {
                    x,
                    d: None,
                    y: 1.0 + 0.5 * x + 0.3 * e,
                    covariates: vec![],
                }
            })
            .collect();
        RdDataset::new(rows, vec![]).unwrap()
    }

    #[test]
    fn fixed_bandwidth_passes_through() {
        let design = RdDesign::sharp(0.0, TreatedSide::Above)
            .with_bandwidth(BandwidthSpec::Fixed(0.37));
        assert_eq!(resolve_bandwidth(&noisy_linear(50, 1), &design).unwrap(), 0.37);
    }

    #[test]
    fn returned_bandwidth_is_within_grid_bounds() {
        let data = noisy_linear(300, 2);
        let design = RdDesign::sharp(0.0, TreatedSide::Above);
        let h = select_bandwidth_cv(&data, &design).unwrap();
        let max_dist = data.x_values().map(f64::abs).fold(0.0f64, f64::max);
        assert!(h > 0.0 && h <= max_dist);
    }

    #[test]
    fn selected_point_is_a_local_minimum_of_the_objective() {
        // oracle: evaluate the CV objective across the whole grid
        let data = noisy_linear(400, 7);
        let design = RdDesign::sharp(0.0, TreatedSide::Above);
        let h = select_bandwidth_cv(&data, &design).unwrap();
        let grid = candidate_grid(&data, &design);
        let idx = grid.iter().position(|&g| g == h).unwrap();
        let at = cv_objective(&data, &design, h).unwrap();
        if idx > 0 {
            if let Some(prev) = cv_objective(&data, &design, grid[idx - 1]) {
                assert!(at <= prev);
            }
        }
        if idx + 1 < grid.len() {
            if let Some(next) = cv_objective(&data, &design, grid[idx + 1]) {
                assert!(at <= next);
            }
        }
    }

    #[test]
    fn loo_identity_matches_explicit_refits() {
        // brute-force oracle: refit without each evaluation row
        let data = noisy_linear(40, 3);
        let design = RdDesign::sharp(0.0, TreatedSide::Above);
        let h = 1.0;

        let mut distances: Vec<f64> = data.x_values().map(f64::abs).collect();
        distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = distances[distances.len() / 2];

        let mut brute = 0.0;
        for side in [Side::Left, Side::Right] {
            for (i, row) in data.rows.iter().enumerate() {
                if design.side_of(row.x) != side || row.x.abs() > median {
                    continue;
                }
                let mut rest = data.clone();
                rest.rows.remove(i);
                let rows = window_rows(&rest, &design, side, h, &[FitTarget::Outcome]);
                let xmat = power_design_matrix(&rows.xc, design.order);
                let sol =
                    solve_wls(&xmat, &rows.weights, &[rows.targets[0].as_slice()]).unwrap();
                let pred = sol.coefs[0][0] + sol.coefs[0][1] * row.x;
                brute += (row.y - pred) * (row.y - pred);
            }
        }
        let fast = cv_objective(&data, &design, h).unwrap();
        assert!(
            (fast - brute).abs() < 1e-8 * brute.max(1.0),
            "fast {fast} vs brute {brute}"
        );
    }

    #[test]
    fn too_few_observations_error() {
        let design = RdDesign::sharp(0.0, TreatedSide::Above);
        assert!(matches!(
            select_bandwidth_cv(&noisy_linear(8, 4), &design),
            Err(Error::InsufficientData(_))
        ));
    }
}
