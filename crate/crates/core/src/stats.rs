//! Normal-distribution helpers shared by the estimators and tests.

/// 97.5% standard-normal quantile, used for 95% intervals.
pub const Z_975: f64 = 1.959963984540054;

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-sided normal p-value for a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { 1.0 } else { 0.0 };
    }
    (erfc(z.abs() / std::f64::consts::SQRT_2)).min(1.0)
}

/// Complementary error function (Numerical Recipes rational approximation,
/// |error| < 1.2e-7, adequate for p-values).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Two-sided p for an estimate and its standard error, with the degenerate
/// zero-variance cases pinned: exact zero is "no evidence", nonzero is certain.
pub fn wald_p(estimate: f64, se: f64) -> f64 {
    if se > 0.0 {
        two_sided_p(estimate / se)
    } else if estimate == 0.0 {
        1.0
    } else {
        0.0
    }
}
