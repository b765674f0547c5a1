//! Kernel weight functions for local fitting.

use crate::design::Kernel;

/// Weight for a bandwidth-scaled distance `u = (x - c) / h`. Zero outside
/// [-1, 1], maximal at zero, symmetric.
pub fn kernel_weight(u: f64, kernel: Kernel) -> f64 {
    let a = u.abs();
    if a > 1.0 {
        return 0.0;
    }
    match kernel {
        Kernel::Triangular => 1.0 - a,
        Kernel::Uniform => 1.0,
        Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
    }
}
