//! Standard normal tail probabilities.

use std::f64::consts::FRAC_1_SQRT_2;

/// One-sided upper tail `P(Z > z)` of the standard normal distribution.
///
/// Evaluated as `erfc(z / sqrt 2) / 2`. For `z > 0` the result is strictly
/// below one half even when `erfc` rounds to one, so `p < 0.5` and `z > 0`
/// always agree.
pub fn upper_tail(z: f64) -> f64 {
    let p = 0.5 * libm::erfc(z * FRAC_1_SQRT_2);
    if z > 0.0 {
        p.min(0.5f64.next_down())
    } else {
        p
    }
}
