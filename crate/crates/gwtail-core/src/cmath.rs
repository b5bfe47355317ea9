//! Precision-preserving complex helpers.
//!
//! The infinite products over correction factors `1 + c_j` involve `c_j`
//! far below machine epsilon of 1, so `log(1 + c)` and `exp(s) - 1` must be
//! evaluated without forming `1 + c` explicitly.

use crate::C64;
use num_traits::Float;

/// `log(1 + z)` accurate for `|z|` down to the underflow threshold.
///
/// Real part via `ln_1p(2x + x^2 + y^2) / 2`, imaginary part via `atan2`.
pub fn log1p(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    C64::new(
        0.5 * Float::ln_1p(2.0 * x + x * x + y * y),
        Float::atan2(y, 1.0 + x),
    )
}

/// `exp(z) - 1` accurate for small `|z|`.
pub fn expm1(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    let sh = Float::sin(0.5 * y);
    C64::new(
        Float::exp_m1(x) * Float::cos(y) - 2.0 * sh * sh,
        Float::exp(x) * Float::sin(y),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1p_tiny_argument_keeps_relative_precision() {
        let z = C64::new(1.6e-18, 3.0e-19);
        let l = log1p(z);
        assert!((l.re - 1.6e-18).abs() < 1e-33);
        assert!((l.im - 3.0e-19).abs() < 1e-33);
    }

    #[test]
    fn expm1_matches_exp_for_moderate_argument() {
        let z = C64::new(0.3, -1.1);
        let d = (expm1(z) - (z.exp() - C64::new(1.0, 0.0))).norm();
        assert!(d < 1e-15);
    }

    #[test]
    fn round_trip_small() {
        let z = C64::new(-4.0e-14, 2.0e-14);
        let d = (expm1(log1p(z)) - z).norm();
        assert!(d < 1e-28);
    }
}
