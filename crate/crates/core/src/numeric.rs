//! Conversions between arbitrary-precision integers/rationals and `f64`.
//!
//! Counts in this crate routinely exceed `f64::MAX` (b(4000, j) has over a
//! thousand decimal digits), so conversions go through explicit
//! shifts and logarithms rather than `to_f64` on the raw value.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

const LN_2: f64 = std::f64::consts::LN_2;

/// Natural logarithm of a positive big integer; `-inf` for zero.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        if let Some(f) = x.to_f64() {
            if f.is_finite() {
                return f.ln();
            }
        }
    }
    // Keep the top 64 bits as the mantissa.
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value fits in f64");
    top.ln() + shift as f64 * LN_2
}

/// `num / den` rounded to `f64`, accurate even when both sides overflow `f64`.
pub fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    assert!(!den.is_zero(), "division by zero");
    if num.is_zero() {
        return 0.0;
    }
    let negative = (num.sign() == Sign::Minus) != (den.sign() == Sign::Minus);
    let n = num.magnitude();
    let d = den.magnitude();
    // Scale so the integer quotient carries 64+ significant bits.
    let shift: i64 = d.bits() as i64 - n.bits() as i64 + 66;
    let q = if shift >= 0 {
        (n << shift as u64) / d
    } else {
        n / (d << (-shift) as u64)
    };
    let mag = q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-(shift as i32));
    if negative {
        -mag
    } else {
        mag
    }
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    ratio_to_f64(x.numer(), x.denom())
}

/// Log-sum-exp of a slice of logarithms, ignoring `-inf` entries.
pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Exact decimal rendering of a rational as `num/den` (or just `num`).
pub fn format_rational(x: &BigRational) -> String {
    if x.denom() == &BigInt::from(1) {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub(crate) fn is_positive(x: &BigRational) -> bool {
    x.is_positive()
}
