//! Exact rational scalars and their canonical text form.
//!
//! Every quantity in the workbench is a [`Q`]; the helpers here pin down the
//! one textual encoding used by files, reports, and tests: a reduced fraction
//! `p/q` with positive denominator, printed as a plain integer when the
//! denominator is 1.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Arbitrary-precision rational; the scalar type of the whole crate.
pub type Q = BigRational;

/// Zero.
pub fn q0() -> Q {
    Q::zero()
}

/// One.
pub fn q1() -> Q {
    Q::one()
}

/// The integer `n` as a rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// The fraction `n/d`. Panics if `d == 0`; intended for literals in code.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses the canonical form: an optional sign, digits, and an optional
/// `/digits` with a positive denominator. Whitespace at the ends is ignored.
pub fn parse_q(text: &str) -> Result<Q, String> {
    let s = text.trim();
    let (negative, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (num_str, den_str) = match rest.split_once('/') {
        Some((a, b)) => (a, Some(b)),
        None => (rest, None),
    };
    let digits = |part: &str| -> Result<BigInt, String> {
        if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("malformed rational `{text}`"));
        }
        Ok(part.parse::<BigInt>().expect("digit string"))
    };
    let mut numer = digits(num_str)?;
    let denom = match den_str {
        Some(d) => {
            let d = digits(d)?;
            if d.is_zero() {
                return Err(format!("zero denominator in `{text}`"));
            }
            d
        }
        None => BigInt::one(),
    };
    if negative {
        numer = -numer;
    }
    Ok(Q::new(numer, denom))
}

/// Canonical text form: reduced, `n` when integral, otherwise `n/d`.
pub fn fmt_q(value: &Q) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Maximum of the absolute values in a slice; zero for an empty slice.
pub fn sup_abs(values: &[Q]) -> Q {
    values
        .iter()
        .map(|v| v.abs())
        .max()
        .unwrap_or_else(q0)
}
