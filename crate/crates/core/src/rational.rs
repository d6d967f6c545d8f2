//! Exact rational helpers shared by every module.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Arbitrary-precision rational number.
pub type Rational = num_rational::BigRational;

/// Error produced when a literal is not an integer or `p/q` fraction.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{0}` is not a rational literal (expected an integer or p/q)")]
pub struct RationalLiteralError(pub String);

/// Parses `p/q` or an integer literal. Decimal notation is rejected.
pub fn parse_rational(text: &str) -> Result<Rational, RationalLiteralError> {
    let err = || RationalLiteralError(text.to_string());
    let parse_int = |s: &str| -> Option<BigInt> {
        let digits = s.strip_prefix('-').unwrap_or(s);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        s.parse().ok()
    };
    match text.split_once('/') {
        Some((num, den)) => {
            let num = parse_int(num).ok_or_else(err)?;
            let den = parse_int(den).ok_or_else(err)?;
            if den.is_zero() {
                return Err(err());
            }
            Ok(Rational::new(num, den))
        }
        None => parse_int(text).map(Rational::from_integer).ok_or_else(err),
    }
}

/// Shorthand for building small constants in code and tests.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Lossy conversion for reporting only.
pub fn to_f64(value: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    value.to_f64().unwrap_or(f64::NAN)
}

/// Scales a rational vector by a positive factor so that it becomes a
/// primitive integer vector (gcd of entries is one). Zero vectors stay zero.
pub fn primitive_integer_vector(values: &[Rational]) -> Vec<BigInt> {
    let lcm = values
        .iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let scaled: Vec<BigInt> = values
        .iter()
        .map(|v| v.numer() * (&lcm / v.denom()))
        .collect();
    primitive(scaled)
}

/// Divides an integer vector by the gcd of its entries.
pub fn primitive(mut values: Vec<BigInt>) -> Vec<BigInt> {
    let gcd = values.iter().fold(BigInt::zero(), |acc, v| acc.gcd(v));
    if !gcd.is_zero() && !gcd.is_one() {
        for v in &mut values {
            *v /= &gcd;
        }
    }
    values
}

pub fn is_probability(value: &Rational) -> bool {
    !value.is_negative() && *value <= Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_integers() {
        assert_eq!(parse_rational("3/8").unwrap(), ratio(3, 8));
        assert_eq!(parse_rational("1").unwrap(), int(1));
        assert_eq!(parse_rational("2/4").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("-1/3").unwrap(), ratio(-1, 3));
    }

    #[test]
    fn rejects_decimals_and_garbage() {
        for bad in ["0.5", "1e3", "", "/2", "1/", "1/0", "a/b", "+1"] {
            assert!(parse_rational(bad).is_err(), "{bad} accepted");
        }
    }

    #[test]
    fn primitive_vectors() {
        let v = primitive_integer_vector(&[ratio(1, 2), ratio(-3, 4), int(0)]);
        assert_eq!(v, vec![BigInt::from(2), BigInt::from(-3), BigInt::from(0)]);
    }
}
