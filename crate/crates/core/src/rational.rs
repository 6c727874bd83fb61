//! Exact rational arithmetic: the number type every module computes with.
//!
//! [`Rat`] is an arbitrary-precision rational kept in lowest terms with a
//! positive denominator (both invariants are maintained by `num`). Numbers
//! are rendered as `num/den` (or a bare integer when the denominator is 1)
//! everywhere: files, reports, witnesses.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

/// Arbitrary-precision rational, always in lowest terms, denominator > 0.
pub type Rat = BigRational;

/// Integer as a rational.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `n/d` as a rational. Panics if `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRatError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid integer in rational literal: {0}")]
    BadInt(String),
    #[error("zero denominator in rational literal: {0}")]
    ZeroDenominator(String),
}

/// Parses `"num/den"` or a bare integer, with optional sign on either part.
pub fn parse_rat(s: &str) -> Result<Rat, ParseRatError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseRatError::Empty);
    }
    let parse_int = |p: &str| -> Result<BigInt, ParseRatError> {
        p.trim()
            .parse::<BigInt>()
            .map_err(|_| ParseRatError::BadInt(s.to_string()))
    };
    match s.split_once('/') {
        None => Ok(Rat::from_integer(parse_int(s)?)),
        Some((n, d)) => {
            let num = parse_int(n)?;
            let den = parse_int(d)?;
            if den.is_zero() {
                return Err(ParseRatError::ZeroDenominator(s.to_string()));
            }
            Ok(Rat::new(num, den))
        }
    }
}

/// Renders in the canonical `num/den` form, omitting `/1`.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Sum of a slice.
pub fn sum(values: &[Rat]) -> Rat {
    values.iter().fold(Rat::zero(), |acc, v| acc + v)
}

/// True when `r` is strictly positive.
pub fn is_pos(r: &Rat) -> bool {
    r.is_positive()
}

/// Serde adapter storing a [`Rat`] as a `"num/den"` string.
pub mod serde_str {
    use super::{format_rat, parse_rat, Rat};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let raw = String::deserialize(d)?;
        parse_rat(&raw).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integers_and_fractions() {
        assert_eq!(parse_rat("3").unwrap(), rat(3));
        assert_eq!(parse_rat("-3").unwrap(), rat(-3));
        assert_eq!(parse_rat("5/6").unwrap(), ratio(5, 6));
        assert_eq!(parse_rat(" -2/4 ").unwrap(), ratio(-1, 2));
        assert_eq!(parse_rat("4/-6").unwrap(), ratio(-2, 3));
    }

    #[test]
    fn rejects_bad_literals() {
        assert!(matches!(parse_rat(""), Err(ParseRatError::Empty)));
        assert!(matches!(parse_rat("x/2"), Err(ParseRatError::BadInt(_))));
        assert!(matches!(
            parse_rat("1/0"),
            Err(ParseRatError::ZeroDenominator(_))
        ));
    }

    #[test]
    fn formats_lowest_terms() {
        assert_eq!(format_rat(&ratio(4, 8)), "1/2");
        assert_eq!(format_rat(&ratio(-4, 8)), "-1/2");
        assert_eq!(format_rat(&rat(7)), "7");
        assert_eq!(format_rat(&ratio(6, 3)), "2");
    }
}
