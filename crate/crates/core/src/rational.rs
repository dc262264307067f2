//! Exact rational helpers on top of [`num_rational::BigRational`].

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `"p/q"` or `"p"`. Decimal and exponent literals are rejected.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let trimmed = text.trim();
    let well_formed = !trimmed.is_empty()
        && trimmed
            .chars()
            .all(|c| c.is_ascii_digit() || c == '/' || c == '-' || c == '+');
    if !well_formed {
        return Err(Error::ParseRational(text.to_string()));
    }
    let value = Rational::from_str(trimmed).map_err(|_| Error::ParseRational(text.to_string()))?;
    Ok(value)
}

/// `p/q` in lowest terms; integers print without a denominator.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Decimal annotation used in reports, 12 significant digits.
pub fn format_decimal(value: &Rational) -> String {
    format!("{:.12e}", to_f64(value))
}

/// `value * 2^bits` rounded to the nearest integer, ties to even.
pub fn round_scaled_half_even(value: &Rational, bits: u32) -> BigInt {
    let scaled: BigInt = value.numer() << bits as usize;
    let denom = value.denom();
    let (quot, rem) = scaled.div_mod_floor(denom);
    let twice: BigInt = &rem * 2u32;
    match twice.cmp(denom) {
        std::cmp::Ordering::Less => quot,
        std::cmp::Ordering::Greater => quot + 1,
        std::cmp::Ordering::Equal => {
            if quot.is_even() {
                quot
            } else {
                quot + 1
            }
        }
    }
}

pub fn is_probability(value: &Rational) -> bool {
    !value.is_negative() && value <= &Rational::one()
}

pub fn sum<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    values.into_iter().fold(Rational::zero(), |acc, v| acc + v)
}

/// Exact integer power with a possibly negative exponent.
pub fn pow(base: &Rational, exp: i32) -> Rational {
    num_traits::pow::Pow::pow(base, exp)
}
