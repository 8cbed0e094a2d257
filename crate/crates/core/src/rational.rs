//! Exact rational arithmetic helpers.
//!
//! Every budget, bid and dual quantity in the crate is a [`Q`]; floating
//! point only shows up when a value is rendered for a human.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// Exact rational number.
pub type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational `{text}`: {reason}")]
pub struct ParseRationalError {
    pub text: String,
    pub reason: &'static str,
}

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn frac(numer: i64, denom: i64) -> Q {
    Q::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// `base^exp` for a non-negative integer exponent.
pub fn pow(base: &Q, exp: u32) -> Q {
    num_traits::pow(base.clone(), exp as usize)
}

/// Parses `"p/q"` or `"p"`. Decimal points and exponents are rejected so
/// nothing inexact can sneak in.
pub fn parse(text: &str) -> Result<Q, ParseRationalError> {
    let err = |reason| ParseRationalError {
        text: text.to_string(),
        reason,
    };
    let t = text.trim();
    if t.is_empty() {
        return Err(err("empty"));
    }
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let numer: BigInt = n.parse().map_err(|_| err("numerator is not an integer"))?;
    let denom: BigInt = d.parse().map_err(|_| err("denominator is not an integer"))?;
    if denom.is_zero() {
        return Err(err("zero denominator"));
    }
    Ok(Q::new(numer, denom))
}

/// Canonical `"p/q"` form (always with a denominator, reduced, sign on p).
pub fn format(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `ceil(q)` as an integer; `q` must be non-negative and fit in u64.
pub fn ceil_u64(q: &Q) -> u64 {
    q.ceil().to_integer().to_u64().expect("ceil out of range")
}

pub fn is_unit_fraction(q: &Q) -> bool {
    q.is_positive() && q.numer().is_one()
}

pub fn min(a: &Q, b: &Q) -> Q {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn max(a: &Q, b: &Q) -> Q {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

/// Serde adapter storing a rational as a `"p/q"` string.
pub mod serde_q {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(de::Error::custom)
    }
}

/// Serde adapter for `Option<Q>`.
pub mod serde_opt_q {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
        match q {
            Some(q) => s.serialize_some(&format(q)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Q>, D::Error> {
        let text = Option::<String>::deserialize(d)?;
        text.map(|t| parse(&t).map_err(de::Error::custom))
            .transpose()
    }
}

/// Owned wrapper that serializes as `"p/q"`; handy inside maps and lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ratio(pub Q);

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serde_q::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        serde_q::deserialize(d).map(Ratio)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format(&self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse("3/6").unwrap(), frac(1, 2));
        assert_eq!(parse(" 4 ").unwrap(), int(4));
        assert_eq!(parse("-2/4").unwrap(), frac(-1, 2));
        assert_eq!(format(&int(3)), "3/1");
        assert_eq!(format(&frac(6, -8)), "-3/4");
        assert!(parse("0.5").is_err());
        assert!(parse("1/0").is_err());
        assert!(parse("").is_err());
        assert!(parse("1e3").is_err());
    }

    #[test]
    fn large_denominators_survive_text() {
        let q = pow(&frac(4, 3), 40) - int(1);
        assert_eq!(parse(&format(&q)).unwrap(), q);
    }

    #[test]
    fn unit_fractions() {
        assert!(is_unit_fraction(&frac(1, 7)));
        assert!(is_unit_fraction(&int(1)));
        assert!(!is_unit_fraction(&frac(2, 7)));
        assert!(!is_unit_fraction(&zero()));
    }
}
