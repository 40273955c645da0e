//! Exact rational scalars and their `"a/b"` string form.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{DcError, Result};

pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `"a/b"` or a plain integer `"a"`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || DcError::Parse(format!("not a rational number: {text:?}"));
    match text.split_once('/') {
        Some((numer, denom)) => {
            let numer: BigInt = numer.trim().parse().map_err(|_| bad())?;
            let denom: BigInt = denom.trim().parse().map_err(|_| bad())?;
            if denom.is_zero() {
                return Err(DcError::Parse(format!("zero denominator in {text:?}")));
            }
            Ok(Rational::new(numer, denom))
        }
        None => {
            let numer: BigInt = text.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(numer))
        }
    }
}

/// Always `"a/b"`, integers included (`"1/1"`).
pub fn format_rational(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn pow(base: &Rational, exp: usize) -> Rational {
    num_traits::pow(base.clone(), exp)
}

/// Checks `0 <= p <= 1`.
pub fn check_probability(p: &Rational) -> Result<()> {
    if p.is_negative() || *p > Rational::one() {
        return Err(DcError::Domain(format!(
            "p = {} is outside [0, 1]",
            format_rational(p)
        )));
    }
    Ok(())
}

/// Checks `0 < p < 1`.
pub fn check_open_probability(p: &Rational) -> Result<()> {
    if !p.is_positive() || *p >= Rational::one() {
        return Err(DcError::Domain(format!(
            "p = {} is outside (0, 1)",
            format_rational(p)
        )));
    }
    Ok(())
}

pub fn is_half(p: &Rational) -> bool {
    *p == rat(1, 2)
}

pub(crate) mod serde_rational_vecs {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        let text: Vec<Vec<String>> = values
            .iter()
            .map(|row| row.iter().map(format_rational).collect())
            .collect();
        text.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        let raw: Vec<Vec<String>> = Vec::deserialize(d)?;
        raw.iter()
            .map(|row| {
                row.iter()
                    .map(|t| parse_rational(t).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

pub(crate) mod serde_rational_opt_vec {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &Option<Vec<Rational>>, s: S) -> Result<S::Ok, S::Error> {
        values
            .as_ref()
            .map(|v| v.iter().map(format_rational).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Rational>>, D::Error> {
        let raw: Option<Vec<String>> = Option::deserialize(d)?;
        raw.map(|v| {
            v.iter()
                .map(|t| parse_rational(t).map_err(serde::de::Error::custom))
                .collect()
        })
        .transpose()
    }
}
