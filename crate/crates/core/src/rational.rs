//! Exact rational arithmetic helpers.
//!
//! All values in this crate are [`Rat`] (arbitrary-precision rationals).
//! JSON interchange renders a rational as the string `"num/den"` (or
//! just `"num"` when the denominator is 1), which keeps reports exact
//! and byte-stable across runs.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

pub type Rat = BigRational;

/// `n / d` as an exact rational. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    assert!(d != 0, "zero denominator");
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer `n` as an exact rational.
pub fn rint(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// `2^e` as an exact rational (`e` may be negative).
pub fn pow2(e: i32) -> Rat {
    BigRational::from_integer(BigInt::from(2)).pow(e)
}

/// `1 / m^e` for a positive integer base, used for the various
/// `1/m^3`, `1/m^4`, ... tolerances.
pub fn inv_pow(m: usize, e: u32) -> Rat {
    assert!(m > 0, "zero base");
    let mut d = BigInt::one();
    for _ in 0..e {
        d *= BigInt::from(m);
    }
    BigRational::new(BigInt::one(), d)
}

/// Positive part `max(x, 0)`.
pub fn pos(x: &Rat) -> Rat {
    if x.is_negative() {
        Rat::zero()
    } else {
        x.clone()
    }
}

/// Renders `n/d` with the denominator omitted when it is 1.
pub fn rat_to_string(x: &Rat) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `"num"` or `"num/den"`.
pub fn rat_from_str(s: &str) -> Result<Rat, RatParseError> {
    let mk_err = || RatParseError(s.to_string());
    match s.split_once('/') {
        None => {
            let n = BigInt::from_str(s.trim()).map_err(|_| mk_err())?;
            Ok(BigRational::from_integer(n))
        }
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| mk_err())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| mk_err())?;
            if d.is_zero() {
                return Err(mk_err());
            }
            Ok(BigRational::new(n, d))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {0:?} (expected \"num\" or \"num/den\")")]
pub struct RatParseError(pub String);

/// Serde adapter: `#[serde(with = "crate::rational::serde_rat")]`.
pub mod serde_rat {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rat_to_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        rat_from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Rat>`.
pub mod serde_rat_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = xs.iter().map(rat_to_string).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter()
            .map(|s| rat_from_str(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for `Option<Rat>`.
pub mod serde_rat_opt {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(x) => s.serialize_some(&rat_to_string(x)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rat>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| rat_from_str(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Wrapper giving a `Rat` the string-based serde representation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RatStr(pub Rat);

impl Serialize for RatStr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rat_to_string(&self.0))
    }
}

impl<'de> Deserialize<'de> for RatStr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        rat_from_str(&s).map(RatStr).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for RatStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rat_to_string(&self.0))
    }
}

impl From<Rat> for RatStr {
    fn from(x: Rat) -> Self {
        RatStr(x)
    }
}
