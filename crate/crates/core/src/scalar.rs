//! Numeric field contract shared by the exact and floating-point kernels.
//!
//! Every inference routine in this crate is written once against [`Scalar`]
//! and instantiated with [`Exact`] (arbitrary-precision rationals) or `f64`.
//! Exact mode makes equality assertions meaningful; float mode is for scans.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num::bigint::BigInt;
use num::traits::{One, Signed, ToPrimitive, Zero};
use num::BigRational;
use serde_json::Value;

use crate::error::{Error, Result};

/// Arbitrary-precision rational number.
pub type Exact = BigRational;

/// Default absolute tolerance for float-mode comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

pub trait Scalar:
    Clone + Debug + Display + PartialEq + PartialOrd + Signed + Send + Sync + 'static
{
    /// `true` when arithmetic is exact, so equality checks need no tolerance.
    const EXACT: bool;

    /// Short name used in reports ("rational" / "float").
    const MODE: &'static str;

    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn from_f64(value: f64) -> Result<Self>;

    fn to_f64(&self) -> f64;

    /// Equality, exact for rationals and within `tol` for floats.
    fn approx_eq(&self, other: &Self, tol: f64) -> bool;

    fn to_json(&self) -> Value;

    fn from_json(value: &Value) -> Result<Self>;

    fn from_usize(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    fn half() -> Self {
        Self::from_ratio(1, 2)
    }
}

impl Scalar for Exact {
    const EXACT: bool = true;
    const MODE: &'static str = "rational";

    fn from_ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn from_f64(value: f64) -> Result<Self> {
        BigRational::from_float(value)
            .ok_or_else(|| Error::Parse(format!("cannot represent {value} as a rational")))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn approx_eq(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }

    fn to_json(&self) -> Value {
        Value::String(format_rational(self))
    }

    fn from_json(value: &Value) -> Result<Self> {
        match value {
            Value::String(s) => parse_rational(s),
            other => Err(Error::Parse(format!(
                "expected a \"p/q\" string in rational mode, found {other}"
            ))),
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const MODE: &'static str = "float";

    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn from_f64(value: f64) -> Result<Self> {
        Ok(value)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }

    fn from_json(value: &Value) -> Result<Self> {
        match value {
            Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("number {n} out of f64 range"))),
            other => Err(Error::Parse(format!(
                "expected a JSON number in float mode, found {other}"
            ))),
        }
    }
}

/// Balanced summation. Exact sums keep their intermediate denominators
/// small this way; float sums get `O(log n)` error growth.
pub fn pairwise_sum<S: Scalar>(mut terms: Vec<S>) -> S {
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a + b,
                None => a,
            });
        }
        terms = next;
    }
    terms.pop().unwrap_or_else(S::zero)
}

/// Always `p/q`, also for integers, so the mode of a serialized value is
/// visible without context.
pub fn format_rational(r: &Exact) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q` or a bare integer `p`.
pub fn parse_rational(s: &str) -> Result<Exact> {
    let s = s.trim();
    let bad = || Error::Parse(format!("malformed rational {s:?}"));
    let (numer, denom) = match s.split_once('/') {
        Some((n, d)) => (
            BigInt::from_str(n.trim()).map_err(|_| bad())?,
            BigInt::from_str(d.trim()).map_err(|_| bad())?,
        ),
        None => (BigInt::from_str(s).map_err(|_| bad())?, BigInt::one()),
    };
    if denom.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(numer, denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_text_forms() {
        let r = parse_rational("-3/6").unwrap();
        assert_eq!(r, Exact::from_ratio(-1, 2));
        assert_eq!(format_rational(&r), "-1/2");
        assert_eq!(format_rational(&Exact::from_ratio(4, 2)), "2/1");
        assert_eq!(parse_rational("7").unwrap(), Exact::from_ratio(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x/2").is_err());
    }

    #[test]
    fn json_mode_is_strict() {
        assert!(Exact::from_json(&serde_json::json!(0.5)).is_err());
        assert!(f64::from_json(&serde_json::json!("1/2")).is_err());
        assert_eq!(f64::from_json(&serde_json::json!(0.25)).unwrap(), 0.25);
    }

    #[test]
    fn float_conversion_is_exact_for_dyadics() {
        let r = Exact::from_f64(0.375).unwrap();
        assert_eq!(r, Exact::from_ratio(3, 8));
        assert_eq!(Scalar::to_f64(&r), 0.375);
    }
}
