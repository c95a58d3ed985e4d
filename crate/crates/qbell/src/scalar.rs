//! Numeric modes shared by boxes, certificates and the LP routine.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

pub type Rational = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumMode {
    Rational,
    Float,
}

impl NumMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NumMode::Rational => "rational",
            NumMode::Float => "float",
        }
    }
}

impl FromStr for NumMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rational" => Ok(NumMode::Rational),
            "float" => Ok(NumMode::Float),
            other => Err(Error::Parse(format!("unknown numeric mode {other:?}"))),
        }
    }
}

/// Field element used by every numeric container.
///
/// Rational mode answers comparisons exactly; float mode compares against the
/// tolerance passed by the caller.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Signed + FromPrimitive + Send + Sync + 'static
{
    const MODE: NumMode;

    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Exact conversion from a rational; rounds in float mode.
    fn from_rational(r: &Rational) -> Self;

    fn is_exact() -> bool {
        Self::MODE == NumMode::Rational
    }

    /// `|self| <= tol`, or `self == 0` in rational mode.
    fn is_negligible(&self, tol: f64) -> bool {
        if Self::is_exact() {
            self.is_zero()
        } else {
            self.to_f64().abs() <= tol
        }
    }

    /// `self > tol`, or `self > 0` in rational mode.
    fn is_pos(&self, tol: f64) -> bool {
        if Self::is_exact() {
            self.is_positive()
        } else {
            self.to_f64() > tol
        }
    }

    /// `self < -tol`, or `self < 0` in rational mode.
    fn is_neg(&self, tol: f64) -> bool {
        if Self::is_exact() {
            self.is_negative()
        } else {
            self.to_f64() < -tol
        }
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.clone() - other.clone()).is_negligible(tol)
    }

    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Result<Self>;
}

impl Scalar for Rational {
    const MODE: NumMode = NumMode::Rational;

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_json(&self) -> Value {
        Value::String(format_rational(self))
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::String(s) => parse_rational(s),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Rational::from_integer(BigInt::from(i)))
                } else {
                    Err(Error::Parse(format!(
                        "non-integer number {n} in rational mode; write it as \"p/q\""
                    )))
                }
            }
            other => Err(Error::Parse(format!("expected rational, got {other}"))),
        }
    }
}

impl Scalar for f64 {
    const MODE: NumMode = NumMode::Float;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("bad number {n}"))),
            Value::String(s) => {
                if s.contains('/') {
                    Ok(Scalar::to_f64(&parse_rational(s)?))
                } else {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
                }
            }
            other => Err(Error::Parse(format!("expected number, got {other}"))),
        }
    }
}

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad rational {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Always `"p/q"`, with `q = 1` written out for integers.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// `n/d` as a rational.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

/// Sum of a slice.
pub fn sum<S: Scalar>(xs: &[S]) -> S {
    xs.iter().fold(S::zero(), |acc, x| acc + x.clone())
}


/// Nearest rational with denominator `2^bits`.
pub fn rational_from_f64(x: f64, bits: u32) -> Rational {
    let scale = (1u64 << bits) as f64;
    let n = (x * scale).round();
    let n = BigInt::from_f64(n).unwrap_or_default();
    Rational::new(n, BigInt::one() << bits)
}
