//! Coordinate fields: exact rationals or double precision floats.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = num_rational::BigRational;

/// Tolerance for axis-parallel and sign predicates in float mode.
pub const AXIS_EPS: f64 = 1e-9;
/// Relative tolerance for comparing event thresholds in float mode.
pub const THRESHOLD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

impl Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Exact => write!(f, "exact"),
            Mode::Float => write!(f, "float"),
        }
    }
}

pub trait Coord:
    Clone + Debug + Display + PartialOrd + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    const MODE: Mode;

    /// Sign of the value, or `None` when it is zero (within `eps` in float mode).
    fn sign_eps(&self, eps: f64) -> Option<i8>;

    /// Comparison that reports a tie as `None` (relative `eps` in float mode).
    fn cmp_tol(&self, other: &Self, eps: f64) -> Option<Ordering>;

    fn to_f(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a double into the field; exact mode keeps its binary value.
    fn from_f(x: f64) -> Self;

    fn parse_str(s: &str) -> Option<Self>;

    fn to_json(&self) -> serde_json::Value;

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer fits the field")
    }

    fn half(&self) -> Self {
        self.clone() / Self::from_int(2)
    }

    fn max_of(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

impl Coord for f64 {
    const MODE: Mode = Mode::Float;

    fn sign_eps(&self, eps: f64) -> Option<i8> {
        if *self > eps {
            Some(1)
        } else if *self < -eps {
            Some(-1)
        } else {
            None
        }
    }

    fn cmp_tol(&self, other: &Self, eps: f64) -> Option<Ordering> {
        let scale = self.abs().max(other.abs()).max(f64::MIN_POSITIVE);
        if (self - other).abs() <= eps * scale {
            None
        } else {
            self.partial_cmp(other)
        }
    }

    fn from_f(x: f64) -> Self {
        x
    }

    fn parse_str(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Number::from_f64(*self)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }
}

impl Coord for Rational {
    const MODE: Mode = Mode::Exact;

    fn sign_eps(&self, _eps: f64) -> Option<i8> {
        if self.is_zero() {
            None
        } else if self.is_positive() {
            Some(1)
        } else {
            Some(-1)
        }
    }

    fn cmp_tol(&self, other: &Self, _eps: f64) -> Option<Ordering> {
        match self.cmp(other) {
            Ordering::Equal => None,
            o => Some(o),
        }
    }

    fn from_f(x: f64) -> Self {
        Rational::from_float(x).expect("finite float")
    }

    fn parse_str(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num = BigInt::from_str(num.trim()).ok()?;
            let den = BigInt::from_str(den.trim()).ok()?;
            if den.is_zero() {
                return None;
            }
            return Some(Rational::new(num, den));
        }
        if let Ok(n) = BigInt::from_str(s) {
            return Some(Rational::from_integer(n));
        }
        parse_decimal(s)
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(render_rational(self))
    }
}

/// Parses plain decimal notation such as `-0.35` exactly.
fn parse_decimal(s: &str) -> Option<Rational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.')?;
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str(&digits).ok()?;
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = Rational::new(num, den);
    Some(if neg { -value } else { value })
}

pub fn render_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}
