//! Exact rational probabilities.
//!
//! A thin newtype over [`num_rational::BigRational`] that always stays in
//! lowest terms, renders as `num/den`, and parses either `a/b` fractions or
//! terminating decimal literals exactly.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

/// Largest power of two tried when snapping a Born probability.
const DYADIC_MAX_EXPONENT: u32 = 16;
/// How far a Born probability may sit from its dyadic snap.
pub const DYADIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RationalError {
    #[error("cannot parse {0:?} as an exact rational or terminating decimal")]
    Malformed(String),
    #[error("denominator is zero in {0:?}")]
    ZeroDenominator(String),
    #[error("{0} is not within 1e-9 of a dyadic rational")]
    NotDyadic(f64),
}

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn half() -> Self {
        Rational::new(1, 2)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_probability(&self) -> bool {
        !self.0.is_negative() && self.0 <= BigRational::one()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// Numerator and denominator as `i64`, if both fit.
    pub fn to_i64_parts(&self) -> Option<(i64, i64)> {
        Some((self.0.numer().to_i64()?, self.0.denom().to_i64()?))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn complement(&self) -> Self {
        Rational(BigRational::one() - &self.0)
    }

    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Rational(self.0.recip()))
        }
    }

    /// Snaps a floating-point probability produced by the state algebra onto
    /// the nearest dyadic rational `k / 2^m`.
    ///
    /// Every Born probability reachable in this protocol is a multiple of
    /// 1/2, so the snap is exact in practice; anything further than
    /// [`DYADIC_TOLERANCE`] from a dyadic value is rejected.
    pub fn from_born(p: f64) -> Result<Self, RationalError> {
        if !p.is_finite() {
            return Err(RationalError::NotDyadic(p));
        }
        for exp in 0..=DYADIC_MAX_EXPONENT {
            let scale = (1u64 << exp) as f64;
            let k = (p * scale).round();
            if (p - k / scale).abs() <= DYADIC_TOLERANCE {
                let r = Rational(BigRational::new(BigInt::from(k as i64), BigInt::from(1u64 << exp)));
                return Ok(r);
            }
        }
        Err(RationalError::NotDyadic(p))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl FromStr for Rational {
    type Err = RationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let malformed = || RationalError::Malformed(s.to_string());
        if let Some((n, d)) = text.split_once('/') {
            let numer = parse_integer(n.trim()).ok_or_else(malformed)?;
            let denom = parse_integer(d.trim()).ok_or_else(malformed)?;
            if denom.is_zero() {
                return Err(RationalError::ZeroDenominator(s.to_string()));
            }
            return Ok(Rational(BigRational::new(numer, denom)));
        }
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(malformed());
        }
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(malformed());
        }
        let digits = format!("{int_part}{frac_part}");
        let mut numer: BigInt = digits.parse().map_err(|_| malformed())?;
        if negative {
            numer = -numer;
        }
        let denom = num_traits::pow(BigInt::from(10), frac_part.len());
        Ok(Rational(BigRational::new(numer, denom)))
    }
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let body = s.strip_prefix('-').unwrap_or(s);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn add(self, rhs: &Rational) -> Rational {
        Rational(&self.0 + &rhs.0)
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        Rational(self.0 - rhs.0)
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        Rational(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn mul(self, rhs: &Rational) -> Rational {
        Rational(&self.0 * &rhs.0)
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        Rational(self.0 / rhs.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| &acc + x)
    }
}
