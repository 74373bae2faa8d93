//! Numeric backends.
//!
//! Every algorithm in this crate is generic over [`Scalar`], which is
//! implemented for exact rationals ([`Rational`]) and for `f64`. The rational
//! backend is the reference: it has no rounding, but it cannot represent
//! `exp(x)` for `x != 0`, so only computations at exponent zero stay exact.

use alloc::format;
use core::fmt::{Debug, Display};
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational number, always stored in lowest terms.
pub type Rational = BigRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Rational,
    Float,
}

impl Display for Backend {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Backend::Rational => f.write_str("rational"),
            Backend::Float => f.write_str("float"),
        }
    }
}

/// A field element usable by the expansion algorithms.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const BACKEND: Backend;

    fn from_rational(value: &Rational) -> Self;

    fn from_i64(value: i64) -> Self;

    /// Lift a float. Only the float backend accepts arbitrary floats; the
    /// rational backend refuses anything but zero so that inexact values
    /// never leak into an exact computation.
    fn from_f64(value: f64) -> Result<Self>;

    fn to_f64(&self) -> f64;

    fn abs(&self) -> Self;

    fn exp(&self) -> Result<Self>;

    fn is_finite(&self) -> bool;

    /// Absolute slack used when checking identities such as row sums.
    fn slack() -> f64;

    fn from_usize(value: usize) -> Self {
        Self::from_i64(value as i64)
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    fn powi(&self, exp: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = acc * self.clone();
        }
        acc
    }

    /// Equality up to the backend's slack, relative to the magnitude of `other`.
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        match Self::BACKEND {
            Backend::Rational => self == other,
            Backend::Float => {
                let scale = other.to_f64().abs().max(1.0);
                (self.to_f64() - other.to_f64()).abs() <= tol * scale
            }
        }
    }
}

impl Scalar for Rational {
    const BACKEND: Backend = Backend::Rational;

    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }

    fn from_i64(value: i64) -> Self {
        Rational::from_integer(BigInt::from(value))
    }

    fn from_f64(value: f64) -> Result<Self> {
        if value == 0.0 {
            Ok(Rational::zero())
        } else {
            Err(Error::Backend(format!(
                "value {value} has no exact rational counterpart in this computation"
            )))
        }
    }

    fn to_f64(&self) -> f64 {
        self.to_f64_lossy()
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn exp(&self) -> Result<Self> {
        if self.is_zero() {
            Ok(Rational::one())
        } else {
            Err(Error::Backend(format!(
                "exp({self}) is irrational; use the float backend for nonzero exponents"
            )))
        }
    }

    fn is_finite(&self) -> bool {
        true
    }

    fn slack() -> f64 {
        0.0
    }
}

trait LossyF64 {
    fn to_f64_lossy(&self) -> f64;
}

impl LossyF64 for Rational {
    fn to_f64_lossy(&self) -> f64 {
        if let Some(v) = ToPrimitive::to_f64(self) {
            return v;
        }
        // Numerator and denominator too large individually; shift both.
        let n = self.numer();
        let d = self.denom();
        let shift = n.bits().max(d.bits()).saturating_sub(1000);
        let n = (n >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (d >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    }
}

impl Scalar for f64 {
    const BACKEND: Backend = Backend::Float;

    fn from_rational(value: &Rational) -> Self {
        value.to_f64_lossy()
    }

    fn from_i64(value: i64) -> Self {
        value as f64
    }

    fn from_f64(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite)
        }
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        Float::abs(*self)
    }

    fn exp(&self) -> Result<Self> {
        let v = Float::exp(*self);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    fn is_finite(&self) -> bool {
        Float::is_finite(*self)
    }

    fn slack() -> f64 {
        1e-12
    }
}

/// Binomial coefficient `C(n, k)` as a scalar.
pub(crate) fn binomial<S: Scalar>(n: usize, k: usize) -> S {
    if k > n {
        return S::zero();
    }
    let k = k.min(n - k);
    let mut acc = S::one();
    for t in 0..k {
        acc = acc * S::from_usize(n - t) / S::from_usize(t + 1);
    }
    acc
}

pub(crate) fn factorial<S: Scalar>(n: usize) -> S {
    (1..=n).fold(S::one(), |acc, t| acc * S::from_usize(t))
}
