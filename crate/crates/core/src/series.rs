//! Truncated power series in the perturbation parameter.
//!
//! A [`PowerSeries`] of order `k` stores the coefficients of `1, ε, …, ε^k`
//! and stands for `value + o(ε^k)`. Binary operations require equal orders
//! and never produce coefficients past the truncation order.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Neg;

use crate::error::{Error, Result};
use crate::scalar::{factorial, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> PowerSeries<S> {
    /// Series whose order is `coeffs.len() - 1`.
    pub fn new(coeffs: Vec<S>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Usage("a power series needs at least one coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    /// Series of the given order; missing coefficients are zero and extra
    /// ones are dropped. Zero-filling is exact for polynomial data only.
    pub fn from_coeffs<I: IntoIterator<Item = S>>(coeffs: I, order: usize) -> Self {
        let mut coeffs: Vec<S> = coeffs.into_iter().take(order + 1).collect();
        coeffs.resize(order + 1, S::zero());
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![S::zero(); order + 1] }
    }

    pub fn constant(value: S, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = value;
        s
    }

    pub fn one(order: usize) -> Self {
        Self::constant(S::one(), order)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    /// Coefficient of `ε^n`. Panics past the truncation order.
    pub fn coeff(&self, n: usize) -> &S {
        &self.coeffs[n]
    }

    pub fn set_coeff(&mut self, n: usize, value: S) {
        self.coeffs[n] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Drop coefficients past `order`. Raising the order is refused, since the
    /// missing coefficients are unknown.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::OrderMismatch { left: self.order(), right: order });
        }
        Ok(Self { coeffs: self.coeffs[..=order].to_vec() })
    }

    /// Change the order, zero-filling when growing. Only valid when the
    /// series is known to be an exact polynomial.
    pub fn resize(&self, order: usize) -> Self {
        Self::from_coeffs(self.coeffs.iter().cloned(), order)
    }

    fn same_order(&self, other: &Self) -> Result<()> {
        if self.order() == other.order() {
            Ok(())
        } else {
            Err(Error::OrderMismatch { left: self.order(), right: other.order() })
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.same_order(other)?;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.same_order(other)?;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        })
    }

    /// Truncated Cauchy product.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.same_order(other)?;
        Ok(self.mul_truncated(other, self.order()))
    }

    /// Cauchy product truncated at `order`, reading each factor only up to
    /// its own order. Callers guarantee the skipped terms vanish.
    pub(crate) fn mul_truncated(&self, other: &Self, order: usize) -> Self {
        let mut out = Self::zero(order);
        for (m, a) in self.coeffs.iter().enumerate().take(order + 1) {
            if a.is_zero() {
                continue;
            }
            for (l, b) in other.coeffs.iter().enumerate().take(order + 1 - m) {
                out.coeffs[m + l] = out.coeffs[m + l].clone() + a.clone() * b.clone();
            }
        }
        out
    }

    /// Series quotient `q` with `den * q == self` up to the truncation order.
    pub fn checked_div(&self, den: &Self) -> Result<Self> {
        self.same_order(den)?;
        let d0 = den.coeffs[0].clone();
        if d0.is_zero() {
            return Err(Error::SingularDivision);
        }
        let mut q: Vec<S> = Vec::with_capacity(self.coeffs.len());
        for n in 0..self.coeffs.len() {
            let mut acc = self.coeffs[n].clone();
            for m in 1..=n {
                acc = acc - den.coeffs[m].clone() * q[n - m].clone();
            }
            let value = acc / d0.clone();
            if !value.is_finite() {
                return Err(Error::NonFinite);
            }
            q.push(value);
        }
        Ok(Self { coeffs: q })
    }

    pub fn scale(&self, factor: &S) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c.clone() * factor.clone()).collect() }
    }

    pub fn powi(&self, exp: usize) -> Self {
        let mut acc = Self::one(self.order());
        for _ in 0..exp {
            acc = acc.mul_truncated(self, self.order());
        }
        acc
    }

    /// Value of the truncated polynomial at `x` (Horner).
    pub fn evaluate(&self, x: &S) -> S {
        self.coeffs
            .iter()
            .rev()
            .fold(S::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn map<T: Scalar, F: FnMut(&S) -> T>(&self, f: F) -> PowerSeries<T> {
        PowerSeries { coeffs: self.coeffs.iter().map(f).collect() }
    }
}

impl<S: Scalar> Neg for PowerSeries<S> {
    type Output = Self;

    fn neg(self) -> Self {
        Self { coeffs: self.coeffs.into_iter().map(|c| -c).collect() }
    }
}

impl<S: Scalar> fmt::Display for PowerSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, c) in self.coeffs.iter().enumerate() {
            if n > 0 {
                f.write_str(" + ")?;
            }
            match n {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})ε")?,
                _ => write!(f, "({c})ε^{n}")?,
            }
        }
        write!(f, " + o(ε^{})", self.order())
    }
}

/// One element of `D_{m,q}`: counts `n_1..n_{q-1}` with `Σ n_p = m` and
/// `Σ p·n_p = q`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Partition {
    counts: Vec<usize>,
}

impl Partition {
    /// `counts()[p - 1]` is `n_p`.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn parts(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn weight(&self) -> usize {
        self.counts.iter().enumerate().map(|(p, n)| (p + 1) * n).sum()
    }
}

/// All non-negative solutions of `n_1 + … + n_{q-1} = m`,
/// `n_1 + 2 n_2 + … + (q-1) n_{q-1} = q`, in lexicographic order.
pub fn enumerate_partitions(m: usize, q: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    if q < 2 {
        return out;
    }
    let mut counts = vec![0; q - 1];
    fill_partitions(0, m, q, &mut counts, &mut out);
    out
}

fn fill_partitions(
    pos: usize,
    parts_left: usize,
    weight_left: usize,
    counts: &mut Vec<usize>,
    out: &mut Vec<Partition>,
) {
    if pos == counts.len() {
        if parts_left == 0 && weight_left == 0 {
            out.push(Partition { counts: counts.clone() });
        }
        return;
    }
    let p = pos + 1;
    // Parts of size > p still available; each remaining part weighs at least p.
    let max_here = parts_left.min(weight_left / p);
    for n in 0..=max_here {
        let parts = parts_left - n;
        let weight = weight_left - n * p;
        // Remaining parts have sizes in (p, q-1].
        let lo = parts * (p + 1);
        let hi = parts * counts.len();
        if parts > 0 && (weight < lo || weight > hi) {
            continue;
        }
        if parts == 0 && weight != 0 {
            continue;
        }
        counts[pos] = n;
        fill_partitions(pos + 1, parts, weight, counts, out);
    }
    counts[pos] = 0;
}

/// `Σ_{r=0}^{R} inner^r / r! · outer_r`, truncated at `order`.
///
/// `inner` must vanish at `ε = 0`, so `inner^r` starts at `ε^r` and row `r`
/// only needs coefficients up to `order - r`. Rows past `order` cannot
/// contribute and are ignored.
pub fn taylor_substitute<S: Scalar>(
    outer: &[PowerSeries<S>],
    inner: &PowerSeries<S>,
    order: usize,
) -> Result<PowerSeries<S>> {
    if !inner.coeff(0).is_zero() {
        return Err(Error::NonZeroConstant);
    }
    if inner.order() < order {
        return Err(Error::OrderMismatch { left: inner.order(), right: order });
    }
    if outer.len() <= order {
        return Err(Error::Usage(alloc::format!(
            "substitution to order {order} needs {} outer rows, got {}",
            order + 1,
            outer.len()
        )));
    }
    let inner = inner.truncate(order)?;
    let mut acc = PowerSeries::zero(order);
    let mut power = PowerSeries::one(order);
    for (r, row) in outer.iter().enumerate().take(order + 1) {
        if row.order() + r < order {
            return Err(Error::OrderMismatch { left: row.order(), right: order - r });
        }
        let term = row.mul_truncated(&power, order);
        let inv_fact = S::one() / factorial::<S>(r);
        acc = acc.checked_add(&term.scale(&inv_fact))?;
        power = power.mul_truncated(&inner, order);
    }
    Ok(acc)
}
