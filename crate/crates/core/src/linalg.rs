//! Dense LU factorization for the small taboo systems.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::{Backend, Scalar};

/// Row-major square matrix.
pub(crate) type Matrix<S> = Vec<Vec<S>>;

/// `P A = L U` with unit lower-triangular `L` stored below the diagonal.
#[derive(Clone, Debug)]
pub(crate) struct Lu<S> {
    lu: Matrix<S>,
    perm: Vec<usize>,
}

impl<S: Scalar> Lu<S> {
    /// Partial pivoting on the largest magnitude. For rationals any nonzero
    /// pivot is exact; the largest one keeps entries small.
    pub(crate) fn factor(mut a: Matrix<S>) -> Result<Self> {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot_row = (col..n)
                .filter(|&r| !a[r][col].is_zero())
                .max_by(|&x, &y| {
                    a[x][col]
                        .abs()
                        .partial_cmp(&a[y][col].abs())
                        .unwrap_or(core::cmp::Ordering::Equal)
                })
                .ok_or(Error::Supercritical)?;
            if S::BACKEND == Backend::Float && a[pivot_row][col].abs().to_f64() < 1e-300 {
                return Err(Error::Supercritical);
            }
            a.swap(col, pivot_row);
            perm.swap(col, pivot_row);
            let pivot = a[col][col].clone();
            for r in col + 1..n {
                if a[r][col].is_zero() {
                    continue;
                }
                let factor = a[r][col].clone() / pivot.clone();
                for c in col + 1..n {
                    let delta = factor.clone() * a[col][c].clone();
                    a[r][c] = a[r][c].clone() - delta;
                }
                a[r][col] = factor;
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub(crate) fn solve(&self, rhs: &[S]) -> Result<Vec<S>> {
        let n = self.lu.len();
        let mut x: Vec<S> = self.perm.iter().map(|&p| rhs[p].clone()).collect();
        for r in 0..n {
            for c in 0..r {
                let delta = self.lu[r][c].clone() * x[c].clone();
                x[r] = x[r].clone() - delta;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let delta = self.lu[r][c].clone() * x[c].clone();
                x[r] = x[r].clone() - delta;
            }
            x[r] = x[r].clone() / self.lu[r][r].clone();
            if !x[r].is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(x)
    }
}

/// Factor `I - A` for a non-negative `A`, refusing unless the spectral radius
/// of `A` is below one.
///
/// With `b = 1`, a solution `x >= b > 0` of `x = A x + b` exists exactly when
/// `ρ(A) < 1` (Collatz–Wielandt), so one extra solve certifies the
/// subcritical regime, exactly under the rational backend.
pub(crate) fn factor_subcritical<S: Scalar>(a: &Matrix<S>) -> Result<Lu<S>> {
    let n = a.len();
    let m: Matrix<S> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let id = if r == c { S::one() } else { S::zero() };
                    id - a[r][c].clone()
                })
                .collect()
        })
        .collect();
    let lu = Lu::factor(m)?;
    let ones = alloc::vec![S::one(); n];
    let x = lu.solve(&ones)?;
    if x.iter().any(|v| *v <= S::zero()) {
        return Err(Error::Supercritical);
    }
    Ok(lu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use alloc::vec;

    #[test]
    fn solves_rational_system_exactly() {
        let q = |n, d| Rational::ratio(n, d);
        let a = vec![vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(3, 1)]];
        let lu = Lu::factor(a).unwrap();
        let x = lu.solve(&[q(3, 1), q(5, 1)]).unwrap();
        assert_eq!(x, vec![q(4, 5), q(7, 5)]);
    }

    #[test]
    fn pivots_past_zero_diagonal() {
        let a = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let x = Lu::factor(a).unwrap().solve(&[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_is_rejected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(Lu::factor(a).is_err());
    }

    #[test]
    fn subcritical_check() {
        let half = vec![vec![0.25, 0.25], vec![0.5, 0.25]];
        assert!(factor_subcritical(&half).is_ok());
        // Spectral radius 1.5: I - A is invertible but the Neumann series diverges.
        let big = vec![vec![1.5]];
        assert_eq!(factor_subcritical(&big).unwrap_err(), Error::Supercritical);
        let critical = vec![vec![Rational::ratio(1, 2), Rational::ratio(1, 2)], vec![Rational::ratio(1, 2), Rational::ratio(1, 2)]];
        assert_eq!(factor_subcritical(&critical).unwrap_err(), Error::Supercritical);
    }
}
