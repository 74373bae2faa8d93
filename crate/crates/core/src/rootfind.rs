//! Root of the characteristic equation `φ_ii(ρ) = 1`.

use alloc::collections::VecDeque;
use alloc::vec;

use crate::error::{Error, Result};
use crate::model::ConcreteKernel;
use crate::moments::hitting_transform;
use crate::scalar::Scalar;

pub const DEFAULT_ROOT_TOL: f64 = 1e-14;

const MAX_DOUBLINGS: usize = 64;
const MAX_BISECTIONS: usize = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct RootResult {
    pub rho: f64,
    /// `φ_ii(rho) - 1`.
    pub residual: f64,
    pub iterations: usize,
    pub reference_state: usize,
}

/// `true` when `g_ii = 1` for every `i`, i.e. the walk surely returns before
/// absorption and the root is `ρ = 0`.
///
/// Decided on the support graph, so the answer is exact for both backends:
/// `g_ii = 1` iff the absorbing state cannot be reached from `i` before a
/// return and every state met on the way can still reach `i`.
pub fn detect_zero_root<S: Scalar>(kernel: &ConcreteKernel<S>) -> bool {
    (1..=kernel.states()).all(|i| returns_surely(kernel, i))
}

fn returns_surely<S: Scalar>(kernel: &ConcreteKernel<S>, i: usize) -> bool {
    let n = kernel.states();
    // Excursion from i, stopped on re-entering i.
    let mut seen = vec![false; n + 1];
    let mut queue = VecDeque::from([i]);
    let mut first = true;
    while let Some(u) = queue.pop_front() {
        if u == i && !first {
            continue;
        }
        first = false;
        for v in 0..=n {
            if kernel.has_edge(u, v) && !seen[v] {
                if v == 0 {
                    return false;
                }
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    if !seen[i] {
        return false;
    }
    (1..=n).filter(|&s| seen[s] && s != i).all(|s| reaches(kernel, s, i))
}

fn reaches<S: Scalar>(kernel: &ConcreteKernel<S>, from: usize, to: usize) -> bool {
    let n = kernel.states();
    let mut seen = vec![false; n + 1];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            return true;
        }
        for v in 1..=n {
            if !seen[v] && kernel.has_edge(u, v) {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

/// `φ_ii(ρ)`, with a supercritical taboo system read as `+∞`.
fn phi_ii(kernel: &ConcreteKernel<f64>, i: usize, rho: f64) -> Result<Option<f64>> {
    match hitting_transform(kernel, &rho, 0, i) {
        Ok(h) => Ok(Some(*h.phi(i, 0))),
        Err(Error::Supercritical) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Bisection for the non-negative root of `φ_ii(ρ) = 1`.
///
/// `tol` bounds the final bracket width relative to the upper end.
pub fn solve_characteristic(kernel: &ConcreteKernel<f64>, i: usize, tol: f64) -> Result<RootResult> {
    if i == 0 || i > kernel.states() {
        return Err(Error::Usage(alloc::format!("reference state {i} outside 1..={}", kernel.states())));
    }
    if detect_zero_root(kernel) {
        let g = phi_ii(kernel, i, 0.0)?.ok_or(Error::Supercritical)?;
        return Ok(RootResult { rho: 0.0, residual: g - 1.0, iterations: 0, reference_state: i });
    }
    let g = phi_ii(kernel, i, 0.0)?.ok_or(Error::Supercritical)?;
    if g <= 0.0 {
        return Err(Error::NoReturn(i));
    }
    assert!(g <= 1.0 + 1e-12, "hitting probability g_{i}{i} = {g} exceeds one");

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut iterations = 0;
    loop {
        iterations += 1;
        match phi_ii(kernel, i, hi)? {
            Some(v) if v <= 1.0 => {
                lo = hi;
                hi *= 2.0;
            }
            _ => break,
        }
        if iterations > MAX_DOUBLINGS {
            return Err(Error::NoReturn(i));
        }
    }

    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        match phi_ii(kernel, i, mid)? {
            Some(v) if v <= 1.0 => lo = mid,
            _ => hi = mid,
        }
    }

    let at_lo = phi_ii(kernel, i, lo)?.ok_or(Error::Supercritical)?;
    let (rho, value) = match phi_ii(kernel, i, hi)? {
        Some(at_hi) if (at_hi - 1.0).abs() < (at_lo - 1.0).abs() => (hi, at_hi),
        _ => (lo, at_lo),
    };
    Ok(RootResult { rho, residual: value - 1.0, iterations, reference_state: i })
}
