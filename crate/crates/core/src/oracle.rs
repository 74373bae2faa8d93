//! Ground truth for the QSD at a fixed `ε`.
//!
//! Two independent routes:
//!
//! * [`qsd_direct`]: `π_j = ω_iij(ρ) / Σ_l ω_iil(ρ)` at the root of the
//!   characteristic equation.
//! * [`qsd_iterative`]: propagate the conditional law of `ξ(n)` given
//!   survival on the chain augmented with the pending jump and its
//!   remaining sojourn, renormalizing at every step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::expand::compute_qsd_expansion;
use crate::model::{validate_kernel, ConcreteKernel, PerturbedSemiMarkovModel};
use crate::moments::occupation_transform;
use crate::rootfind::{detect_zero_root, solve_characteristic};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Formula,
    Iterative,
}

/// QSD of one concrete kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct QsdPoint<S> {
    pub epsilon: Option<S>,
    /// `pi[j - 1]`.
    pub pi: Vec<S>,
    pub rho: S,
    pub method: Method,
    /// Iterative route only: total-variation distance between the law at
    /// `horizon` and at `horizon / 2`.
    pub convergence: Option<f64>,
}

/// Total-variation distance `½ Σ |x_j - y_j|`.
pub fn total_variation(x: &[f64], y: &[f64]) -> f64 {
    0.5 * x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// QSD from the occupation transform at the root, with reference state 1.
///
/// The root is exact (zero) when the kernel never absorbs before a return;
/// otherwise it is found by bisection to relative width `tol`, which needs
/// the float backend.
pub fn qsd_direct<S: Scalar>(kernel: &ConcreteKernel<S>, tol: f64) -> Result<QsdPoint<S>> {
    let report = validate_kernel(kernel);
    if !report.hard_ok() {
        return Err(Error::Conditions(report.messages.join("; ")));
    }
    let i = 1;
    let rho = if detect_zero_root(kernel) {
        S::zero()
    } else {
        let root = solve_characteristic(&kernel.to_float(), i, tol)?;
        S::from_f64(root.rho).map_err(|_| {
            Error::Backend(format!("root {} is not exactly representable; use the float backend", root.rho))
        })?
    };
    let omega = occupation_transform(kernel, &rho, 0, i)?;
    let n = kernel.states();
    let total = (1..=n).fold(S::zero(), |acc, s| acc + omega.omega(i, s, 0).clone());
    if total <= S::zero() {
        return Err(Error::DegenerateNormalizer(format!("{total}")));
    }
    let pi = (1..=n).map(|s| omega.omega(i, s, 0).clone() / total.clone()).collect();
    Ok(QsdPoint { epsilon: kernel.epsilon().cloned(), pi, rho, method: Method::Formula, convergence: None })
}

/// Law of `(ξ(n), pending jump target, remaining sojourn)` on survival.
struct Augmented<'a> {
    kernel: &'a ConcreteKernel<f64>,
    /// `mass[(l * (N + 1) + s) * T + (t - 1)]`.
    mass: Vec<f64>,
}

impl<'a> Augmented<'a> {
    fn start(kernel: &'a ConcreteKernel<f64>, i: usize) -> Self {
        let n = kernel.states();
        let aug = Self { kernel, mass: Vec::new() };
        let mut mass = vec![0.0; (n + 1) * (n + 1) * kernel.max_time()];
        aug.enter(&mut mass, i, 1.0);
        Self { mass, ..aug }
    }

    fn idx(&self, l: usize, s: usize, t: usize) -> usize {
        (l * (self.kernel.states() + 1) + s) * self.kernel.max_time() + (t - 1)
    }

    /// Add the jump law out of `l`, scaled by `w`, to `into`.
    fn enter(&self, into: &mut [f64], l: usize, w: f64) {
        let n = self.kernel.states();
        for s in 0..=n {
            for t in 1..=self.kernel.max_time() {
                let q = *self.kernel.q(l, s, t);
                if q != 0.0 {
                    into[self.idx(l, s, t)] += w * q;
                }
            }
        }
    }

    /// One time step; returns the surviving mass before renormalization.
    fn step(&mut self) -> f64 {
        let n = self.kernel.states();
        let tmax = self.kernel.max_time();
        let mut next = vec![0.0; self.mass.len()];
        for l in 1..=n {
            for s in 0..=n {
                for t in 1..=tmax {
                    let m = self.mass[self.idx(l, s, t)];
                    if m == 0.0 {
                        continue;
                    }
                    if t > 1 {
                        let idx = self.idx(l, s, t - 1);
                        next[idx] += m;
                    } else if s != 0 {
                        self.enter(&mut next, s, m);
                    }
                }
            }
        }
        let total: f64 = next.iter().sum();
        if total > 0.0 && total.is_finite() {
            for v in &mut next {
                *v /= total;
            }
        }
        self.mass = next;
        total
    }

    /// Conditional law of `ξ(n)` over states `1..=N`.
    fn law(&self) -> Vec<f64> {
        let n = self.kernel.states();
        let mut out = vec![0.0; n];
        for (l, o) in out.iter_mut().enumerate() {
            for s in 0..=n {
                for t in 1..=self.kernel.max_time() {
                    *o += self.mass[self.idx(l + 1, s, t)];
                }
            }
        }
        let total: f64 = out.iter().sum();
        out.iter().map(|v| v / total).collect()
    }
}

/// Conditional law `P_i{ξ(horizon) = j | μ_0 > horizon}`.
///
/// `rho` is the one-step decay `-ln P{μ_0 > n + 1 | μ_0 > n}` at the last
/// step, which converges to the root of the characteristic equation.
pub fn qsd_iterative(kernel: &ConcreteKernel<f64>, horizon: usize, i_start: usize) -> Result<QsdPoint<f64>> {
    if horizon == 0 {
        return Err(Error::Usage("horizon must be at least 1".into()));
    }
    if i_start == 0 || i_start > kernel.states() {
        return Err(Error::Usage(format!("start state {i_start} outside 1..={}", kernel.states())));
    }
    let mut aug = Augmented::start(kernel, i_start);
    let mut snapshot = None;
    let mut last = aug.law();
    let mut survival = 1.0;
    for step in 1..=horizon {
        survival = aug.step();
        if !(survival > 0.0) || !survival.is_finite() {
            return Err(Error::HorizonTooLarge { step, last });
        }
        last = aug.law();
        if step == horizon / 2 {
            snapshot = Some(last.clone());
        }
    }
    let convergence = snapshot.map(|s| total_variation(&s, &last));
    Ok(QsdPoint {
        epsilon: kernel.epsilon().copied(),
        pi: last,
        rho: -Float::ln(survival),
        method: Method::Iterative,
        convergence,
    })
}

/// Oracle against truncated expansion at one `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct RemainderRow {
    pub epsilon: f64,
    /// `oracle[j - 1]`.
    pub oracle: Vec<f64>,
    pub expansion: Vec<f64>,
    /// `|oracle - expansion| / ε^k`.
    pub normalized: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemainderReport {
    pub k: usize,
    /// Sorted by decreasing `ε`.
    pub rows: Vec<RemainderRow>,
    /// States whose normalized remainder fails to shrink as `ε` decreases.
    pub non_decaying: Vec<usize>,
}

impl RemainderReport {
    pub fn decaying(&self) -> bool {
        self.non_decaying.is_empty()
    }
}

/// Differences below this are rounding noise and count as zero.
const REMAINDER_FLOOR: f64 = 1e-13;

/// Compare the `k`-th order expansion with [`qsd_direct`] on the model's own
/// kernel along `eps_grid`.
pub fn remainder_report<S: Scalar>(
    model: &PerturbedSemiMarkovModel<S>,
    k: usize,
    eps_grid: &[f64],
    tol: f64,
) -> Result<RemainderReport> {
    let float_model = model.to_float();
    remainder_report_with(model, k, eps_grid, tol, |eps| float_model.evaluate_at(&eps))
}

/// Same, with the ground truth taken from `kernel_at(ε)`, e.g. an unexpanded
/// kernel of which the model is a truncation.
pub fn remainder_report_with<S, F>(
    model: &PerturbedSemiMarkovModel<S>,
    k: usize,
    eps_grid: &[f64],
    tol: f64,
    kernel_at: F,
) -> Result<RemainderReport>
where
    S: Scalar,
    F: Fn(f64) -> Result<ConcreteKernel<f64>>,
{
    let eps_max = model.eps_max().to_f64();
    if let Some(bad) = eps_grid.iter().find(|&&e| !(e > 0.0 && e <= eps_max)) {
        return Err(Error::Usage(format!("grid point {bad} outside (0, {eps_max}]")));
    }
    let expansion = compute_qsd_expansion(model, k)?;
    let pi: Vec<_> = expansion.pi.iter().map(|p| p.map(S::to_f64)).collect();

    let mut grid = eps_grid.to_vec();
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut rows = Vec::with_capacity(grid.len());
    for eps in grid {
        let oracle = qsd_direct(&kernel_at(eps)?, tol)?.pi;
        let approx: Vec<f64> = pi.iter().map(|p| p.evaluate(&eps)).collect();
        let scale = Float::powi(eps, k as i32);
        let normalized = oracle
            .iter()
            .zip(&approx)
            .map(|(o, a)| {
                let diff = (o - a).abs();
                if diff <= REMAINDER_FLOOR { 0.0 } else { diff / scale }
            })
            .collect();
        rows.push(RemainderRow { epsilon: eps, oracle, expansion: approx, normalized });
    }

    let non_decaying = (0..model.states())
        .filter(|&j| {
            rows.windows(2).any(|w| {
                let (prev, next) = (w[0].normalized[j], w[1].normalized[j]);
                !(next < prev || (next == 0.0 && prev == 0.0))
            })
        })
        .map(|j| j + 1)
        .collect();
    Ok(RemainderReport { k, rows, non_decaying })
}
