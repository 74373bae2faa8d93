//! Perturbed discrete-time semi-Markov models.
//!
//! States are `0..=N`; state `0` is absorbing and has no outgoing entries.
//! The kernel `Q_ij(n; ε)` is given per `(i, j, n)` as a polynomial in `ε`
//! of degree at most the model order.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::PowerSeries;

/// Number of sample points used when searching for a default validity interval.
const EPS_SAMPLES: usize = 1000;

/// One kernel entry: transition `from -> to` taking `time` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    pub from: usize,
    pub to: usize,
    pub time: usize,
    /// Polynomial coefficients in `ε`, constant term first.
    pub poly: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedSemiMarkovModel<S> {
    states: usize,
    order: usize,
    eps_max: S,
    max_time: usize,
    kernel: BTreeMap<(usize, usize, usize), PowerSeries<S>>,
}

impl<S: Scalar> PerturbedSemiMarkovModel<S> {
    /// Build and validate a model.
    ///
    /// Row stochasticity is checked layer by layer: constant terms of each row
    /// sum to one, every higher layer sums to zero. When `eps_max` is `None` it
    /// defaults to half the largest sampled `ε <= 1` up to which every entry
    /// stays in `[0, 1]`.
    pub fn new<I>(states: usize, order: usize, transitions: I, eps_max: Option<S>) -> Result<Self>
    where
        I: IntoIterator<Item = Transition<S>>,
    {
        if states == 0 {
            return Err(Error::Model("at least one non-absorbing state is required".into()));
        }
        let mut kernel = BTreeMap::new();
        for t in transitions {
            if t.from == 0 || t.from > states {
                return Err(Error::Model(format!(
                    "transition source {} outside 1..={states}",
                    t.from
                )));
            }
            if t.to > states {
                return Err(Error::Model(format!("transition target {} outside 0..={states}", t.to)));
            }
            if t.time == 0 {
                return Err(Error::Model(format!(
                    "transition {} -> {} has time 0; transition times start at 1",
                    t.from, t.to
                )));
            }
            if t.poly.len() > order + 1 {
                return Err(Error::Model(format!(
                    "transition {} -> {} (time {}) has degree {} above model order {order}",
                    t.from,
                    t.to,
                    t.time,
                    t.poly.len() - 1
                )));
            }
            let poly = PowerSeries::from_coeffs(t.poly, order);
            if kernel.insert((t.from, t.to, t.time), poly).is_some() {
                return Err(Error::Model(format!(
                    "duplicate transition {} -> {} (time {})",
                    t.from, t.to, t.time
                )));
            }
        }
        kernel.retain(|_, p: &mut PowerSeries<S>| !p.is_zero());
        let max_time = kernel.keys().map(|&(_, _, n)| n).max().unwrap_or(1);

        let mut model = Self { states, order, eps_max: S::zero(), max_time, kernel };
        model.check_layers()?;
        model.evaluate_unchecked(&S::zero()).check()?;
        model.eps_max = match eps_max {
            Some(e) => {
                if e <= S::zero() {
                    return Err(Error::Model(format!("eps_max must be positive, got {e}")));
                }
                model.check_interval(&e)?;
                e
            }
            None => model.default_eps_max()?,
        };
        Ok(model)
    }

    /// Markov chain with `Q_ij(n) = p_ij χ(n = 1)`. Entries are `(i, j, poly)`.
    pub fn from_markov_chain<I>(states: usize, order: usize, p: I, eps_max: Option<S>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, Vec<S>)>,
    {
        let transitions = p
            .into_iter()
            .map(|(from, to, poly)| Transition { from, to, time: 1, poly });
        Self::new(states, order, transitions, eps_max)
    }

    fn check_layers(&self) -> Result<()> {
        for i in 1..=self.states {
            for layer in 0..=self.order {
                let sum = self
                    .kernel
                    .range((i, 0, 0)..(i + 1, 0, 0))
                    .fold(S::zero(), |acc, (_, p)| acc + p.coeff(layer).clone());
                let target = if layer == 0 { S::one() } else { S::zero() };
                if !sum.approx_eq(&target, S::slack()) {
                    return Err(Error::Model(format!(
                        "row {i}: layer {layer} of the transition polynomials sums to {sum}, expected {target}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn entries_in_unit_interval(&self, eps: &S) -> bool {
        let tol = S::from_f64(S::slack()).unwrap_or_else(|_| S::zero());
        self.kernel.values().all(|p| {
            let v = p.evaluate(eps);
            v >= -tol.clone() && v <= S::one() + tol.clone()
        })
    }

    fn check_interval(&self, eps_max: &S) -> Result<()> {
        let steps = 64;
        for t in 1..=steps {
            let eps = eps_max.clone() * S::ratio(t, steps);
            if !self.entries_in_unit_interval(&eps) {
                return Err(Error::Model(format!(
                    "kernel leaves [0, 1] at ε = {eps} inside the declared interval [0, {eps_max}]"
                )));
            }
        }
        Ok(())
    }

    fn default_eps_max(&self) -> Result<S> {
        // Coarse scan in f64, then an exact confirmation of the candidate.
        let float = self.to_float();
        let mut last_ok = 0;
        for t in 1..=EPS_SAMPLES {
            if float.entries_in_unit_interval(&(t as f64 / EPS_SAMPLES as f64)) {
                last_ok = t;
            } else {
                break;
            }
        }
        while last_ok > 0 {
            let candidate = S::ratio(last_ok as i64, 2 * EPS_SAMPLES as i64);
            if self.check_interval(&(candidate.clone() * S::from_i64(2))).is_ok() {
                return Ok(candidate);
            }
            last_ok -= 1;
        }
        Err(Error::Model(
            "kernel leaves [0, 1] for every sampled ε > 0; declare eps_max explicitly".into(),
        ))
    }

    /// Number of non-absorbing states `N`.
    pub fn states(&self) -> usize {
        self.states
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eps_max(&self) -> &S {
        &self.eps_max
    }

    pub fn max_time(&self) -> usize {
        self.max_time
    }

    pub fn is_markov_chain(&self) -> bool {
        self.max_time == 1
    }

    /// Nonzero kernel polynomials keyed by `(i, j, n)`.
    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize, usize), &PowerSeries<S>)> {
        self.kernel.iter()
    }

    pub fn entry(&self, i: usize, j: usize, n: usize) -> Option<&PowerSeries<S>> {
        self.kernel.get(&(i, j, n))
    }

    /// Embedded-chain polynomial `p_ij(ε) = Σ_n Q_ij(n; ε)`.
    pub fn transition_poly(&self, i: usize, j: usize) -> PowerSeries<S> {
        self.kernel
            .range((i, j, 0)..(i, j + 1, 0))
            .fold(PowerSeries::zero(self.order), |acc, (_, p)| {
                acc.checked_add(p).expect("kernel polynomials share the model order")
            })
    }

    /// Kernel at a fixed `ε`; the result is checked, never renormalized.
    pub fn evaluate_at(&self, eps: &S) -> Result<ConcreteKernel<S>> {
        if *eps < S::zero() || *eps > self.eps_max {
            return Err(Error::Evaluation(format!(
                "ε = {eps} outside the validity interval [0, {}]",
                self.eps_max
            )));
        }
        let kernel = self.evaluate_unchecked(eps);
        kernel.check()?;
        Ok(kernel)
    }

    pub fn limiting_kernel(&self) -> Result<ConcreteKernel<S>> {
        self.evaluate_at(&S::zero())
    }

    fn evaluate_unchecked(&self, eps: &S) -> ConcreteKernel<S> {
        let mut kernel = ConcreteKernel::zeros(self.states, self.max_time);
        for (&(i, j, n), p) in &self.kernel {
            *kernel.slot_mut(i, j, n) = p.evaluate(eps);
        }
        kernel.epsilon = Some(eps.clone());
        kernel
    }

    /// The same model with every coefficient rounded to `f64`.
    pub fn to_float(&self) -> PerturbedSemiMarkovModel<f64> {
        PerturbedSemiMarkovModel {
            states: self.states,
            order: self.order,
            eps_max: self.eps_max.to_f64(),
            max_time: self.max_time,
            kernel: self.kernel.iter().map(|(&k, p)| (k, p.map(S::to_f64))).collect(),
        }
    }
}

/// Kernel `Q_ij(n)` at one fixed `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteKernel<S> {
    states: usize,
    max_time: usize,
    q: Vec<S>,
    epsilon: Option<S>,
}

impl<S: Scalar> ConcreteKernel<S> {
    fn zeros(states: usize, max_time: usize) -> Self {
        Self {
            states,
            max_time,
            q: vec![S::zero(); (states + 1) * (states + 1) * max_time],
            epsilon: None,
        }
    }

    /// Kernel from explicit `(i, j, n, value)` entries, checked for
    /// non-negativity and unit row sums.
    pub fn new<I>(states: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, S)>,
    {
        let entries: Vec<_> = entries.into_iter().collect();
        let max_time = entries.iter().map(|e| e.2).max().unwrap_or(1).max(1);
        let mut kernel = Self::zeros(states, max_time);
        for (i, j, n, v) in entries {
            if i == 0 || i > states || j > states || n == 0 {
                return Err(Error::Model(format!("kernel entry ({i}, {j}, {n}) out of range")));
            }
            let slot = kernel.slot_mut(i, j, n);
            *slot = slot.clone() + v;
        }
        kernel.check()?;
        Ok(kernel)
    }

    fn index(&self, i: usize, j: usize, n: usize) -> usize {
        ((i * (self.states + 1)) + j) * self.max_time + (n - 1)
    }

    fn slot_mut(&mut self, i: usize, j: usize, n: usize) -> &mut S {
        let idx = self.index(i, j, n);
        &mut self.q[idx]
    }

    fn check(&self) -> Result<()> {
        for i in 1..=self.states {
            let mut sum = S::zero();
            for j in 0..=self.states {
                for n in 1..=self.max_time {
                    let v = self.q(i, j, n);
                    if !v.is_finite() || *v < S::zero() {
                        return Err(Error::Evaluation(format!(
                            "Q_{i}{j}({n}) = {v} is not a probability"
                        )));
                    }
                    sum = sum + v.clone();
                }
            }
            if !sum.approx_eq(&S::one(), S::slack()) {
                return Err(Error::Evaluation(format!("row {i} sums to {sum}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn max_time(&self) -> usize {
        self.max_time
    }

    /// Tag the kernel with the `ε` it represents.
    pub fn with_epsilon(mut self, eps: S) -> Self {
        self.epsilon = Some(eps);
        self
    }

    /// The `ε` this kernel was evaluated at, when it came from a model.
    pub fn epsilon(&self) -> Option<&S> {
        self.epsilon.as_ref()
    }

    /// `Q_ij(n)`; zero for `i = 0` and outside `1..=max_time`.
    pub fn q(&self, i: usize, j: usize, n: usize) -> &S {
        // Row 0 is never written, so slot 0 (Q_00(1)) is a permanent zero.
        if i == 0 || n == 0 || n > self.max_time {
            return &self.q[0];
        }
        &self.q[self.index(i, j, n)]
    }

    /// Embedded-chain probability `p_ij = Σ_n Q_ij(n)`.
    pub fn transition_prob(&self, i: usize, j: usize) -> S {
        (1..=self.max_time).fold(S::zero(), |acc, n| acc + self.q(i, j, n).clone())
    }

    /// `P_i{κ > n}`, including transitions into the absorbing state.
    pub fn sojourn_tail(&self, i: usize, n: usize) -> S {
        let mut acc = S::zero();
        for j in 0..=self.states {
            for t in n + 1..=self.max_time {
                acc = acc + self.q(i, j, t).clone();
            }
        }
        acc
    }

    pub fn to_float(&self) -> ConcreteKernel<f64> {
        ConcreteKernel {
            states: self.states,
            max_time: self.max_time,
            q: self.q.iter().map(S::to_f64).collect(),
            epsilon: self.epsilon.as_ref().map(S::to_f64),
        }
    }

    /// `j` is a successor of `i` when some `Q_ij(n) > 0`.
    pub(crate) fn has_edge(&self, i: usize, j: usize) -> bool {
        (1..=self.max_time).any(|n| !self.q(i, j, n).is_zero())
    }
}

/// Outcome of checking the structural conditions on the limiting kernel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub communication_ok: bool,
    /// `reachable[i-1][j-1]`: `g_ij > 0`, i.e. `j` is reached from `i` in at
    /// least one jump without passing through state 0.
    pub reachable: Vec<Vec<bool>>,
    pub nonperiodic_ok: bool,
    /// Period of the return-time distribution of each state; `None` when the
    /// state is never returned to.
    pub periods: Vec<Option<u64>>,
    pub stochastic_ok: bool,
    /// `p_i0 = 0` for every `i` in the limiting kernel.
    pub limit_absorption_free: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    /// Conditions that the expansion pipeline cannot do without.
    pub fn hard_ok(&self) -> bool {
        self.communication_ok && self.nonperiodic_ok && self.stochastic_ok
    }
}

/// Check communication, aperiodicity and stochasticity at `ε = 0`.
pub fn validate_conditions<S: Scalar>(model: &PerturbedSemiMarkovModel<S>) -> ValidationReport {
    let mut messages = Vec::new();
    let mut stochastic_ok = model.check_layers().is_ok();
    let limiting = match model.limiting_kernel() {
        Ok(k) => k,
        Err(e) => {
            messages.push(format!("limiting kernel is not stochastic: {e}"));
            let n = model.states();
            return ValidationReport {
                communication_ok: false,
                reachable: vec![vec![false; n]; n],
                nonperiodic_ok: false,
                periods: vec![None; n],
                stochastic_ok: false,
                limit_absorption_free: false,
                messages,
            };
        }
    };
    for eps in [model.eps_max().clone(), model.eps_max().clone() * S::ratio(1, 2)] {
        if let Err(e) = model.evaluate_at(&eps) {
            stochastic_ok = false;
            messages.push(format!("kernel at ε = {eps}: {e}"));
        }
    }
    let mut report = validate_kernel(&limiting);
    report.stochastic_ok &= stochastic_ok;
    messages.append(&mut report.messages);
    report.messages = messages;
    report
}

/// Structural checks on a single kernel.
pub fn validate_kernel<S: Scalar>(kernel: &ConcreteKernel<S>) -> ValidationReport {
    let n = kernel.states();
    let mut messages = Vec::new();

    let reachable: Vec<Vec<bool>> = (1..=n).map(|i| taboo_reach(kernel, i)).collect();
    let mut communication_ok = true;
    for i in 1..=n {
        for j in 1..=n {
            if !reachable[i - 1][j - 1] {
                communication_ok = false;
                messages.push(format!("g_{i}{j} = 0: state {j} is not reached from {i} before absorption"));
            }
        }
    }

    let periods: Vec<Option<u64>> = (1..=n).map(|i| period(kernel, i)).collect();
    let nonperiodic_ok = periods.contains(&Some(1));
    if !nonperiodic_ok {
        let described: Vec<String> = periods
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                Some(d) => format!("state {}: period {d}", i + 1),
                None => format!("state {}: no return", i + 1),
            })
            .collect();
        messages.push(format!("no state has an aperiodic return-time distribution ({})", described.join(", ")));
    }

    let limit_absorption_free = (1..=n).all(|i| !kernel.has_edge(i, 0));
    if !limit_absorption_free {
        messages.push("absorption is possible in the limiting kernel; the limiting root is found numerically".into());
    }

    ValidationReport {
        communication_ok,
        reachable,
        nonperiodic_ok,
        periods,
        stochastic_ok: kernel.check().is_ok(),
        limit_absorption_free,
        messages,
    }
}

/// States reached from `i` in one or more jumps avoiding state 0.
fn taboo_reach<S: Scalar>(kernel: &ConcreteKernel<S>, i: usize) -> Vec<bool> {
    let n = kernel.states();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    queue.push_back(i);
    while let Some(u) = queue.pop_front() {
        for v in 1..=n {
            if !seen[v - 1] && kernel.has_edge(u, v) {
                seen[v - 1] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// gcd of closed-walk durations through `i` in the time-weighted graph on
/// `1..=N`, computed by distance labelling over the strongly connected
/// component of `i`.
fn period<S: Scalar>(kernel: &ConcreteKernel<S>, i: usize) -> Option<u64> {
    let n = kernel.states();
    let forward = taboo_reach(kernel, i);
    if !forward[i - 1] {
        return None;
    }
    // Component of i: reachable from i and reaching i.
    let in_component: Vec<bool> = (1..=n)
        .map(|v| v == i || (forward[v - 1] && taboo_reach(kernel, v)[i - 1]))
        .collect();

    let mut dist: Vec<Option<i64>> = vec![None; n];
    dist[i - 1] = Some(0);
    let mut queue = VecDeque::new();
    queue.push_back(i);
    let mut g: u64 = 0;
    while let Some(u) = queue.pop_front() {
        let du = dist[u - 1].expect("queued states are labelled");
        for v in 1..=n {
            if !in_component[v - 1] {
                continue;
            }
            for t in 1..=kernel.max_time() {
                if kernel.q(u, v, t).is_zero() {
                    continue;
                }
                let candidate = du + t as i64;
                match dist[v - 1] {
                    None => {
                        dist[v - 1] = Some(candidate);
                        queue.push_back(v);
                    }
                    Some(dv) => g = g.gcd(&(candidate - dv).unsigned_abs()),
                }
            }
        }
    }
    Some(g)
}
