//! Asymptotic expansion of the quasi-stationary distribution in `ε`.
//!
//! The pipeline runs in four stages:
//!
//! 1. Series-valued moment functionals at the limiting root `ρ0`: the
//!    coefficients `b[r, n]` of `φ_ii(ρ0, r)` and `a_j[r, n]` of
//!    `ω_iij(ρ0, r)`. These come from the same taboo linear systems as the
//!    fixed-`ε` transforms, solved order by order with power-series unknowns.
//! 2. The root shift `ρ(ε) - ρ0 = c_1 ε + … + c_k ε^k`.
//! 3. `ω_iij` at the perturbed root, `d_j[0..=k]`.
//! 4. The ratio `π_j = d_j / Σ_l d_l`.
//!
//! Stages 2 and 3 are computed twice: by the closed-form sums over the
//! partition sets `D_{m,q}`, and by generic Taylor substitution of the
//! root-shift series. The two must agree exactly under the rational backend.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{factor_subcritical, Lu, Matrix};
use crate::model::{validate_conditions, PerturbedSemiMarkovModel, ValidationReport};
use crate::rootfind::{detect_zero_root, solve_characteristic, DEFAULT_ROOT_TOL};
use crate::scalar::{binomial, factorial, Backend, Scalar};
use crate::series::{enumerate_partitions, taylor_substitute, PowerSeries};

/// Relative slack for the float backend when comparing the two routes.
const ROUTE_TOL: f64 = 1e-9;

/// `n^r e^{ρ0 n}` for `n = 0..=max_time`.
fn tilt_weights<S: Scalar>(rho0: &S, r: usize, max_time: usize) -> Result<Vec<S>> {
    (0..=max_time)
        .map(|n| {
            let tilt = if rho0.is_zero() { S::one() } else { (rho0.clone() * S::from_usize(n)).exp()? };
            Ok(S::from_usize(n).powi(r) * tilt)
        })
        .collect()
}

fn weighted_entry<S: Scalar>(
    model: &PerturbedSemiMarkovModel<S>,
    w: &[S],
    i: usize,
    j: usize,
    order: usize,
) -> PowerSeries<S> {
    let mut acc = PowerSeries::zero(order);
    for n in 1..=model.max_time() {
        if let Some(poly) = model.entry(i, j, n) {
            acc = acc
                .checked_add(&poly.resize(order).scale(&w[n]))
                .expect("equal orders");
        }
    }
    acc
}

/// Series of `p_ij(ρ0, r)` in `ε` for every `i >= 1` and `j >= 0`.
pub fn expand_p_functionals<S: Scalar>(
    model: &PerturbedSemiMarkovModel<S>,
    rho0: &S,
    r: usize,
    order: usize,
) -> Result<BTreeMap<(usize, usize), PowerSeries<S>>> {
    let w = tilt_weights(rho0, r, model.max_time())?;
    let n = model.states();
    let mut out = BTreeMap::new();
    for i in 1..=n {
        for j in 0..=n {
            out.insert((i, j), weighted_entry(model, &w, i, j, order));
        }
    }
    Ok(out)
}

/// Taboo system with power-series coefficients, truncated at `order`.
struct SeriesTaboo<S> {
    order: usize,
    states: usize,
    /// `layers[m][l - 1][s - 1]` = series of `p_ls(ρ0, m)`, column `target` zeroed.
    layers: Vec<Vec<Vec<PowerSeries<S>>>>,
    weights: Vec<Vec<S>>,
    lu: Lu<S>,
}

impl<S: Scalar> SeriesTaboo<S> {
    fn new(model: &PerturbedSemiMarkovModel<S>, rho0: &S, target: usize, order: usize) -> Result<Self> {
        let n = model.states();
        if target == 0 || target > n {
            return Err(Error::Usage(format!("reference state {target} outside 1..={n}")));
        }
        let weights: Vec<Vec<S>> = (0..=order)
            .map(|r| tilt_weights(rho0, r, model.max_time()))
            .collect::<Result<_>>()?;
        let layers: Vec<Vec<Vec<PowerSeries<S>>>> = weights
            .iter()
            .map(|w| {
                (1..=n)
                    .map(|l| {
                        (1..=n)
                            .map(|s| {
                                if s == target {
                                    PowerSeries::zero(order)
                                } else {
                                    weighted_entry(model, w, l, s, order)
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let a0: Matrix<S> = layers[0]
            .iter()
            .map(|row| row.iter().map(|p| p.coeff(0).clone()).collect())
            .collect();
        let lu = factor_subcritical(&a0)?;
        Ok(Self { order, states: n, layers, weights, lu })
    }

    /// Solve `(I - A(ε)) x = rhs` order by order:
    /// `x[n] = (I - A[0])^{-1} (rhs[n] + Σ_{m=1}^{n} A[m] x[n-m])`.
    fn solve(&self, rhs: &[PowerSeries<S>]) -> Result<Vec<PowerSeries<S>>> {
        let n = self.states;
        let mut x: Vec<Vec<S>> = Vec::with_capacity(self.order + 1);
        for deg in 0..=self.order {
            let mut b: Vec<S> = rhs.iter().map(|p| p.coeff(deg).clone()).collect();
            for m in 1..=deg {
                for (l, bl) in b.iter_mut().enumerate() {
                    for s in 0..n {
                        let a = self.layers[0][l][s].coeff(m);
                        if !a.is_zero() {
                            *bl = bl.clone() + a.clone() * x[deg - m][s].clone();
                        }
                    }
                }
            }
            x.push(self.lu.solve(&b)?);
        }
        Ok((0..n)
            .map(|l| PowerSeries::from_coeffs(x.iter().map(|xd| xd[l].clone()), self.order))
            .collect())
    }

    /// Level `r` of the triangular family: the source plus the binomial
    /// coupling to lower levels. `base[l][col]` and `lower[m][l][col]`.
    fn solve_level(
        &self,
        r: usize,
        mut base: Vec<Vec<PowerSeries<S>>>,
        lower: &[Vec<Vec<PowerSeries<S>>>],
    ) -> Result<Vec<Vec<PowerSeries<S>>>> {
        let n = self.states;
        for m in 1..=r {
            let coef: S = binomial(r, m);
            let prev = &lower[r - m];
            for l in 0..n {
                for col in 0..base[l].len() {
                    let mut acc = PowerSeries::zero(self.order);
                    for s in 0..n {
                        let a = &self.layers[m][l][s];
                        if a.is_zero() {
                            continue;
                        }
                        acc = acc.checked_add(&a.checked_mul(&prev[s][col])?)?;
                    }
                    base[l][col] = base[l][col].checked_add(&acc.scale(&coef))?;
                }
            }
        }
        let cols = base.first().map_or(0, Vec::len);
        let mut out = vec![Vec::with_capacity(cols); n];
        for col in 0..cols {
            let rhs: Vec<PowerSeries<S>> = base.iter().map(|row| row[col].clone()).collect();
            for (l, v) in self.solve(&rhs)?.into_iter().enumerate() {
                out[l].push(v);
            }
        }
        Ok(out)
    }
}

fn sojourn_tail_series<S: Scalar>(
    model: &PerturbedSemiMarkovModel<S>,
    w: &[S],
    i: usize,
    order: usize,
) -> Result<PowerSeries<S>> {
    let mut acc = PowerSeries::zero(order);
    for n in 0..model.max_time() {
        let mut tail = PowerSeries::zero(order);
        for (&(from, _, t), poly) in model.entries() {
            if from == i && t > n {
                tail = tail.checked_add(&poly.resize(order))?;
            }
        }
        acc = acc.checked_add(&tail.scale(&w[n]))?;
    }
    Ok(acc)
}

fn truncate_levels<T, F>(levels: Vec<T>, k: usize, mut f: F) -> Result<Vec<T>>
where
    F: FnMut(T, usize) -> Result<T>,
{
    levels.into_iter().enumerate().map(|(r, lvl)| f(lvl, k - r)).collect()
}

/// `φ_{i,target}(ρ0, r)` as series in `ε`: `out[r][i - 1]` has order `k - r`.
pub fn hitting_series<S: Scalar>(
    model: &PerturbedSemiMarkovModel<S>,
    rho0: &S,
    target: usize,
    k: usize,
) -> Result<Vec<Vec<PowerSeries<S>>>> {
    let sys = SeriesTaboo::new(model, rho0, target, k)?;
    let n = model.states();
    let mut levels: Vec<Vec<Vec<PowerSeries<S>>>> = Vec::with_capacity(k + 1);
    for r in 0..=k {
        let base = (1..=n)
            .map(|l| vec![weighted_entry(model, &sys.weights[r], l, target, k)])
            .collect();
        let x = sys.solve_level(r, base, &levels)?;
        levels.push(x);
    }
    truncate_levels(
        levels.into_iter().map(|lvl| lvl.into_iter().map(|mut col| col.remove(0)).collect()).collect(),
        k,
        |lvl: Vec<PowerSeries<S>>, ord| lvl.iter().map(|p| p.truncate(ord)).collect(),
    )
}

/// `ω_{i,target,s}(ρ0, r)` as series in `ε`: `out[r][i - 1][s - 1]` has order `k - r`.
pub fn occupation_series<S: Scalar>(
    model: &PerturbedSemiMarkovModel<S>,
    rho0: &S,
    target: usize,
    k: usize,
) -> Result<Vec<Vec<Vec<PowerSeries<S>>>>> {
    let sys = SeriesTaboo::new(model, rho0, target, k)?;
    let n = model.states();
    let mut levels: Vec<Vec<Vec<PowerSeries<S>>>> = Vec::with_capacity(k + 1);
    for r in 0..=k {
        let mut base = Vec::with_capacity(n);
        for l in 1..=n {
            let tail = sojourn_tail_series(model, &sys.weights[r], l, k)?;
            base.push(
                (1..=n)
                    .map(|s| if s == l { tail.clone() } else { PowerSeries::zero(k) })
                    .collect(),
            );
        }
        let x = sys.solve_level(r, base, &levels)?;
        levels.push(x);
    }
    truncate_levels(levels, k, |lvl: Vec<Vec<PowerSeries<S>>>, ord| {
        lvl.iter()
            .map(|row| row.iter().map(|p| p.truncate(ord)).collect())
            .collect()
    })
}

/// Rows `b[r, ·]` of the expansion of `φ_ii(ρ0, r)`, `r = 0..=k`.
pub fn expand_phi<S: Scalar>(
    model: &PerturbedSemiMarkovModel<S>,
    rho0: &S,
    i_ref: usize,
    k: usize,
) -> Result<Vec<PowerSeries<S>>> {
    let levels = hitting_series(model, rho0, i_ref, k)?;
    Ok(levels.into_iter().map(|mut lvl| lvl.swap_remove(i_ref - 1)).collect())
}

/// Rows `a_j[r, ·]` of the expansion of `ω_iij(ρ0, r)`, indexed `[j - 1][r]`.
pub fn expand_omega<S: Scalar>(
    model: &PerturbedSemiMarkovModel<S>,
    rho0: &S,
    i_ref: usize,
    k: usize,
) -> Result<Vec<Vec<PowerSeries<S>>>> {
    let levels = occupation_series(model, rho0, i_ref, k)?;
    let n = model.states();
    Ok((0..n)
        .map(|j| levels.iter().map(|lvl| lvl[i_ref - 1][j].clone()).collect())
        .collect())
}

/// Coefficients of the moment-functional expansions at the limiting root.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSeriesTable<S> {
    pub rho0: S,
    pub i_ref: usize,
    pub k: usize,
    /// `b[r]` has order `k - r`.
    b: Vec<PowerSeries<S>>,
    /// `a[j - 1][r]` has order `k - r`.
    a: Vec<Vec<PowerSeries<S>>>,
}

impl<S: Scalar> MomentSeriesTable<S> {
    pub fn build(model: &PerturbedSemiMarkovModel<S>, rho0: &S, i_ref: usize, k: usize) -> Result<Self> {
        let b = expand_phi(model, rho0, i_ref, k)?;
        let a = expand_omega(model, rho0, i_ref, k)?;
        Ok(Self { rho0: rho0.clone(), i_ref, k, b, a })
    }

    /// Table from explicit rows, e.g. for checking the recursions on
    /// hand-made coefficients. Row `r` must have order at least `k - r`.
    pub fn from_rows(rho0: S, i_ref: usize, k: usize, b: Vec<PowerSeries<S>>, a: Vec<Vec<PowerSeries<S>>>) -> Result<Self> {
        let check = |rows: &[PowerSeries<S>]| -> Result<Vec<PowerSeries<S>>> {
            if rows.len() <= k {
                return Err(Error::Usage(format!("need {} rows, got {}", k + 1, rows.len())));
            }
            rows.iter().take(k + 1).enumerate().map(|(r, p)| p.truncate(k - r)).collect()
        };
        let b = check(&b)?;
        let a = a.iter().map(|rows| check(rows)).collect::<Result<_>>()?;
        Ok(Self { rho0, i_ref, k, b, a })
    }

    pub fn states(&self) -> usize {
        self.a.len()
    }

    pub fn b(&self, r: usize, n: usize) -> &S {
        self.b[r].coeff(n)
    }

    pub fn a(&self, j: usize, r: usize, n: usize) -> &S {
        self.a[j - 1][r].coeff(n)
    }

    pub fn b_rows(&self) -> &[PowerSeries<S>] {
        &self.b
    }

    pub fn a_rows(&self, j: usize) -> &[PowerSeries<S>] {
        &self.a[j - 1]
    }
}

/// `Σ_{D_{m,q}} Π_p c_p^{n_p} / n_p!` with `c[p - 1] = c_p`.
fn partition_weight<S: Scalar>(c: &[S], m: usize, q: usize) -> S {
    enumerate_partitions(m, q).iter().fold(S::zero(), |acc, part| {
        let term = part.counts().iter().enumerate().fold(S::one(), |t, (p, &np)| {
            if np == 0 {
                t
            } else {
                t * c[p].powi(np) / factorial::<S>(np)
            }
        });
        acc + term
    })
}

/// Composite sum shared by the root and occupation recursions:
/// `Σ_{m=2}^{n} Σ_{q=m}^{n} rows[m][n-q] · W(m, q)`.
fn higher_order_terms<S: Scalar>(rows: &[PowerSeries<S>], c: &[S], n: usize) -> S {
    let mut acc = S::zero();
    for m in 2..=n {
        for q in m..=n {
            let coef = rows[m].coeff(n - q);
            if coef.is_zero() {
                continue;
            }
            acc = acc + coef.clone() * partition_weight(c, m, q);
        }
    }
    acc
}

/// Root shift coefficients `c_1..=c_k` from the closed-form recursion.
pub fn expand_root<S: Scalar>(table: &MomentSeriesTable<S>) -> Result<Vec<S>> {
    let b = &table.b;
    let mean = b[1.min(table.k)].coeff(0).clone();
    if table.k == 0 {
        return Ok(Vec::new());
    }
    if mean.is_zero() {
        return Err(Error::DegenerateMean);
    }
    let mut c: Vec<S> = Vec::with_capacity(table.k);
    for n in 1..=table.k {
        let mut acc = b[0].coeff(n).clone();
        for q in 1..n {
            acc = acc + b[1].coeff(n - q).clone() * c[q - 1].clone();
        }
        acc = acc + higher_order_terms(b, &c, n);
        c.push(-acc / mean.clone());
    }
    Ok(c)
}

/// `0 + c_1 ε + … + c_k ε^k`.
pub fn root_shift_series<S: Scalar>(c: &[S]) -> PowerSeries<S> {
    PowerSeries::from_coeffs(core::iter::once(S::zero()).chain(c.iter().cloned()), c.len())
}

/// Root shift from the substitution route: choose `c_n` so that coefficient
/// `n` of `Σ_r Δ^r / r! · b[r]` vanishes.
pub fn expand_root_by_substitution<S: Scalar>(table: &MomentSeriesTable<S>) -> Result<Vec<S>> {
    let k = table.k;
    if k == 0 {
        return Ok(Vec::new());
    }
    let mean = table.b[1].coeff(0).clone();
    if mean.is_zero() {
        return Err(Error::DegenerateMean);
    }
    let mut shift = PowerSeries::zero(k);
    for n in 1..=k {
        let partial = taylor_substitute(&table.b, &shift, n)?;
        shift.set_coeff(n, -partial.coeff(n).clone() / mean.clone());
    }
    Ok(shift.coeffs()[1..].to_vec())
}

/// `d_j[0..=k]`: expansion of `ω_iij` at the perturbed root, closed form.
pub fn expand_omega_at_root<S: Scalar>(table: &MomentSeriesTable<S>, c: &[S]) -> Result<Vec<PowerSeries<S>>> {
    let k = table.k;
    if c.len() < k {
        return Err(Error::Usage(format!("need {k} root coefficients, got {}", c.len())));
    }
    Ok(table
        .a
        .iter()
        .map(|rows| {
            let mut d = PowerSeries::zero(k);
            d.set_coeff(0, rows[0].coeff(0).clone());
            for n in 1..=k {
                let mut acc = rows[0].coeff(n).clone();
                for q in 1..=n {
                    acc = acc + rows[1].coeff(n - q).clone() * c[q - 1].clone();
                }
                acc = acc + higher_order_terms(rows, c, n);
                d.set_coeff(n, acc);
            }
            d
        })
        .collect())
}

/// `d_j` by substituting the root-shift series into the `a_j` rows.
pub fn expand_omega_at_root_by_substitution<S: Scalar>(
    table: &MomentSeriesTable<S>,
    c: &[S],
) -> Result<Vec<PowerSeries<S>>> {
    let k = table.k;
    if c.len() < k {
        return Err(Error::Usage(format!("need {k} root coefficients, got {}", c.len())));
    }
    let shift = root_shift_series(&c[..k]);
    table.a.iter().map(|rows| taylor_substitute(rows, &shift, k)).collect()
}

/// Normalizer and QSD coefficients from the `d_j` series.
#[derive(Clone, Debug, PartialEq)]
pub struct QsdCoefficients<S> {
    /// `e[n] = Σ_j d_j[n]`.
    pub e: PowerSeries<S>,
    /// `pi[j - 1]`.
    pub pi: Vec<PowerSeries<S>>,
}

/// `π_j[n] = (d_j[n] - Σ_{q<n} e[n-q] π_j[q]) / e[0]`.
pub fn expand_qsd<S: Scalar>(d: &[PowerSeries<S>], k: usize) -> Result<QsdCoefficients<S>> {
    let mut e = PowerSeries::zero(k);
    for dj in d {
        e = e.checked_add(&dj.truncate(k)?)?;
    }
    let e0 = e.coeff(0).clone();
    if e0 <= S::zero() {
        return Err(Error::DegenerateNormalizer(format!("{e0}")));
    }
    let pi = d
        .iter()
        .map(|dj| {
            let mut pj: PowerSeries<S> = PowerSeries::zero(k);
            for n in 0..=k {
                let mut acc = dj.coeff(n).clone();
                for q in 0..n {
                    acc = acc - e.coeff(n - q).clone() * pj.coeff(q).clone();
                }
                pj.set_coeff(n, acc / e0.clone());
            }
            pj
        })
        .collect();
    Ok(QsdCoefficients { e, pi })
}

/// Knobs for [`compute_qsd_expansion_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionOptions {
    pub i_ref: usize,
    /// Recompute with every other reference state and report whether the
    /// QSD coefficients agree.
    pub check_reference_invariance: bool,
    /// Bracket tolerance for a numerically solved limiting root.
    pub root_tol: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        Self { i_ref: 1, check_reference_invariance: true, root_tol: DEFAULT_ROOT_TOL }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub backend: Backend,
    /// The limiting root was certified to be exactly zero.
    pub zero_limiting_root: bool,
    pub root_routes_agree: bool,
    pub root_route_gap: f64,
    pub omega_routes_agree: bool,
    pub omega_route_gap: f64,
    /// Largest coefficient of `Σ_r Δ^r/r! · b[r] - 1`.
    pub characteristic_residual: f64,
    /// Largest of `|Σ_j π_j[0] - 1|` and `|Σ_j π_j[n]|`.
    pub normalization_residual: f64,
    /// `None` when the check was not requested.
    pub reference_invariant: Option<bool>,
    pub validation: ValidationReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QsdExpansion<S> {
    pub k: usize,
    pub i_ref: usize,
    pub rho0: S,
    /// `c[n - 1] = c_n`.
    pub c: Vec<S>,
    /// `d[j - 1]`.
    pub d: Vec<PowerSeries<S>>,
    pub e: PowerSeries<S>,
    /// `pi[j - 1]`.
    pub pi: Vec<PowerSeries<S>>,
    pub table: MomentSeriesTable<S>,
    pub diagnostics: Diagnostics,
}

impl<S: Scalar> QsdExpansion<S> {
    pub fn states(&self) -> usize {
        self.pi.len()
    }

    /// `π_j[n]`.
    pub fn coefficient(&self, j: usize, n: usize) -> &S {
        self.pi[j - 1].coeff(n)
    }

    /// Truncated expansion `Σ_{n<=k} π_j[n] ε^n` for every `j`.
    pub fn evaluate(&self, eps: &S) -> Vec<S> {
        self.pi.iter().map(|p| p.evaluate(eps)).collect()
    }

    /// Truncated root expansion `ρ0 + Σ c_n ε^n`.
    pub fn root_at(&self, eps: &S) -> S {
        self.rho0.clone() + root_shift_series(&self.c).evaluate(eps)
    }
}

fn gap<S: Scalar>(x: &S, y: &S) -> (bool, f64) {
    (x.approx_eq(y, ROUTE_TOL), (x.to_f64() - y.to_f64()).abs())
}

fn merge((ok_a, gap_a): (bool, f64), (ok_b, gap_b): (bool, f64)) -> (bool, f64) {
    (ok_a && ok_b, gap_a.max(gap_b))
}

/// Required order of the model's polynomial data for a `k`-th order expansion.
pub fn required_model_order<S: Scalar>(model: &PerturbedSemiMarkovModel<S>, k: usize) -> usize {
    if model.is_markov_chain() {
        k
    } else {
        k + 1
    }
}

/// Limiting root `ρ0`: exactly zero when the limiting walk never gets
/// absorbed, otherwise a float bisection result.
pub fn limiting_root<S: Scalar>(model: &PerturbedSemiMarkovModel<S>, i_ref: usize, tol: f64) -> Result<(S, bool)> {
    let limiting = model.limiting_kernel()?;
    if detect_zero_root(&limiting) {
        return Ok((S::zero(), true));
    }
    let root = solve_characteristic(&limiting.to_float(), i_ref, tol)?;
    let rho = S::from_f64(root.rho).map_err(|_| {
        Error::Backend(format!(
            "limiting root {} is not exactly representable; use the float backend",
            root.rho
        ))
    })?;
    Ok((rho, false))
}

pub fn compute_qsd_expansion<S: Scalar>(model: &PerturbedSemiMarkovModel<S>, k: usize) -> Result<QsdExpansion<S>> {
    compute_qsd_expansion_with(model, k, &ExpansionOptions::default())
}

/// Full pipeline: limiting root, moment series, root shift, occupation at
/// the root, QSD coefficients.
pub fn compute_qsd_expansion_with<S: Scalar>(
    model: &PerturbedSemiMarkovModel<S>,
    k: usize,
    options: &ExpansionOptions,
) -> Result<QsdExpansion<S>> {
    let need = required_model_order(model, k);
    if model.order() < need {
        return Err(Error::InsufficientOrder { have: model.order(), need });
    }
    let i_ref = options.i_ref;
    if i_ref == 0 || i_ref > model.states() {
        return Err(Error::Usage(format!("reference state {i_ref} outside 1..={}", model.states())));
    }
    let validation = validate_conditions(model);
    if !validation.hard_ok() {
        return Err(Error::Conditions(validation.messages.join("; ")));
    }

    let (rho0, zero_limiting_root) = limiting_root(model, i_ref, options.root_tol)?;
    let table = MomentSeriesTable::build(model, &rho0, i_ref, k)?;

    let c = expand_root(&table)?;
    let c_alt = expand_root_by_substitution(&table)?;
    let root_check = c.iter().zip(&c_alt).map(|(x, y)| gap(x, y)).fold((true, 0.0), merge);

    let d = expand_omega_at_root(&table, &c)?;
    let d_alt = expand_omega_at_root_by_substitution(&table, &c)?;
    let omega_check = d
        .iter()
        .zip(&d_alt)
        .flat_map(|(x, y)| x.coeffs().iter().zip(y.coeffs()))
        .map(|(x, y)| gap(x, y))
        .fold((true, 0.0), merge);

    let identity = taylor_substitute(table.b_rows(), &root_shift_series(&c), k)?;
    let characteristic_residual = identity
        .checked_sub(&PowerSeries::one(k))?
        .coeffs()
        .iter()
        .map(|v| v.to_f64().abs())
        .fold(0.0, f64::max);

    let QsdCoefficients { e, pi } = expand_qsd(&d, k)?;

    let normalization_residual = (0..=k)
        .map(|n| {
            let sum = pi.iter().fold(S::zero(), |acc, p| acc + p.coeff(n).clone());
            let target = if n == 0 { S::one() } else { S::zero() };
            (sum - target).to_f64().abs()
        })
        .fold(0.0, f64::max);

    let reference_invariant = if options.check_reference_invariance {
        let mut same = true;
        for other in (1..=model.states()).filter(|&s| s != i_ref) {
            let alt = compute_qsd_expansion_with(
                model,
                k,
                &ExpansionOptions { i_ref: other, check_reference_invariance: false, ..options.clone() },
            )?;
            same &= pi
                .iter()
                .zip(&alt.pi)
                .all(|(x, y)| x.coeffs().iter().zip(y.coeffs()).all(|(a, b)| a.approx_eq(b, ROUTE_TOL)));
        }
        Some(same)
    } else {
        None
    };

    Ok(QsdExpansion {
        k,
        i_ref,
        rho0,
        c,
        d,
        e,
        pi,
        table,
        diagnostics: Diagnostics {
            backend: S::BACKEND,
            zero_limiting_root,
            root_routes_agree: root_check.0,
            root_route_gap: root_check.1,
            omega_routes_agree: omega_check.0,
            omega_route_gap: omega_check.1,
            characteristic_residual,
            normalization_residual,
            reference_invariant,
            validation,
        },
    })
}
