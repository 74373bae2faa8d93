//! Mixed power-exponential moment functionals at a fixed `ε`.
//!
//! For a kernel `Q` and exponent `ρ`:
//!
//! * `p_ij(ρ, r)   = Σ_n n^r e^{ρn} Q_ij(n)`
//! * `φ_ij(ρ, r)   = Σ_n n^r e^{ρn} g_ij(n)`, `g_ij(n)` the law of the first
//!   hitting time of `j` on the event that `0` is not hit first
//! * `ω_ijs(ρ, r)  = Σ_n n^r e^{ρn} P_i{ξ(n) = s, μ_0 ∧ μ_j > n}`
//!
//! `φ` and `ω` come from first-step linear systems over the taboo set
//! `{0, j}`. Splitting `(t + m)^r` binomially makes level `r` depend only on
//! levels below it, so every level reuses one factorization of `I - A(ρ)`.
//! Transition times are at least one, so `g_ij(0) = 0` and the `n = 0` term
//! of `φ` never contributes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{factor_subcritical, Lu, Matrix};
use crate::model::ConcreteKernel;
use crate::scalar::{binomial, Scalar};

/// `n^r e^{ρn}` for `n = 0..=max_time`.
fn weights<S: Scalar>(rho: &S, r: usize, max_time: usize) -> Result<Vec<S>> {
    (0..=max_time)
        .map(|n| {
            let tilt = if rho.is_zero() {
                S::one()
            } else {
                (rho.clone() * S::from_usize(n)).exp()?
            };
            Ok(S::from_usize(n).powi(r) * tilt)
        })
        .collect()
}

pub fn moment_p<S: Scalar>(kernel: &ConcreteKernel<S>, rho: &S, r: usize, i: usize, j: usize) -> Result<S> {
    check_state(kernel, i)?;
    let w = weights(rho, r, kernel.max_time())?;
    Ok(p_with_weights(kernel, &w, i, j))
}

fn p_with_weights<S: Scalar>(kernel: &ConcreteKernel<S>, w: &[S], i: usize, j: usize) -> S {
    (1..=kernel.max_time()).fold(S::zero(), |acc, n| acc + w[n].clone() * kernel.q(i, j, n).clone())
}

/// `Σ_{n < max_time} n^r e^{ρn} P_i{κ > n}`: the transform of the time spent
/// in `i` before its first jump.
pub fn sojourn_tail_transform<S: Scalar>(kernel: &ConcreteKernel<S>, rho: &S, r: usize, i: usize) -> Result<S> {
    check_state(kernel, i)?;
    let w = weights(rho, r, kernel.max_time())?;
    Ok(tail_with_weights(kernel, &w, i))
}

fn tail_with_weights<S: Scalar>(kernel: &ConcreteKernel<S>, w: &[S], i: usize) -> S {
    (0..kernel.max_time()).fold(S::zero(), |acc, n| acc + w[n].clone() * kernel.sojourn_tail(i, n))
}

fn check_state<S: Scalar>(kernel: &ConcreteKernel<S>, i: usize) -> Result<()> {
    if i == 0 || i > kernel.states() {
        Err(Error::Usage(alloc::format!("state {i} outside 1..={}", kernel.states())))
    } else {
        Ok(())
    }
}

/// `φ_ij(ρ, r)` for a fixed target `j`, every start `i` and `r <= r_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct HittingTransform<S> {
    pub target: usize,
    pub rho: S,
    /// `values[r][i - 1]`.
    values: Vec<Vec<S>>,
}

impl<S: Scalar> HittingTransform<S> {
    pub fn phi(&self, i: usize, r: usize) -> &S {
        &self.values[r][i - 1]
    }

    pub fn r_max(&self) -> usize {
        self.values.len() - 1
    }

    /// Vector over start states at level `r`.
    pub fn level(&self, r: usize) -> &[S] {
        &self.values[r]
    }
}

/// `ω_ijs(ρ, r)` for a fixed taboo state `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationTransform<S> {
    pub target: usize,
    pub rho: S,
    /// `values[r][i - 1][s - 1]`.
    values: Vec<Vec<Vec<S>>>,
}

impl<S: Scalar> OccupationTransform<S> {
    pub fn omega(&self, i: usize, s: usize, r: usize) -> &S {
        &self.values[r][i - 1][s - 1]
    }

    pub fn r_max(&self) -> usize {
        self.values.len() - 1
    }
}

/// `p_ls(ρ, m)` restricted to states `1..=N`, with column `target` zeroed so
/// that entering `target` ends the walk.
struct TabooLayers<S> {
    /// `layers[m][l - 1][s - 1]`.
    layers: Vec<Matrix<S>>,
    weights: Vec<Vec<S>>,
    lu: Lu<S>,
}

impl<S: Scalar> TabooLayers<S> {
    fn new(kernel: &ConcreteKernel<S>, rho: &S, r_max: usize, target: usize) -> Result<Self> {
        check_state(kernel, target)?;
        let n = kernel.states();
        let weights: Vec<Vec<S>> = (0..=r_max)
            .map(|m| weights(rho, m, kernel.max_time()))
            .collect::<Result<_>>()?;
        let layers: Vec<Matrix<S>> = weights
            .iter()
            .map(|w| {
                (1..=n)
                    .map(|l| {
                        (1..=n)
                            .map(|s| if s == target { S::zero() } else { p_with_weights(kernel, w, l, s) })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let lu = factor_subcritical(&layers[0])?;
        Ok(Self { layers, weights, lu })
    }

    /// Solve level `r` given the source term and the lower levels `lower[m]`
    /// (one column per right-hand side).
    fn solve_level(&self, r: usize, mut rhs: Vec<Vec<S>>, lower: &[Vec<Vec<S>>]) -> Result<Vec<Vec<S>>> {
        let n = rhs.len();
        for m in 1..=r {
            let coef: S = binomial(r, m);
            let a = &self.layers[m];
            let prev = &lower[r - m];
            for l in 0..n {
                for col in 0..rhs[l].len() {
                    let mut acc = S::zero();
                    for s in 0..n {
                        acc = acc + a[l][s].clone() * prev[s][col].clone();
                    }
                    rhs[l][col] = rhs[l][col].clone() + coef.clone() * acc;
                }
            }
        }
        let cols = rhs.first().map_or(0, Vec::len);
        let mut out = vec![Vec::with_capacity(cols); n];
        for col in 0..cols {
            let b: Vec<S> = rhs.iter().map(|row| row[col].clone()).collect();
            let x = self.lu.solve(&b)?;
            for (l, v) in x.into_iter().enumerate() {
                out[l].push(v);
            }
        }
        Ok(out)
    }
}

/// `φ_ij(ρ, r)` for all starts `i` and `r = 0..=r_max`.
pub fn hitting_transform<S: Scalar>(
    kernel: &ConcreteKernel<S>,
    rho: &S,
    r_max: usize,
    j: usize,
) -> Result<HittingTransform<S>> {
    let sys = TabooLayers::new(kernel, rho, r_max, j)?;
    let n = kernel.states();
    let mut levels: Vec<Vec<Vec<S>>> = Vec::with_capacity(r_max + 1);
    for r in 0..=r_max {
        let rhs: Vec<Vec<S>> = (1..=n).map(|l| vec![p_with_weights(kernel, &sys.weights[r], l, j)]).collect();
        let x = sys.solve_level(r, rhs, &levels)?;
        levels.push(x);
    }
    let values = levels
        .into_iter()
        .map(|lvl| lvl.into_iter().map(|mut col| col.remove(0)).collect())
        .collect();
    Ok(HittingTransform { target: j, rho: rho.clone(), values })
}

/// `ω_ijs(ρ, r)` for all starts `i`, occupied states `s` and `r = 0..=r_max`.
pub fn occupation_transform<S: Scalar>(
    kernel: &ConcreteKernel<S>,
    rho: &S,
    r_max: usize,
    j: usize,
) -> Result<OccupationTransform<S>> {
    let sys = TabooLayers::new(kernel, rho, r_max, j)?;
    let n = kernel.states();
    let mut levels: Vec<Vec<Vec<S>>> = Vec::with_capacity(r_max + 1);
    for r in 0..=r_max {
        let rhs: Vec<Vec<S>> = (1..=n)
            .map(|l| {
                (1..=n)
                    .map(|s| if s == l { tail_with_weights(kernel, &sys.weights[r], l) } else { S::zero() })
                    .collect()
            })
            .collect();
        let x = sys.solve_level(r, rhs, &levels)?;
        levels.push(x);
    }
    Ok(OccupationTransform { target: j, rho: rho.clone(), values: levels })
}

/// All moment functionals of a kernel at one `ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable<S> {
    pub rho: S,
    pub r_max: usize,
    states: usize,
    /// `p[r][i - 1][j]`, `j` including the absorbing state.
    p: Vec<Vec<Vec<S>>>,
    /// Indexed by target `j - 1`.
    phi: Vec<HittingTransform<S>>,
    omega: Vec<OccupationTransform<S>>,
}

impl<S: Scalar> MomentTable<S> {
    pub fn compute(kernel: &ConcreteKernel<S>, rho: &S, r_max: usize) -> Result<Self> {
        let n = kernel.states();
        let p = (0..=r_max)
            .map(|r| {
                let w = weights(rho, r, kernel.max_time())?;
                Ok((1..=n)
                    .map(|i| (0..=n).map(|j| p_with_weights(kernel, &w, i, j)).collect())
                    .collect())
            })
            .collect::<Result<_>>()?;
        let phi = (1..=n)
            .map(|j| hitting_transform(kernel, rho, r_max, j))
            .collect::<Result<_>>()?;
        let omega = (1..=n)
            .map(|j| occupation_transform(kernel, rho, r_max, j))
            .collect::<Result<_>>()?;
        Ok(Self { rho: rho.clone(), r_max, states: n, p, phi, omega })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn p(&self, i: usize, j: usize, r: usize) -> &S {
        &self.p[r][i - 1][j]
    }

    pub fn phi(&self, i: usize, j: usize, r: usize) -> &S {
        self.phi[j - 1].phi(i, r)
    }

    pub fn omega(&self, i: usize, j: usize, s: usize, r: usize) -> &S {
        self.omega[j - 1].omega(i, s, r)
    }

    /// Hitting probability `g_ij = φ_ij(0, 0)`; only meaningful when the
    /// table was computed at `ρ = 0`.
    pub fn g(&self, i: usize, j: usize) -> &S {
        self.phi(i, j, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::perturbed_cycle;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn limit() -> ConcreteKernel<Rational> {
        perturbed_cycle::<Rational>().limiting_kernel().unwrap()
    }

    #[test]
    fn p_moments_of_the_example() {
        let k = limit();
        let zero = q(0, 1);
        assert_eq!(moment_p(&k, &zero, 0, 1, 2).unwrap(), q(1, 1));
        assert_eq!(moment_p(&k, &zero, 0, 3, 1).unwrap(), q(1, 2));
        // Markov chains: n = 1 only, so every r gives p_ij.
        assert_eq!(moment_p(&k, &zero, 1, 3, 2).unwrap(), q(1, 2));
        assert_eq!(moment_p(&k, &zero, 3, 3, 2).unwrap(), q(1, 2));
    }

    #[test]
    fn p_moment_single_two_step_sojourn() {
        let k = ConcreteKernel::new(1, [(1, 1, 2, 1.0)]).unwrap();
        let v = moment_p(&k, &core::f64::consts::LN_2, 1, 1, 1).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn rational_rejects_nonzero_rho() {
        let k = limit();
        assert!(matches!(moment_p(&k, &q(1, 10), 0, 1, 2), Err(Error::Backend(_))));
        assert!(matches!(hitting_transform(&k, &q(1, 10), 0, 1), Err(Error::Backend(_))));
    }

    #[test]
    fn sojourn_tail_markov_and_two_step() {
        let k = limit();
        assert_eq!(sojourn_tail_transform(&k, &q(0, 1), 0, 2).unwrap(), q(1, 1));
        assert_eq!(sojourn_tail_transform(&k, &q(0, 1), 1, 2).unwrap(), q(0, 1));
        let kf = limit().to_float();
        assert_eq!(sojourn_tail_transform(&kf, &0.3, 0, 1).unwrap(), 1.0);
        let two = ConcreteKernel::new(2, [(1, 2, 2, q(1, 1)), (2, 1, 2, q(1, 1))]).unwrap();
        assert_eq!(sojourn_tail_transform(&two, &q(0, 1), 0, 1).unwrap(), q(2, 1));
    }

    #[test]
    fn hitting_vectors_of_the_example() {
        let h = hitting_transform(&limit(), &q(0, 1), 2, 1).unwrap();
        assert_eq!(h.level(0), &[q(1, 1), q(1, 1), q(1, 1)]);
        assert_eq!(h.level(1), &[q(5, 1), q(4, 1), q(3, 1)]);
        assert_eq!(h.level(2), &[q(33, 1), q(24, 1), q(17, 1)]);
    }

    #[test]
    fn occupation_rows_of_the_example() {
        let o = occupation_transform(&limit(), &q(0, 1), 2, 1).unwrap();
        let row = |r| (1..=3).map(|s| o.omega(1, s, r).clone()).collect::<Vec<_>>();
        assert_eq!(row(0), vec![q(1, 1), q(2, 1), q(2, 1)]);
        assert_eq!(row(1), vec![q(0, 1), q(6, 1), q(8, 1)]);
        assert_eq!(row(2), vec![q(0, 1), q(34, 1), q(48, 1)]);
    }

    #[test]
    fn occupation_of_unreachable_state_is_zero() {
        // From 1 the walk goes to 2 and then back to 1; state 3 is only entered from itself.
        let k = ConcreteKernel::new(
            3,
            [
                (1, 2, 1, q(1, 1)),
                (2, 1, 1, q(1, 1)),
                (3, 3, 1, q(1, 2)),
                (3, 1, 1, q(1, 2)),
            ],
        )
        .unwrap();
        let o = occupation_transform(&k, &q(0, 1), 1, 1).unwrap();
        assert_eq!(*o.omega(1, 3, 0), q(0, 1));
        assert_eq!(*o.omega(1, 3, 1), q(0, 1));
        assert_eq!(*o.omega(1, 2, 0), q(1, 1));
    }

    #[test]
    fn supercritical_rho_is_reported() {
        let k = limit().to_float();
        // Taboo {0, 1}: the loop 2 -> 3 -> 2 has mass 1/2 per two steps, so
        // e^{2ρ}/2 >= 1 once ρ >= ln(2)/2.
        assert!(hitting_transform(&k, &0.3, 0, 1).is_ok());
        assert_eq!(hitting_transform(&k, &0.4, 0, 1).unwrap_err(), Error::Supercritical);
    }

    #[test]
    fn table_hitting_probabilities() {
        let t = MomentTable::compute(&limit(), &q(0, 1), 1).unwrap();
        for i in 1..=3 {
            for j in 1..=3 {
                assert_eq!(*t.g(i, j), q(1, 1));
            }
        }
        assert_eq!(*t.p(3, 0, 0), q(0, 1));
        assert_eq!(*t.omega(1, 1, 2, 1), q(6, 1));
    }
}
