//! Shared generators and brute-force references for the integration tests.
#![allow(dead_code)]

use qsd_core::{ConcreteKernel, PerturbedSemiMarkovModel, PowerSeries, Rational, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random perturbed Markov chain on `1..=n` with polynomial data of degree `k`.
///
/// The limiting chain is a cycle `1 → 2 → … → n → 1` plus a self-loop at 1
/// (so it is irreducible and aperiodic) plus random extra edges, with no
/// absorption. First-order perturbations of the positive entries are
/// non-positive, with at least one strictly negative entry in row 1; the
/// lost mass goes to state 0. Rows without a first-order leak are left
/// unperturbed so that every entry stays in `[0, 1]` for small `ε`.
pub fn random_markov_model(rng: &mut impl Rng, n: usize, k: usize) -> PerturbedSemiMarkovModel<Rational> {
    let rows = random_rows(rng, n, k);
    let entries = rows
        .into_iter()
        .enumerate()
        .flat_map(|(i, row)| row.into_iter().map(move |(j, poly)| (i + 1, j, poly)));
    PerturbedSemiMarkovModel::from_markov_chain(n, k, entries, None).expect("generated model is valid")
}

/// Same construction, with each positive entry split over sojourn times 1 and 2.
/// Carries order `k + 1` as the semi-Markov pipeline requires.
pub fn random_semi_markov_model(rng: &mut impl Rng, n: usize, k: usize) -> PerturbedSemiMarkovModel<Rational> {
    let rows = random_rows(rng, n, k + 1);
    let mut transitions = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        for (j, poly) in row {
            let split = q(rng.gen_range(1..=3), 4);
            let late: Vec<Rational> = poly.iter().map(|c| c * (q(1, 1) - &split)).collect();
            let early: Vec<Rational> = poly.iter().map(|c| c * &split).collect();
            transitions.push(Transition { from: i + 1, to: j, time: 1, poly: early });
            transitions.push(Transition { from: i + 1, to: j, time: 2, poly: late });
        }
    }
    PerturbedSemiMarkovModel::new(n, k + 1, transitions, None).expect("generated model is valid")
}

fn random_rows(rng: &mut impl Rng, n: usize, k: usize) -> Vec<Vec<(usize, Vec<Rational>)>> {
    (1..=n)
        .map(|i| {
            let mut weights = vec![0i64; n + 1];
            weights[i % n + 1] = rng.gen_range(1..=4);
            if i == 1 {
                weights[1] += rng.gen_range(1..=4);
            }
            for w in weights.iter_mut().skip(1) {
                if rng.gen_bool(0.3) {
                    *w += rng.gen_range(1..=3);
                }
            }
            let total: i64 = weights.iter().sum();
            let support: Vec<usize> = (1..=n).filter(|&j| weights[j] > 0).collect();

            let mut polys: Vec<Vec<Rational>> = (0..=n).map(|_| vec![q(0, 1); k + 1]).collect();
            for &j in &support {
                polys[j][0] = q(weights[j], total);
            }
            if k >= 1 {
                for (idx, &j) in support.iter().enumerate() {
                    let forced = i == 1 && idx == 0;
                    let v = if forced || rng.gen_bool(0.5) { -rng.gen_range(1..=3) } else { 0 };
                    polys[j][1] = q(v, 4);
                }
                let leaks = support.iter().any(|&j| polys[j][1] != q(0, 1));
                if leaks {
                    for m in 2..=k {
                        for &j in &support {
                            polys[j][m] = q(rng.gen_range(-2..=2), 8);
                        }
                    }
                }
                for m in 1..=k {
                    let sum: Rational = support.iter().map(|&j| polys[j][m].clone()).sum();
                    polys[0][m] = -sum;
                }
            }
            (0..=n)
                .filter(|&j| polys[j].iter().any(|c| *c != q(0, 1)))
                .map(|j| (j, polys[j].clone()))
                .collect()
        })
        .collect()
}

/// Random float kernel on `1..=n` with sojourn times up to `max_time` and
/// per-row absorption probability at least `min_absorb`.
pub fn random_kernel(rng: &mut impl Rng, n: usize, max_time: usize, min_absorb: f64) -> ConcreteKernel<f64> {
    let mut entries = Vec::new();
    for i in 1..=n {
        let absorb = rng.gen_range(min_absorb..1.0);
        let mut w: Vec<f64> = (0..n * max_time).map(|_| if rng.gen_bool(0.7) { rng.gen::<f64>() } else { 0.0 }).collect();
        if w.iter().all(|v| *v == 0.0) {
            w[0] = 1.0;
        }
        let total: f64 = w.iter().sum();
        entries.push((i, 0, 1, absorb));
        for (idx, v) in w.iter().enumerate() {
            if *v > 0.0 {
                let j = idx / max_time + 1;
                let t = idx % max_time + 1;
                entries.push((i, j, t, (1.0 - absorb) * v / total));
            }
        }
    }
    ConcreteKernel::new(n, entries).expect("generated kernel is valid")
}

/// `g_ij(n)` and `h_ijs(n)` for `n = 0..=horizon` by forward propagation of
/// the chain augmented with `(current, next, remaining sojourn)`, killed on
/// entering `0` or `j`.
pub struct TabooDp {
    /// `g[i - 1][n]`.
    pub g: Vec<Vec<f64>>,
    /// `h[i - 1][s - 1][n]`.
    pub h: Vec<Vec<Vec<f64>>>,
}

pub fn taboo_dp(kernel: &ConcreteKernel<f64>, j: usize, horizon: usize) -> TabooDp {
    let n = kernel.states();
    let tmax = kernel.max_time();
    let idx = |l: usize, s: usize, t: usize| (l * (n + 1) + s) * tmax + (t - 1);
    let enter = |mass: &mut Vec<f64>, l: usize, w: f64| {
        for s in 0..=n {
            for t in 1..=tmax {
                mass[idx(l, s, t)] += w * kernel.q(l, s, t);
            }
        }
    };
    let mut g = vec![vec![0.0; horizon + 1]; n];
    let mut h = vec![vec![vec![0.0; horizon + 1]; n]; n];
    for i in 1..=n {
        let mut mass = vec![0.0; (n + 1) * (n + 1) * tmax];
        enter(&mut mass, i, 1.0);
        for step in 0..=horizon {
            for l in 1..=n {
                let occ: f64 = (0..=n).flat_map(|s| (1..=tmax).map(move |t| (s, t))).map(|(s, t)| mass[idx(l, s, t)]).sum();
                h[i - 1][l - 1][step] = occ;
            }
            let mut next = vec![0.0; mass.len()];
            for l in 1..=n {
                for s in 0..=n {
                    for t in 1..=tmax {
                        let m = mass[idx(l, s, t)];
                        if m == 0.0 {
                            continue;
                        }
                        if t > 1 {
                            next[idx(l, s, t - 1)] += m;
                        } else if s == j {
                            if step + 1 <= horizon {
                                g[i - 1][step + 1] += m;
                            }
                        } else if s != 0 {
                            enter(&mut next, s, m);
                        }
                    }
                }
            }
            mass = next;
        }
    }
    TabooDp { g, h }
}

/// `Σ_n n^r e^{ρn} f(n)`.
pub fn transform(f: &[f64], rho: f64, r: usize) -> f64 {
    f.iter().enumerate().map(|(n, v)| (n as f64).powi(r as i32) * (rho * n as f64).exp() * v).sum()
}

/// Stationary distribution series of a never-absorbed perturbed Markov chain
/// `P(ε) = P_0 + P_1 ε + …`, solved order by order:
/// `π[n] (I - P_0) = Σ_{m>=1} π[n-m] P_m` with `Σ_j π_j[n] = δ_{n0}`.
pub fn stationary_series(model: &PerturbedSemiMarkovModel<Rational>, k: usize) -> Vec<PowerSeries<Rational>> {
    let n = model.states();
    let layer = |m: usize| -> Vec<Vec<Rational>> {
        (1..=n)
            .map(|i| (1..=n).map(|j| model.transition_poly(i, j).resize(k).coeff(m).clone()).collect())
            .collect()
    };
    let layers: Vec<_> = (0..=k).map(layer).collect();
    // Transposed system (I - P_0)^T x = b with the last equation replaced by Σ x = δ.
    let mut pis: Vec<Vec<Rational>> = Vec::new();
    for deg in 0..=k {
        let mut a = vec![vec![q(0, 1); n]; n];
        let mut b = vec![q(0, 1); n];
        for r in 0..n {
            for c in 0..n {
                let id = if r == c { q(1, 1) } else { q(0, 1) };
                a[r][c] = id - layers[0][c][r].clone();
            }
            for m in 1..=deg {
                for l in 0..n {
                    b[r] += pis[deg - m][l].clone() * layers[m][l][r].clone();
                }
            }
        }
        a[n - 1] = vec![q(1, 1); n];
        b[n - 1] = if deg == 0 { q(1, 1) } else { q(0, 1) };
        pis.push(gauss(a, b));
    }
    (0..n).map(|j| PowerSeries::from_coeffs(pis.iter().map(|p| p[j].clone()), k)).collect()
}

fn gauss(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Vec<Rational> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).find(|&r| a[r][col] != q(0, 1)).expect("nonsingular");
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..n {
            if r != col && a[r][col] != q(0, 1) {
                let f = a[r][col].clone() / a[col][col].clone();
                for c in col..n {
                    let d = f.clone() * a[col][c].clone();
                    a[r][c] -= d;
                }
                let d = f * b[col].clone();
                b[r] -= d;
            }
        }
    }
    (0..n).map(|r| b[r].clone() / a[r][r].clone()).collect()
}
