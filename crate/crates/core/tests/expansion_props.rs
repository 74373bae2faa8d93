mod common;

use common::{q, random_markov_model, random_semi_markov_model, rng, stationary_series};
use qsd_core::example::{perturbed_cycle, reproduce_with_model, transition_table};
use qsd_core::expand::{
    expand_omega_at_root, expand_omega_at_root_by_substitution, expand_root, expand_root_by_substitution,
    root_shift_series, MomentSeriesTable,
};
use qsd_core::{
    compute_qsd_expansion, compute_qsd_expansion_with, taylor_substitute, ConcreteKernel, Error, ExpansionOptions,
    PerturbedSemiMarkovModel, PowerSeries, Rational, Transition,
};
use rand::Rng;

fn assert_identities(model: &PerturbedSemiMarkovModel<Rational>, k: usize, label: &str) {
    let x = compute_qsd_expansion(model, k).unwrap_or_else(|e| panic!("{label}: {e}"));
    let diag = &x.diagnostics;
    assert!(diag.root_routes_agree && diag.omega_routes_agree, "{label}");
    assert_eq!(diag.characteristic_residual, 0.0, "{label}");
    assert_eq!(diag.normalization_residual, 0.0, "{label}");
    assert_eq!(diag.reference_invariant, Some(true), "{label}");
    for n in 0..=k {
        let sum: Rational = x.pi.iter().map(|p| p.coeff(n).clone()).sum();
        assert_eq!(sum, if n == 0 { q(1, 1) } else { q(0, 1) }, "{label}: Σπ[{n}]");
    }
    for (d, p) in x.d.iter().zip(&x.pi) {
        assert_eq!(x.e.checked_mul(p).unwrap(), *d, "{label}: e·π = d");
    }
    for j in 1..=model.states() {
        let alt = compute_qsd_expansion_with(
            model,
            k,
            &ExpansionOptions { i_ref: j, check_reference_invariance: false, ..Default::default() },
        )
        .unwrap();
        assert_eq!(alt.pi, x.pi, "{label}: i_ref = {j}");
    }
}

#[test]
fn random_markov_models_satisfy_identities() {
    let mut r = rng(7);
    for case in 0..30 {
        let n = r.gen_range(2..=4);
        let k = r.gen_range(1..=3);
        let model = random_markov_model(&mut r, n, k);
        assert_identities(&model, k, &format!("markov case {case} (N={n}, k={k})"));
    }
}

#[test]
fn random_semi_markov_models_satisfy_identities() {
    let mut r = rng(11);
    for case in 0..10 {
        let n = r.gen_range(2..=3);
        let k = r.gen_range(1..=2);
        let model = random_semi_markov_model(&mut r, n, k);
        assert_identities(&model, k, &format!("semi-markov case {case} (N={n}, k={k})"));
    }
}

#[test]
fn both_routes_agree_on_hand_made_tables() {
    // b rows with a nontrivial third order, a single occupation row.
    let s = |c: &[(i64, i64)]| PowerSeries::new(c.iter().map(|&(n, d)| q(n, d)).collect()).unwrap();
    let b = vec![
        s(&[(1, 1), (-2, 1), (3, 2), (-1, 3)]),
        s(&[(4, 1), (-1, 1), (2, 1)]),
        s(&[(7, 1), (1, 2)]),
        s(&[(-3, 1)]),
    ];
    let a = vec![vec![s(&[(2, 1), (1, 1), (0, 1), (5, 1)]), s(&[(1, 1), (-3, 1), (1, 1)]), s(&[(2, 1), (2, 1)]), s(&[(9, 1)])]];
    let t = MomentSeriesTable::from_rows(q(0, 1), 1, 3, b.clone(), a).unwrap();
    let c = expand_root(&t).unwrap();
    assert_eq!(c, expand_root_by_substitution(&t).unwrap());
    assert_eq!(expand_omega_at_root(&t, &c).unwrap(), expand_omega_at_root_by_substitution(&t, &c).unwrap());
    let identity = taylor_substitute(&b, &root_shift_series(&c), 3).unwrap();
    assert_eq!(identity, PowerSeries::one(3));
}

#[test]
fn never_absorbed_family_gives_stationary_expansion() {
    let mut r = rng(3);
    for case in 0..10 {
        let n = r.gen_range(2..=4);
        let k = r.gen_range(1..=3);
        // Random chain with every leak folded back onto the cycle successor.
        let base = random_markov_model(&mut r, n, k);
        let mut entries = Vec::new();
        for i in 1..=n {
            let succ = i % n + 1;
            for j in 1..=n {
                let mut p = base.transition_poly(i, j).resize(k);
                if j == succ {
                    p = p.checked_add(&base.transition_poly(i, 0).resize(k)).unwrap();
                }
                if !p.is_zero() {
                    entries.push((i, j, p.into_coeffs()));
                }
            }
        }
        let model = PerturbedSemiMarkovModel::from_markov_chain(n, k, entries, None).unwrap();
        let x = compute_qsd_expansion(&model, k).unwrap();
        assert_eq!(x.c, vec![q(0, 1); k], "case {case}");
        assert_eq!(x.pi, stationary_series(&model, k), "case {case}");
    }
}

#[test]
fn markov_shorthand_commutes_with_evaluation() {
    let shorthand = perturbed_cycle::<Rational>();
    let explicit = PerturbedSemiMarkovModel::new(
        3,
        2,
        transition_table().into_iter().map(|(from, to, poly)| Transition { from, to, time: 1, poly }),
        None,
    )
    .unwrap();
    assert_eq!(shorthand, explicit);
    for eps in [q(0, 1), q(1, 10), q(1, 3), q(1, 2)] {
        let evaluated = ConcreteKernel::new(
            3,
            transition_table().into_iter().map(|(i, j, poly)| {
                (i, j, 1, PowerSeries::new(poly).unwrap().evaluate(&eps))
            }),
        )
        .unwrap();
        let via_model = shorthand.evaluate_at(&eps).unwrap();
        for i in 1..=3 {
            for j in 0..=3 {
                assert_eq!(via_model.q(i, j, 1), evaluated.q(i, j, 1), "Q_{i}{j} at {eps}");
            }
        }
    }
}

fn with_p12_linear(p12_1: (i64, i64), p10_1: (i64, i64)) -> Result<PerturbedSemiMarkovModel<Rational>, Error> {
    let entries = transition_table().into_iter().map(|(i, j, mut poly)| {
        match (i, j) {
            (1, 2) => poly[1] = q(p12_1.0, p12_1.1),
            (1, 0) => poly[1] = q(p10_1.0, p10_1.1),
            _ => {}
        }
        (i, j, poly)
    });
    PerturbedSemiMarkovModel::from_markov_chain(3, 2, entries, None)
}

#[test]
fn injected_fault_fails_p_and_downstream_tables() {
    // Flipping the sign of p_12[1] alone breaks the row sums, so it never reaches the pipeline.
    assert!(matches!(with_p12_linear((1, 1), (1, 1)), Err(Error::Model(_))));

    let model = with_p12_linear((-2, 1), (2, 1)).unwrap();
    let report = reproduce_with_model(&model);
    let failed: Vec<&str> = report.tables.iter().filter(|t| !t.passed()).map(|t| t.name).collect();
    assert_eq!(failed, ["p", "phi", "b", "a", "c", "d", "e", "pi"]);
}

#[test]
fn semi_markov_needs_one_more_order() {
    let mut r = rng(5);
    let model = random_semi_markov_model(&mut r, 2, 1);
    assert!(compute_qsd_expansion(&model, 1).is_ok());
    assert_eq!(compute_qsd_expansion(&model, 2).unwrap_err(), Error::InsufficientOrder { have: 2, need: 3 });
}

#[test]
fn float_backend_tracks_rational() {
    let mut r = rng(19);
    for _ in 0..5 {
        let model = random_markov_model(&mut r, 3, 2);
        let exact = compute_qsd_expansion(&model, 2).unwrap();
        let float = compute_qsd_expansion(&model.to_float(), 2).unwrap();
        for (a, b) in exact.pi.iter().zip(&float.pi) {
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert!((qsd_core::Scalar::to_f64(x) - y).abs() < 1e-10);
            }
        }
        assert!(float.diagnostics.normalization_residual < 1e-12);
    }
}

#[test]
fn absorbing_limit_needs_float_backend() {
    // Limiting chain leaks from state 2, so the limiting root is positive.
    let m = |n: i64, d: i64| q(n, d);
    let entries = [
        (1, 1, vec![m(1, 2), m(-1, 4)]),
        (1, 2, vec![m(1, 2), m(0, 1)]),
        (1, 0, vec![m(0, 1), m(1, 4)]),
        (2, 1, vec![m(3, 4), m(0, 1)]),
        (2, 0, vec![m(1, 4), m(0, 1)]),
    ];
    let exact = PerturbedSemiMarkovModel::from_markov_chain(2, 1, entries.clone(), None).unwrap();
    assert!(matches!(compute_qsd_expansion(&exact, 1), Err(Error::Backend(_))));

    let x = compute_qsd_expansion(&exact.to_float(), 1).unwrap();
    assert!(x.rho0 > 0.0 && !x.diagnostics.zero_limiting_root);
    assert!(x.diagnostics.root_routes_agree && x.diagnostics.omega_routes_agree);
    assert_eq!(x.diagnostics.reference_invariant, Some(true));
    assert!(x.diagnostics.normalization_residual < 1e-12);

    // First-order term against a finite difference of the fixed-ε QSD.
    let h = 1e-5;
    let at = |eps: f64| {
        qsd_core::qsd_direct(&exact.to_float().evaluate_at(&eps).unwrap(), 1e-15).unwrap().pi
    };
    let (p0, p1) = (at(0.0), at(h));
    for j in 0..2 {
        assert!((p0[j] - x.pi[j].coeff(0)).abs() < 1e-12);
        assert!(((p1[j] - p0[j]) / h - x.pi[j].coeff(1)).abs() < 1e-4);
    }
}
