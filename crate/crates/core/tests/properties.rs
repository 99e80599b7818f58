//! Randomized identities checked against independent oracles.

use lik_core::expr::{LatticeMonomial, LatticePoly, VarRef};
use lik_core::param::{ParamCoeff, ParamMonomial};
use lik_core::recursion::{ExtendedExpr, OpEntry};
use lik_core::symmetry::frechet_apply;
use lik_core::{canonical_rep, delta_decompose, total_time_derivative, DdeSystem};
use proptest::prelude::*;
use proptest::test_runner::Config;

fn config(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

fn coeff() -> impl Strategy<Value = ParamCoeff> {
    (-6i64..=6, 1i64..=4)
        .prop_filter("nonzero", |(n, _)| *n != 0)
        .prop_map(|(n, d)| ParamCoeff::from_frac(n, d))
}

fn monomial(min_exp: i32) -> impl Strategy<Value = LatticeMonomial> {
    prop::collection::vec((0usize..2, -3i32..=3, min_exp..=3), 0..=3).prop_map(|fs| {
        LatticeMonomial::from_factors(
            fs.into_iter()
                .filter(|(_, _, e)| *e != 0)
                .map(|(c, s, e)| (VarRef::new(c, s), e)),
        )
    })
}

fn poly_with(min_exp: i32, max_terms: usize) -> impl Strategy<Value = LatticePoly> {
    prop::collection::vec((monomial(min_exp), coeff()), 0..=max_terms)
        .prop_map(LatticePoly::from_terms)
}

/// Laurent polynomial, shifts -3..3, exponents -3..3.
fn laurent() -> impl Strategy<Value = LatticePoly> {
    poly_with(-3, 6)
}

fn polynomial() -> impl Strategy<Value = LatticePoly> {
    poly_with(1, 4)
}

/// No constant term, so a summation argument built from it never has one.
fn nonconstant() -> impl Strategy<Value = LatticePoly> {
    polynomial().prop_map(|p| {
        LatticePoly::from_terms(
            p.terms()
                .filter(|(m, _)| !m.is_one())
                .map(|(m, c)| (m.clone(), c.clone())),
        )
    })
}

fn entry(nonlocal: bool) -> impl Strategy<Value = OpEntry> {
    (
        prop::collection::vec((polynomial(), -2i32..=2), 1..=3),
        polynomial(),
        nonconstant(),
    )
        .prop_map(move |(locals, left, right)| {
            let mut e = OpEntry::zero();
            for (c, a) in locals {
                e.add_local(c, a);
            }
            if nonlocal {
                e.add_nonlocal(left, right);
            }
            e
        })
}

/// `F(u + εG)` expanded with `ε` carried as a coefficient parameter; the
/// part linear in `ε` is the directional derivative.
fn epsilon_derivative(f: &LatticePoly, g: &[LatticePoly]) -> LatticePoly {
    let eps = ParamCoeff::param(0);
    let mut total = LatticePoly::zero();
    for (m, c) in f.terms() {
        let mut prod = LatticePoly::constant(c.clone());
        for &(v, e) in m.factors() {
            let perturbed = &LatticePoly::var(v) + &g[v.component].shift(v.shift).scale(&eps);
            prod = &prod * &perturbed.pow(e as u32);
        }
        total += &prod;
    }
    total.map_coeffs(|c| {
        ParamCoeff::from_terms(
            c.terms()
                .filter(|(pm, _)| **pm == ParamMonomial::var(0))
                .map(|(_, q)| (ParamMonomial::one(), q.clone())),
        )
    })
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn delta_round_trip(p in laurent()) {
        let dec = delta_decompose(&p);
        prop_assert_eq!(&dec.canonical + &dec.flux.delta(), p);
        for m in dec.canonical.monomials() {
            prop_assert_eq!(canonical_rep(m).1, 0);
        }
        let again = delta_decompose(&dec.canonical);
        prop_assert_eq!(again.canonical, dec.canonical);
        prop_assert!(again.flux.is_zero());
    }

    #[test]
    fn shift_is_a_ring_morphism(p in laurent(), q in laurent(), r in -3i32..=3) {
        prop_assert_eq!((&p * &q).shift(r), &p.shift(r) * &q.shift(r));
        prop_assert_eq!((&p + &q).shift(r), &p.shift(r) + &q.shift(r));
        prop_assert_eq!(p.shift(r).shift(-r), p);
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn frechet_matches_epsilon_expansion(
        f in prop::collection::vec(polynomial(), 2),
        g in prop::collection::vec(polynomial(), 2),
    ) {
        let direct = frechet_apply(&f, &g);
        for (fi, di) in f.iter().zip(&direct) {
            prop_assert_eq!(&epsilon_derivative(fi, &g), di);
        }
    }

    #[test]
    fn compose_agrees_with_successive_application(
        kind in 0u8..3,
        a0 in entry(false),
        a1 in entry(true),
        b0 in entry(false),
        b1 in entry(true),
        g in nonconstant(),
    ) {
        let (a, b) = match kind {
            0 => (a0, b0),
            1 => (a1, b0),
            _ => (a0, b1),
        };
        let composed = a.compose(&b).unwrap();
        let g = ExtendedExpr::local(g);
        let lhs = composed.apply(&g).unwrap();
        let rhs = a.apply(&b.apply(&g).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn time_derivative_is_a_derivation_commuting_with_shifts(
        p in laurent(),
        q in laurent(),
        r in -3i32..=3,
    ) {
        let toda = DdeSystem::toda();
        let dt = |x: &LatticePoly| total_time_derivative(x, &toda);
        prop_assert_eq!(dt(&(&p * &q)), &(&dt(&p) * &q) + &(&p * &dt(&q)));
        prop_assert_eq!(dt(&p.shift(r)), dt(&p).shift(r));
    }
}
