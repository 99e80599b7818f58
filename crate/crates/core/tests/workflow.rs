use lik_core::conservation::{build_density_candidate, conservation_residual, solve_density};
use lik_core::symmetry::symmetry_levels;
use lik_core::{
    compute_weights, parse_operator_file, parse_poly, parse_system, solve_recursion,
    verify_recursion, WeightOutcome, WeightVector,
};
use num_rational::BigRational;

const TODA: &str = "u' = v[-1] - v[0]\nv' = v[0]*(u[0] - u[1])\n";
const PARAMETERIZED: &str = "params: a, b\nu' = a*v[-1] - v[0]\nv' = v[0]*(b*u[0] - u[1])\n";

#[test]
fn system_render_round_trips() {
    for text in [TODA, PARAMETERIZED] {
        let sys = parse_system(text).unwrap();
        assert_eq!(parse_system(&sys.render()).unwrap(), sys);
    }
}

#[test]
fn poly_render_round_trips() {
    let sys = parse_system(PARAMETERIZED).unwrap();
    let s = sys.symbols();
    for text in [
        "(1/4)*u[0]^4 - 3",
        "a*b*u[-2]*v[3]^2 + (a - 1)*v[0]",
        "0",
        "-u[0]^-2*v[1]",
    ] {
        let p = parse_poly(text, s).unwrap();
        assert_eq!(parse_poly(&p.render(s), s).unwrap(), p, "{text}");
    }
}

#[test]
fn weights_then_densities() {
    let sys = parse_system(TODA).unwrap();
    let w = match compute_weights(&sys, &[]) {
        WeightOutcome::Unique(w) => w,
        other => panic!("{other:?}"),
    };
    assert_eq!(w, WeightVector::from_ints(&[1, 2]));
    let mut found = 0;
    for rank in 1..=5 {
        let cand =
            build_density_candidate(&sys, &w, &BigRational::from_integer(rank.into())).unwrap();
        for d in solve_density(&cand, &sys, 6).results {
            assert!(conservation_residual(&sys, &d.rho, &d.flux).is_zero());
            found += 1;
        }
    }
    assert_eq!(found, 5);
}

#[test]
fn operator_render_round_trips_and_verifies() {
    let sys = parse_system(TODA).unwrap();
    let w = WeightVector::from_ints(&[1, 2]);
    let sol = solve_recursion(&sys, &w, 3, 1, 6).unwrap().unwrap();
    let text = sol.operator.render(sys.symbols());
    let parsed = parse_operator_file(&text, sys.symbols()).unwrap();
    assert_eq!(parsed.render(sys.symbols()), text);
    let syms: Vec<_> = symmetry_levels(&sys, &w, 2, 6)
        .unwrap()
        .into_iter()
        .map(Option::unwrap)
        .collect();
    let report = verify_recursion(&sys, &parsed, &syms, 1, 3).unwrap();
    assert!(report.passed());
}
