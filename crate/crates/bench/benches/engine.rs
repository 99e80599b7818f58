use criterion::{criterion_group, criterion_main, Criterion};
use lik_core::conservation::{build_density_candidate, solve_density};
use lik_core::symmetry::{build_symmetry_candidate, solve_symmetry};
use lik_core::{parse_system, solve_recursion, DdeSystem, WeightVector};
use num_rational::BigRational;

const TODA: &str = "u' = v[-1] - v[0]\nv' = v[0]*(u[0] - u[1])\n";
const PARAMETERIZED: &str = "params: a, b\nu' = a*v[-1] - v[0]\nv' = v[0]*(b*u[0] - u[1])\n";

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

fn system(text: &str) -> DdeSystem {
    parse_system(text).unwrap()
}

fn densities(c: &mut Criterion) {
    let sys = system(TODA);
    let w = WeightVector::from_ints(&[1, 2]);
    for rank in [4, 6] {
        c.bench_function(&format!("density rank {rank}"), |b| {
            b.iter(|| {
                let cand = build_density_candidate(&sys, &w, &q(rank)).unwrap();
                solve_density(&cand, &sys, 6)
            })
        });
    }
}

fn symmetries(c: &mut Criterion) {
    let w = WeightVector::from_ints(&[1, 2]);
    for (name, text) in [("toda", TODA), ("parameterized", PARAMETERIZED)] {
        let sys = system(text);
        c.bench_function(&format!("symmetry (3, 4) {name}"), |b| {
            b.iter(|| {
                let cand = build_symmetry_candidate(&sys, &w, &[q(3), q(4)]).unwrap();
                solve_symmetry(&cand, &sys, 6)
            })
        });
    }
}

fn recursion(c: &mut Criterion) {
    let sys = system(TODA);
    let w = WeightVector::from_ints(&[1, 2]);
    let mut group = c.benchmark_group("recursion");
    group.sample_size(10);
    group.bench_function("toda", |b| {
        b.iter(|| solve_recursion(&sys, &w, 3, 1, 6).unwrap())
    });
    group.finish();
}

criterion_group!(benches, densities, symmetries, recursion);
criterion_main!(benches);
