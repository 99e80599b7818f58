//! Shift-equivalence classes and telescoping decomposition.

use super::{LatticeMonomial, LatticePoly};

/// Canonical representative of the shift class of `m` and the shift `r`
/// with `m = D^r canonical`.
///
/// The representative places the lowest-indexed component occurring in `m`
/// at shift zero (its smallest occurring shift becomes zero), so `u[-2]*u[0]`
/// maps to `u[0]*u[2]` and `u[2]*v[0]` maps to `u[0]*v[-2]`. The constant
/// monomial is its own representative.
pub fn canonical_rep(m: &LatticeMonomial) -> (LatticeMonomial, i32) {
    match m.factors().first() {
        None => (m.clone(), 0),
        // Factors are sorted by (component, shift): the first one carries the
        // lowest component at its smallest shift.
        Some(&(v, _)) => (m.shift(-v.shift), v.shift),
    }
}

/// `p = canonical + Δ(flux)` with every monomial of `canonical` its own
/// canonical representative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub canonical: LatticePoly,
    pub flux: LatticePoly,
}

/// Splits `p` into canonical representatives plus a forward difference.
///
/// For `m = D^r m0` with `r > 0`, `m = m0 + Δ(m0 + D m0 + … + D^{r-1} m0)`;
/// for `r < 0`, `m = m0 - Δ(D^r m0 + … + D^{-1} m0)`.
pub fn delta_decompose(p: &LatticePoly) -> Decomposition {
    let mut canonical = LatticePoly::zero();
    let mut flux = LatticePoly::zero();
    for (m, c) in p.terms() {
        let (m0, r) = canonical_rep(m);
        if r > 0 {
            for i in 0..r {
                flux.add_term(m0.shift(i), c.clone());
            }
        } else if r < 0 {
            for i in r..0 {
                flux.add_term(m0.shift(i), -c);
            }
        }
        canonical.add_term(m0, c.clone());
    }
    Decomposition { canonical, flux }
}

/// Outcome of inverting `Δ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Antidifference {
    /// `Δq = p`.
    Exact(LatticePoly),
    /// `p = canonical + Δ(flux)` with a nonzero canonical remainder.
    NotExact {
        canonical: LatticePoly,
        flux: LatticePoly,
    },
}

pub fn antidifference(p: &LatticePoly) -> Antidifference {
    let Decomposition { canonical, flux } = delta_decompose(p);
    if canonical.is_zero() {
        Antidifference::Exact(flux)
    } else {
        Antidifference::NotExact { canonical, flux }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::VarRef;
    use crate::param::ParamCoeff;

    fn u(k: i32) -> LatticePoly {
        LatticePoly::var(VarRef::new(0, k))
    }
    fn v(k: i32) -> LatticePoly {
        LatticePoly::var(VarRef::new(1, k))
    }
    fn mono(p: &LatticePoly) -> LatticeMonomial {
        p.as_monomial().unwrap().clone()
    }

    #[test]
    fn canonical_examples() {
        assert_eq!(
            canonical_rep(&mono(&(&u(-2) * &u(0)))).0,
            mono(&(&u(0) * &u(2)))
        );
        assert_eq!(
            canonical_rep(&mono(&(&u(2) * &v(0)))).0,
            mono(&(&u(0) * &v(-2)))
        );
        assert_eq!(canonical_rep(&mono(&u(0))).0, mono(&u(0)));
        assert_eq!(canonical_rep(&mono(&v(-1))).0, mono(&v(0)));
    }

    #[test]
    fn decompose_shifted_product() {
        let p = &u(-1) * &v(1);
        let d = delta_decompose(&p);
        assert_eq!(d.canonical, &u(0) * &v(2));
        assert_eq!(d.flux, -&p);
    }

    #[test]
    fn decompose_exact_difference() {
        let q = &u(0) * &v(0);
        let d = delta_decompose(&q.delta());
        assert!(d.canonical.is_zero());
        assert_eq!(d.flux, q);
    }

    #[test]
    fn constants_stay_canonical() {
        let p = LatticePoly::constant(ParamCoeff::from_int(4));
        let d = delta_decompose(&p);
        assert_eq!(d.canonical, p);
        assert!(d.flux.is_zero());
    }

    #[test]
    fn antidifference_examples() {
        assert_eq!(
            antidifference(&(&u(1) - &u(0))),
            Antidifference::Exact(u(0))
        );
        match antidifference(&u(0)) {
            Antidifference::NotExact { canonical, flux } => {
                assert_eq!(canonical, u(0));
                assert!(flux.is_zero());
            }
            other => panic!("expected NotExact, got {other:?}"),
        }
        // (1/v) * v * (u[1] - u[0])
        let inv_v = LatticePoly::monomial(mono(&v(0)).inverse());
        let p = &(&inv_v * &v(0)) * &(&u(1) - &u(0));
        match antidifference(&p) {
            Antidifference::Exact(q) => assert_eq!(q.delta(), p),
            other => panic!("expected Exact, got {other:?}"),
        }
    }
}
