//! Laurent polynomials in shifted dependent variables.
//!
//! A [`LatticePoly`] is the universal expression type: densities, fluxes,
//! symmetry components and operator cofactors are all lattice polynomials
//! whose coefficients are [`ParamCoeff`]s.

mod delta;

pub use delta::{antidifference, canonical_rep, delta_decompose, Antidifference, Decomposition};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::param::{render_rational, ParamCoeff};
use crate::system::DdeSystem;

/// The dependent variable `component` at lattice site `n + shift`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct VarRef {
    pub component: usize,
    pub shift: i32,
}

impl VarRef {
    pub fn new(component: usize, shift: i32) -> Self {
        VarRef { component, shift }
    }

    pub fn shifted(self, by: i32) -> Self {
        VarRef {
            component: self.component,
            shift: self.shift + by,
        }
    }
}

/// Component and parameter names used for rendering and parsing.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Symbols {
    pub components: Vec<String>,
    pub params: Vec<String>,
}

impl Symbols {
    pub fn new(components: Vec<String>, params: Vec<String>) -> Self {
        Symbols { components, params }
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c == name)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|c| c == name)
    }

    fn component_name(&self, i: usize) -> String {
        self.components
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("x{i}"))
    }
}

/// Product of shifted variables with nonzero (possibly negative) exponents,
/// sorted by variable. The empty monomial is the constant 1.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct LatticeMonomial(Vec<(VarRef, i32)>);

impl LatticeMonomial {
    pub fn one() -> Self {
        LatticeMonomial(Vec::new())
    }

    pub fn var(v: VarRef) -> Self {
        LatticeMonomial(vec![(v, 1)])
    }

    pub fn from_factors(iter: impl IntoIterator<Item = (VarRef, i32)>) -> Self {
        let mut acc: BTreeMap<VarRef, i32> = BTreeMap::new();
        for (v, e) in iter {
            *acc.entry(v).or_insert(0) += e;
        }
        LatticeMonomial(acc.into_iter().filter(|&(_, e)| e != 0).collect())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(VarRef, i32)] {
        &self.0
    }

    pub fn exponent(&self, v: VarRef) -> i32 {
        self.0
            .binary_search_by(|(w, _)| w.cmp(&v))
            .map_or(0, |i| self.0[i].1)
    }

    pub fn degree(&self) -> i32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_polynomial(&self) -> bool {
        self.0.iter().all(|&(_, e)| e > 0)
    }

    pub fn shift(&self, by: i32) -> Self {
        LatticeMonomial(self.0.iter().map(|&(v, e)| (v.shifted(by), e)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, ea) = self.0[i];
            let (b, eb) = other.0[j];
            match a.cmp(&b) {
                Ordering::Less => {
                    out.push((a, ea));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b, eb));
                    j += 1;
                }
                Ordering::Equal => {
                    if ea + eb != 0 {
                        out.push((a, ea + eb));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        LatticeMonomial(out)
    }

    pub fn inverse(&self) -> Self {
        LatticeMonomial(self.0.iter().map(|&(v, e)| (v, -e)).collect())
    }

    pub fn pow(&self, e: i32) -> Self {
        if e == 0 {
            return LatticeMonomial::one();
        }
        LatticeMonomial(self.0.iter().map(|&(v, k)| (v, k * e)).collect())
    }

    /// Smallest and largest shift of each component present.
    pub fn shift_extents(&self) -> BTreeMap<usize, (i32, i32)> {
        let mut out: BTreeMap<usize, (i32, i32)> = BTreeMap::new();
        for &(v, _) in &self.0 {
            let e = out.entry(v.component).or_insert((v.shift, v.shift));
            e.0 = e.0.min(v.shift);
            e.1 = e.1.max(v.shift);
        }
        out
    }

    pub fn render(&self, symbols: &Symbols) -> String {
        self.0
            .iter()
            .map(|&(v, e)| {
                let base = format!("{}[{}]", symbols.component_name(v.component), v.shift);
                if e == 1 {
                    base
                } else {
                    format!("{base}^{e}")
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

/// Term order: inverse lexicographic. Variables are ranked by
/// (component, shift); two monomials are compared at the highest-ranked
/// variable where their exponents differ, and the smaller exponent sorts
/// first. So `u[0]^3 < u[-1]*v[-1] < u[0]*v[-1] < u[0]*v[0] < u[1]*v[0]`,
/// and the constant monomial precedes every monomial with positive
/// exponents.
impl Ord for LatticeMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let (mut i, mut j) = (self.0.len(), other.0.len());
        loop {
            let a = i.checked_sub(1).map(|k| self.0[k]);
            let b = j.checked_sub(1).map(|k| other.0[k]);
            let (ea, eb, step_i, step_j) = match (a, b) {
                (None, None) => return Ordering::Equal,
                (Some((_, e)), None) => (e, 0, true, false),
                (None, Some((_, e))) => (0, e, false, true),
                (Some((va, ea)), Some((vb, eb))) => match va.cmp(&vb) {
                    Ordering::Greater => (ea, 0, true, false),
                    Ordering::Less => (0, eb, false, true),
                    Ordering::Equal => (ea, eb, true, true),
                },
            };
            match ea.cmp(&eb) {
                Ordering::Equal => {}
                ord => return ord,
            }
            i -= step_i as usize;
            j -= step_j as usize;
        }
    }
}

impl PartialOrd for LatticeMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Finite sum of lattice monomials with nonzero parameter coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct LatticePoly {
    terms: BTreeMap<LatticeMonomial, ParamCoeff>,
}

impl LatticePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(ParamCoeff::one())
    }

    pub fn constant(c: ParamCoeff) -> Self {
        Self::term(LatticeMonomial::one(), c)
    }

    pub fn var(v: VarRef) -> Self {
        Self::monomial(LatticeMonomial::var(v))
    }

    pub fn monomial(m: LatticeMonomial) -> Self {
        Self::term(m, ParamCoeff::one())
    }

    pub fn term(m: LatticeMonomial, c: ParamCoeff) -> Self {
        let mut out = Self::zero();
        out.add_term(m, c);
        out
    }

    pub fn from_terms(iter: impl IntoIterator<Item = (LatticeMonomial, ParamCoeff)>) -> Self {
        let mut out = Self::zero();
        for (m, c) in iter {
            out.add_term(m, c);
        }
        out
    }

    pub fn add_term(&mut self, m: LatticeMonomial, c: ParamCoeff) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += &c;
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&LatticeMonomial, &ParamCoeff)> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = &LatticeMonomial> {
        self.terms.keys()
    }

    pub fn coeff(&self, m: &LatticeMonomial) -> ParamCoeff {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    /// The first term in term order.
    pub fn leading(&self) -> Option<(&LatticeMonomial, &ParamCoeff)> {
        self.terms.iter().next()
    }

    pub fn is_polynomial(&self) -> bool {
        self.terms.keys().all(LatticeMonomial::is_polynomial)
    }

    /// Single monomial with coefficient one, if that is what this is.
    pub fn as_monomial(&self) -> Option<&LatticeMonomial> {
        match self.terms.iter().next() {
            Some((m, c)) if self.terms.len() == 1 && c.is_one() => Some(m),
            _ => None,
        }
    }

    pub fn as_constant(&self) -> Option<ParamCoeff> {
        match self.terms.len() {
            0 => Some(ParamCoeff::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(m, _)| m.is_one())
                .map(|(_, c)| c.clone()),
            _ => None,
        }
    }

    pub fn scale(&self, c: &ParamCoeff) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        LatticePoly {
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn scale_rational(&self, q: &BigRational) -> Self {
        self.scale(&ParamCoeff::from_rational(q.clone()))
    }

    pub fn mul_monomial(&self, m: &LatticeMonomial) -> Self {
        LatticePoly {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.mul(m), v.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Applies `D^r`: every shift offset moves by `r`.
    pub fn shift(&self, r: i32) -> Self {
        if r == 0 {
            return self.clone();
        }
        LatticePoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.shift(r), c.clone()))
                .collect(),
        }
    }

    /// Forward difference `Δp = Dp - p`.
    pub fn delta(&self) -> Self {
        &self.shift(1) - self
    }

    /// Formal partial derivative with respect to one shifted variable.
    pub fn partial(&self, x: VarRef) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(x);
            if e == 0 {
                continue;
            }
            let dm = m.mul(&LatticeMonomial(vec![(x, -1)]));
            out.add_term(dm, c * &ParamCoeff::from_int(e as i64));
        }
        out
    }

    /// All shifted variables occurring in the polynomial.
    pub fn variables(&self) -> Vec<VarRef> {
        let mut vars: Vec<VarRef> = self
            .terms
            .keys()
            .flat_map(|m| m.0.iter().map(|&(v, _)| v))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Smallest and largest shift per component over all terms.
    pub fn shift_extents(&self) -> BTreeMap<usize, (i32, i32)> {
        let mut out: BTreeMap<usize, (i32, i32)> = BTreeMap::new();
        for v in self.variables() {
            let e = out.entry(v.component).or_insert((v.shift, v.shift));
            e.0 = e.0.min(v.shift);
            e.1 = e.1.max(v.shift);
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&ParamCoeff) -> ParamCoeff) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), f(c))))
    }

    pub fn substitute_param(&self, index: usize, value: &ParamCoeff) -> Self {
        self.map_coeffs(|c| c.substitute(index, value))
    }

    /// Renders in the text grammar, e.g. `(1/3)*u[0]^3 + u[0]*v[-1]`.
    pub fn render(&self, symbols: &Symbols) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        // Constants print last, after the term-ordered monomials.
        let ordered = self
            .terms
            .iter()
            .filter(|(m, _)| !m.is_one())
            .chain(self.terms.iter().filter(|(m, _)| m.is_one()));
        let mut out = String::new();
        for (k, (m, c)) in ordered.enumerate() {
            let (neg, body) = render_coeff(c, &symbols.params);
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = m.render(symbols);
            match (body.as_str(), mono.is_empty()) {
                ("1", true) => out.push('1'),
                ("1", false) => out.push_str(&mono),
                (_, true) => out.push_str(&body),
                (_, false) => {
                    out.push_str(&body);
                    out.push('*');
                    out.push_str(&mono);
                }
            }
        }
        out
    }
}

/// Splits a coefficient into a sign and a multiplicative factor string:
/// `1`, `3`, `(1/3)` or `(a - 1)`.
fn render_coeff(c: &ParamCoeff, params: &[String]) -> (bool, String) {
    if let Some(q) = c.as_rational() {
        let neg = q.is_negative();
        let abs = q.abs();
        let body = if abs.is_one() {
            "1".to_string()
        } else if abs.is_integer() {
            render_rational(&abs)
        } else {
            format!("({})", render_rational(&abs))
        };
        return (neg, body);
    }
    if c.num_terms() == 1 {
        let (m, q) = c.terms().next().expect("one term");
        let neg = q.is_negative();
        let single = ParamCoeff::from_terms([(m.clone(), q.abs())]);
        let s = single.render(params);
        if q.abs().is_integer() {
            return (neg, s);
        }
        return (neg, format!("({s})"));
    }
    (false, format!("({})", c.render(params)))
}

/// `Σ_x ∂p/∂x · D^k F_i` over all shifted variables `x = (i, k)` of `p`:
/// the time derivative on solutions of the system.
pub fn total_time_derivative(p: &LatticePoly, sys: &DdeSystem) -> LatticePoly {
    let mut out = LatticePoly::zero();
    for x in p.variables() {
        let flow = sys.rhs(x.component).shift(x.shift);
        out += &(&p.partial(x) * &flow);
    }
    out
}

impl Ord for LatticePoly {
    fn cmp(&self, other: &Self) -> Ordering {
        self.terms.iter().cmp(other.terms.iter())
    }
}

impl PartialOrd for LatticePoly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LatticePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&Symbols::default()))
    }
}

impl AddAssign<&LatticePoly> for LatticePoly {
    fn add_assign(&mut self, rhs: &LatticePoly) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl SubAssign<&LatticePoly> for LatticePoly {
    fn sub_assign(&mut self, rhs: &LatticePoly) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), -c);
        }
    }
}

impl Add for &LatticePoly {
    type Output = LatticePoly;
    fn add(self, rhs: &LatticePoly) -> LatticePoly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &LatticePoly {
    type Output = LatticePoly;
    fn sub(self, rhs: &LatticePoly) -> LatticePoly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul for &LatticePoly {
    type Output = LatticePoly;
    fn mul(self, rhs: &LatticePoly) -> LatticePoly {
        let mut out = LatticePoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &LatticePoly {
    type Output = LatticePoly;
    fn neg(self) -> LatticePoly {
        LatticePoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for LatticePoly {
    type Output = LatticePoly;
    fn neg(self) -> LatticePoly {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::DdeSystem;

    fn u(k: i32) -> LatticePoly {
        LatticePoly::var(VarRef::new(0, k))
    }
    fn v(k: i32) -> LatticePoly {
        LatticePoly::var(VarRef::new(1, k))
    }
    fn c(n: i64) -> LatticePoly {
        LatticePoly::constant(ParamCoeff::from_int(n))
    }

    #[test]
    fn shift_examples() {
        assert_eq!(u(0).shift(1), u(1));
        assert_eq!((&u(-1) * &v(1)).shift(1), &u(0) * &v(2));
        assert_eq!(c(7).shift(-5), c(7));
    }

    #[test]
    fn partial_examples() {
        let u3 = u(0).pow(3);
        assert_eq!(u3.partial(VarRef::new(0, 0)), &c(3) * &u(0).pow(2));
        assert_eq!((&u(0) * &v(-1)).partial(VarRef::new(1, -1)), u(0));
        let inv = LatticePoly::monomial(LatticeMonomial::var(VarRef::new(1, 0)).inverse());
        let expected = -LatticePoly::monomial(LatticeMonomial::var(VarRef::new(1, 0)).pow(-2));
        assert_eq!(inv.partial(VarRef::new(1, 0)), expected);
    }

    #[test]
    fn time_derivative_on_toda() {
        let toda = DdeSystem::toda();
        assert_eq!(
            total_time_derivative(&u(0).pow(2), &toda),
            &(&c(2) * &(&u(0) * &v(-1))) - &(&c(2) * &(&u(0) * &v(0)))
        );
        assert_eq!(
            total_time_derivative(&v(0), &toda),
            &(&u(0) * &v(0)) - &(&u(1) * &v(0))
        );
        assert!(total_time_derivative(&c(5), &toda).is_zero());
    }

    #[test]
    fn term_order_and_render() {
        let toda = DdeSystem::toda();
        let p = &(&LatticePoly::constant(ParamCoeff::from_frac(1, 3)) * &u(0).pow(3))
            + &(&(&u(0) * &v(-1)) + &(&u(0) * &v(0)));
        assert_eq!(
            p.render(toda.symbols()),
            "(1/3)*u[0]^3 + u[0]*v[-1] + u[0]*v[0]"
        );
        let q = &(&v(0) - &c(2)) - &(&u(-1) * &v(0));
        assert_eq!(q.render(toda.symbols()), "v[0] - u[-1]*v[0] - 2");
    }
}
