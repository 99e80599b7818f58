//! Exact polynomials in the declared scalar parameters of a system.
//!
//! Every coefficient in the kernel is a [`ParamCoeff`]. Without declared
//! parameters it degenerates to a plain rational number.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Product of parameter powers, stored as `(parameter index, exponent)`
/// pairs sorted by index with nonzero exponents.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct ParamMonomial(Vec<(usize, u32)>);

impl ParamMonomial {
    pub fn one() -> Self {
        ParamMonomial(Vec::new())
    }

    pub fn var(index: usize) -> Self {
        ParamMonomial(vec![(index, 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, index: usize) -> u32 {
        self.0
            .iter()
            .find(|&&(i, _)| i == index)
            .map_or(0, |&(_, e)| e)
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            match (self.0.get(i), other.0.get(j)) {
                (Some(&(a, ea)), Some(&(b, eb))) if a == b => {
                    out.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
                (Some(&(a, ea)), Some(&(b, _))) if a < b => {
                    out.push((a, ea));
                    i += 1;
                }
                (Some(_), Some(&(b, eb))) => {
                    out.push((b, eb));
                    j += 1;
                }
                (Some(&x), None) => {
                    out.push(x);
                    i += 1;
                }
                (None, Some(&x)) => {
                    out.push(x);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        ParamMonomial(out)
    }

    /// `self / other` when `other` divides `self`.
    fn div(&self, other: &Self) -> Option<Self> {
        let mut out = Vec::new();
        let mut j = 0;
        for &(a, ea) in &self.0 {
            let eb = match other.0.get(j) {
                Some(&(b, eb)) if b == a => {
                    j += 1;
                    eb
                }
                Some(&(b, _)) if b < a => return None,
                _ => 0,
            };
            if eb > ea {
                return None;
            }
            if ea > eb {
                out.push((a, ea - eb));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(ParamMonomial(out))
    }

    fn without(&self, index: usize) -> Self {
        ParamMonomial(
            self.0
                .iter()
                .copied()
                .filter(|&(i, _)| i != index)
                .collect(),
        )
    }

    fn gcd(&self, other: &Self) -> Self {
        ParamMonomial(
            self.0
                .iter()
                .filter_map(|&(i, e)| {
                    let f = other.exponent(i);
                    (f > 0).then_some((i, e.min(f)))
                })
                .collect(),
        )
    }
}

/// Lexicographic order: the monomial with the larger exponent at the lowest
/// parameter index is greater.
impl Ord for ParamMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&(a, ea)), Some(&(b, eb))) => match a.cmp(&b) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match ea.cmp(&eb) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        ord => return ord,
                    },
                },
            }
        }
    }
}

impl PartialOrd for ParamMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial over the rationals in the declared parameters.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct ParamCoeff {
    terms: BTreeMap<ParamMonomial, BigRational>,
}

impl ParamCoeff {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_rational(BigRational::one())
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(ParamMonomial::one(), q);
        }
        ParamCoeff { terms }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_frac(n: i64, d: i64) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// The parameter with the given index, as a polynomial.
    pub fn param(index: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(ParamMonomial::var(index), BigRational::one());
        ParamCoeff { terms }
    }

    pub fn from_terms(iter: impl IntoIterator<Item = (ParamMonomial, BigRational)>) -> Self {
        let mut out = ParamCoeff::zero();
        for (m, c) in iter {
            out.add_term(m, c);
        }
        out
    }

    fn add_term(&mut self, m: ParamMonomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
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

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(|q| q.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(ParamMonomial::is_one)
    }

    /// The rational value when the polynomial has no parameter dependence.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(m, _)| m.is_one())
                .map(|(_, c)| c.clone()),
            _ => None,
        }
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&ParamMonomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Leading term under the lexicographic parameter order.
    pub fn leading(&self) -> Option<(&ParamMonomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(ParamMonomial::degree)
            .max()
            .unwrap_or(0)
    }

    pub fn degree_in(&self, index: usize) -> u32 {
        self.terms
            .keys()
            .map(|m| m.exponent(index))
            .max()
            .unwrap_or(0)
    }

    /// Indices of the parameters this polynomial depends on.
    pub fn params(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .terms
            .keys()
            .flat_map(|m| m.0.iter().map(|&(i, _)| i))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return ParamCoeff::zero();
        }
        ParamCoeff {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect(),
        }
    }

    fn mul_term(&self, m: &ParamMonomial, c: &BigRational) -> Self {
        ParamCoeff {
            terms: self.terms.iter().map(|(k, v)| (k.mul(m), v * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = ParamCoeff::one();
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Replaces the parameter `index` by `value` everywhere.
    pub fn substitute(&self, index: usize, value: &ParamCoeff) -> Self {
        if self.degree_in(index) == 0 {
            return self.clone();
        }
        let mut out = ParamCoeff::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(index);
            let rest = ParamCoeff {
                terms: std::iter::once((m.without(index), c.clone())).collect(),
            };
            out += &(&rest * &value.pow(e));
        }
        out
    }

    /// Evaluates at rational parameter values (indexed by parameter).
    pub fn eval(&self, values: &[BigRational]) -> BigRational {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &(i, e) in m.factors() {
                for _ in 0..e {
                    t *= &values[i];
                }
            }
            acc += t;
        }
        acc
    }

    /// Exact quotient `self / divisor`, or `None` when the division leaves a
    /// remainder.
    pub fn div_exact(&self, divisor: &ParamCoeff) -> Option<ParamCoeff> {
        let (lm, lc) = divisor.leading()?;
        if let Some(q) = divisor.as_rational() {
            return Some(self.scale(&q.recip()));
        }
        let mut rem = self.clone();
        let mut quot = ParamCoeff::zero();
        while let Some((m, c)) = rem.leading() {
            let qm = m.div(lm)?;
            let qc = c / lc;
            let step = divisor.mul_term(&qm, &qc);
            quot.add_term(qm, qc);
            rem -= &step;
        }
        Some(quot)
    }

    /// Splits off the rational content so the remaining primitive part has
    /// coprime integer coefficients and a positive leading coefficient.
    pub fn content_and_primitive(&self) -> (BigRational, ParamCoeff) {
        if self.is_zero() {
            return (BigRational::zero(), ParamCoeff::zero());
        }
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut content = BigRational::new(num_gcd, den_lcm);
        if self.leading().is_some_and(|(_, c)| c.is_negative()) {
            content = -content;
        }
        let prim = self.scale(&content.recip());
        (content, prim)
    }

    /// Factors into a rational content, a parameter monomial and a list of
    /// primitive factors with multiplicities.
    ///
    /// Only factors linear in a single parameter with rational roots are
    /// split off; whatever remains is returned as one factor. This is enough
    /// to turn pivots such as `a^2 b - a b` into `a b (a - 1)`.
    pub fn factor(&self) -> Factorization {
        let (content, prim) = self.content_and_primitive();
        let monomial = prim
            .terms
            .keys()
            .cloned()
            .reduce(|a, b| a.gcd(&b))
            .unwrap_or_default();
        let mut rest = prim
            .div_exact(&ParamCoeff {
                terms: std::iter::once((monomial.clone(), BigRational::one())).collect(),
            })
            .unwrap_or(prim);
        let mut factors: Vec<(ParamCoeff, u32)> = Vec::new();
        for p in rest.params() {
            for root in rational_root_candidates(&rest, p) {
                let lin = &ParamCoeff::param(p) - &ParamCoeff::from_rational(root);
                let mut mult = 0;
                while let Some(q) = rest.div_exact(&lin) {
                    if rest.is_constant() {
                        break;
                    }
                    rest = q;
                    mult += 1;
                }
                if mult > 0 {
                    factors.push((lin.content_and_primitive().1, mult));
                }
            }
        }
        let (c2, rest) = rest.content_and_primitive();
        if !rest.is_constant() {
            factors.push((rest, 1));
        }
        factors.sort_by(|a, b| a.0.cmp_display(&b.0));
        Factorization {
            content: content * c2,
            monomial,
            factors,
        }
    }

    /// Solves `self = 0` for a parameter when the polynomial is linear in
    /// that parameter with a constant coefficient. Returns the parameter and
    /// its value.
    pub fn solve_linear(&self) -> Option<(usize, ParamCoeff)> {
        for p in self.params() {
            if self.degree_in(p) != 1 {
                continue;
            }
            let mut coeff = ParamCoeff::zero();
            let mut rest = ParamCoeff::zero();
            for (m, c) in &self.terms {
                if m.exponent(p) == 1 {
                    coeff.add_term(m.without(p), c.clone());
                } else {
                    rest.add_term(m.clone(), c.clone());
                }
            }
            if let Some(a) = coeff.as_rational() {
                return Some((p, (-rest).scale(&a.recip())));
            }
        }
        None
    }

    fn cmp_display(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.terms.iter().rev().cmp(other.terms.iter().rev()))
    }

    /// Renders with the given parameter names, e.g. `2*a*b - 1/3`.
    pub fn render(&self, names: &[String]) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = render_param_monomial(m, names);
            if mono.is_empty() {
                out.push_str(&render_rational(&abs));
            } else if abs.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&render_rational(&abs));
                out.push('*');
                out.push_str(&mono);
            }
        }
        out
    }
}

fn render_param_monomial(m: &ParamMonomial, names: &[String]) -> String {
    m.factors()
        .iter()
        .map(|&(i, e)| {
            let name = names.get(i).map_or_else(|| format!("p{i}"), Clone::clone);
            if e == 1 {
                name
            } else {
                format!("{name}^{e}")
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

/// `p` or `p/q`; never decimals.
pub fn render_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Candidate rational roots `r` with `(p - r) | poly`.
///
/// Writing `poly = Σ_k p^k q_k`, such an `r` must be a root of the
/// univariate polynomial read off any one monomial of the `q_k`; the first
/// monomial that appears with at least two powers of `p` supplies the
/// candidates.
fn rational_root_candidates(poly: &ParamCoeff, p: usize) -> Vec<BigRational> {
    if poly.degree_in(p) == 0 {
        return Vec::new();
    }
    let mut groups: BTreeMap<ParamMonomial, BTreeMap<u32, BigRational>> = BTreeMap::new();
    for (m, c) in &poly.terms {
        groups
            .entry(m.without(p))
            .or_default()
            .insert(m.exponent(p), c.clone());
    }
    let Some(univariate) = groups.values().find(|g| g.len() >= 2) else {
        return Vec::new();
    };
    let (_, l) = univariate.last_key_value().expect("nonempty");
    let (_, t) = univariate.first_key_value().expect("nonempty");
    let (l, t) = (l.clone(), t.clone());
    // Scale to integers.
    let scale = BigRational::from_integer(l.denom().lcm(t.denom()));
    let (l, t) = ((l * &scale).to_integer(), (t * &scale).to_integer());
    let (Some(ld), Some(td)) = (small_divisors(&l), small_divisors(&t)) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for n in &td {
        for d in &ld {
            for s in [1i64, -1] {
                let r = BigRational::new(BigInt::from(s * n), BigInt::from(*d));
                if !out.contains(&r) {
                    out.push(r);
                }
            }
        }
    }
    out.sort();
    out
}

fn small_divisors(n: &BigInt) -> Option<Vec<i64>> {
    let n: i64 = n.abs().try_into().ok()?;
    if n == 0 || n > 1_000_000 {
        return None;
    }
    Some((1..=n).filter(|d| n % d == 0).collect())
}

/// Result of [`ParamCoeff::factor`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    pub content: BigRational,
    pub monomial: ParamMonomial,
    pub factors: Vec<(ParamCoeff, u32)>,
}

impl Ord for ParamCoeff {
    fn cmp(&self, other: &Self) -> Ordering {
        self.terms.iter().cmp(other.terms.iter())
    }
}

impl PartialOrd for ParamCoeff {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ParamCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&[]))
    }
}

impl From<BigRational> for ParamCoeff {
    fn from(q: BigRational) -> Self {
        ParamCoeff::from_rational(q)
    }
}

impl From<i64> for ParamCoeff {
    fn from(n: i64) -> Self {
        ParamCoeff::from_int(n)
    }
}

impl AddAssign<&ParamCoeff> for ParamCoeff {
    fn add_assign(&mut self, rhs: &ParamCoeff) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl SubAssign<&ParamCoeff> for ParamCoeff {
    fn sub_assign(&mut self, rhs: &ParamCoeff) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), -c);
        }
    }
}

impl Add for &ParamCoeff {
    type Output = ParamCoeff;
    fn add(self, rhs: &ParamCoeff) -> ParamCoeff {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &ParamCoeff {
    type Output = ParamCoeff;
    fn sub(self, rhs: &ParamCoeff) -> ParamCoeff {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul for &ParamCoeff {
    type Output = ParamCoeff;
    fn mul(self, rhs: &ParamCoeff) -> ParamCoeff {
        if let Some(q) = rhs.as_rational() {
            return self.scale(&q);
        }
        if let Some(q) = self.as_rational() {
            return rhs.scale(&q);
        }
        let mut out = ParamCoeff::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for ParamCoeff {
    type Output = ParamCoeff;
    fn neg(mut self) -> ParamCoeff {
        for c in self.terms.values_mut() {
            *c = -c.clone();
        }
        self
    }
}

impl Neg for &ParamCoeff {
    type Output = ParamCoeff;
    fn neg(self) -> ParamCoeff {
        -self.clone()
    }
}
