//! Difference operators with nonlocal `(D - I)^{-1}` terms.
//!
//! An [`OpEntry`] is a sum of local terms `f·D^a` and sandwich terms
//! `B·S·C`, where `S = (D - I)^{-1}` and `B`, `C` act by multiplication.
//! Cofactors always sit to the left of shifts: `D^a ∘ f = (D^a f)·D^a`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{
    antidifference, total_time_derivative, Antidifference, LatticeMonomial, LatticePoly, Symbols,
};
use crate::param::ParamCoeff;
use crate::system::DdeSystem;

/// `cofactor·D^shift`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalOpTerm {
    pub cofactor: LatticePoly,
    pub shift: i32,
}

/// `left·(D - I)^{-1}·right`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonlocalOpTerm {
    pub left: LatticePoly,
    pub right: LatticePoly,
}

/// One operator entry in normal form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpEntry {
    local: BTreeMap<i32, LatticePoly>,
    /// Keyed by the right cofactor, normalized to leading coefficient one.
    nonlocal: BTreeMap<LatticePoly, LatticePoly>,
}

impl OpEntry {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::local(LatticePoly::one(), 0)
    }

    /// `D^a`.
    pub fn shift_op(a: i32) -> Self {
        Self::local(LatticePoly::one(), a)
    }

    /// Multiplication by `f`.
    pub fn mul_by(f: LatticePoly) -> Self {
        Self::local(f, 0)
    }

    pub fn local(cofactor: LatticePoly, shift: i32) -> Self {
        let mut out = Self::zero();
        out.add_local(cofactor, shift);
        out
    }

    /// `(D - I)^{-1}`.
    pub fn summation() -> Self {
        Self::sandwich(LatticePoly::one(), LatticePoly::one())
    }

    pub fn sandwich(left: LatticePoly, right: LatticePoly) -> Self {
        let mut out = Self::zero();
        out.add_nonlocal(left, right);
        out
    }

    pub fn add_local(&mut self, cofactor: LatticePoly, shift: i32) {
        if cofactor.is_zero() {
            return;
        }
        let slot = self.local.entry(shift).or_default();
        *slot += &cofactor;
        if slot.is_zero() {
            self.local.remove(&shift);
        }
    }

    pub fn add_nonlocal(&mut self, left: LatticePoly, right: LatticePoly) {
        if left.is_zero() || right.is_zero() {
            return;
        }
        let lead = right.leading().expect("nonzero").1.clone();
        let (left, right) = if lead.is_one() {
            (left, right)
        } else if let Some(q) = lead.as_rational() {
            (left.scale_rational(&q), right.scale_rational(&q.recip()))
        } else {
            (left, right)
        };
        let slot = self.nonlocal.entry(right.clone()).or_default();
        *slot += &left;
        if slot.is_zero() {
            self.nonlocal.remove(&right);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.local.is_empty() && self.nonlocal.is_empty()
    }

    pub fn is_local(&self) -> bool {
        self.nonlocal.is_empty()
    }

    pub fn local_terms(&self) -> impl Iterator<Item = LocalOpTerm> + '_ {
        self.local.iter().map(|(&shift, c)| LocalOpTerm {
            cofactor: c.clone(),
            shift,
        })
    }

    pub fn nonlocal_terms(&self) -> impl Iterator<Item = NonlocalOpTerm> + '_ {
        self.nonlocal.iter().map(|(r, l)| NonlocalOpTerm {
            left: l.clone(),
            right: r.clone(),
        })
    }

    pub fn add(&self, other: &OpEntry) -> OpEntry {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &OpEntry) {
        for t in other.local_terms() {
            self.add_local(t.cofactor, t.shift);
        }
        for t in other.nonlocal_terms() {
            self.add_nonlocal(t.left, t.right);
        }
    }

    pub fn neg(&self) -> OpEntry {
        self.scale(&ParamCoeff::from_int(-1))
    }

    pub fn scale(&self, c: &ParamCoeff) -> OpEntry {
        let mut out = OpEntry::zero();
        for t in self.local_terms() {
            out.add_local(t.cofactor.scale(c), t.shift);
        }
        for t in self.nonlocal_terms() {
            out.add_nonlocal(t.left.scale(c), t.right);
        }
        out
    }

    /// Composition `self ∘ other` in normal form.
    ///
    /// Uses `D^a ∘ f = (D^a f)·D^a`, `D·S = S + I` and `D^{-1}·S = S - D^{-1}`.
    /// Composing two nonlocal terms would nest summations and is rejected.
    pub fn compose(&self, other: &OpEntry) -> Result<OpEntry> {
        let mut out = OpEntry::zero();
        for a in self.local_terms() {
            for b in other.local_terms() {
                out.add_local(&a.cofactor * &b.cofactor.shift(a.shift), a.shift + b.shift);
            }
            for b in other.nonlocal_terms() {
                // f D^a B S C = f (D^a B) D^a S C
                let left = &a.cofactor * &b.left.shift(a.shift);
                out.add_nonlocal(left.clone(), b.right.clone());
                for (i, sign) in shift_through_summation(a.shift) {
                    out.add_local(
                        (&left * &b.right.shift(i)).scale(&ParamCoeff::from_int(sign)),
                        i,
                    );
                }
            }
        }
        for a in self.nonlocal_terms() {
            if !other.nonlocal.is_empty() {
                return Err(Error::Unsupported(
                    "composition of two (D - I)^-1 terms".to_string(),
                ));
            }
            for b in other.local_terms() {
                // B S (C g) D^b = B S D^b h' = B (D^b S) h',  h' = D^{-b}(C g)
                let h = (&a.right * &b.cofactor).shift(-b.shift);
                out.add_nonlocal(a.left.clone(), h.clone());
                for (i, sign) in shift_through_summation(b.shift) {
                    out.add_local(
                        (&a.left * &h.shift(i)).scale(&ParamCoeff::from_int(sign)),
                        i,
                    );
                }
            }
        }
        Ok(out)
    }

    /// Differentiates every cofactor in the direction of the flow `F`,
    /// leaving the operator skeleton fixed.
    pub fn frechet(&self, sys: &DdeSystem) -> OpEntry {
        let mut out = OpEntry::zero();
        for t in self.local_terms() {
            out.add_local(total_time_derivative(&t.cofactor, sys), t.shift);
        }
        for t in self.nonlocal_terms() {
            out.add_nonlocal(total_time_derivative(&t.left, sys), t.right.clone());
            out.add_nonlocal(t.left.clone(), total_time_derivative(&t.right, sys));
        }
        out
    }

    /// Applies the entry to a function.
    ///
    /// Local terms shift and multiply, also across formal `Θ` terms.
    /// Sandwich terms antidifference `C·g`; a non-exact remainder becomes a
    /// formal `Θ` term. Sandwich terms cannot act on an input that already
    /// carries `Θ` terms, nor sum a constant.
    pub fn apply(&self, g: &ExtendedExpr) -> Result<ExtendedExpr> {
        let mut out = ExtendedExpr::zero();
        for t in self.local_terms() {
            out.add_assign(&g.shift(t.shift).mul_poly(&t.cofactor));
        }
        if self.nonlocal.is_empty() {
            return Ok(out);
        }
        if !g.is_local() {
            return Err(Error::Unsupported(
                "(D - I)^-1 applied to an expression with nonlocal terms".to_string(),
            ));
        }
        for t in self.nonlocal_terms() {
            let arg = &t.right * &g.local;
            match antidifference(&arg) {
                Antidifference::Exact(q) => out.local += &(&t.left * &q),
                Antidifference::NotExact { canonical, flux } => {
                    // Summing a constant gives the lattice index itself,
                    // which no shift-covariant Θ term can represent.
                    if !canonical.coeff(&LatticeMonomial::one()).is_zero() {
                        return Err(Error::Unsupported(
                            "(D - I)^-1 applied to a constant".to_string(),
                        ));
                    }
                    out.local += &(&t.left * &flux);
                    for (m, c) in canonical.terms() {
                        out.add_theta(m.clone(), t.left.scale(c));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn apply_poly(&self, g: &LatticePoly) -> Result<ExtendedExpr> {
        self.apply(&ExtendedExpr::local(g.clone()))
    }

    pub fn map_polys(&self, f: impl Fn(&LatticePoly) -> LatticePoly) -> OpEntry {
        let mut out = OpEntry::zero();
        for t in self.local_terms() {
            out.add_local(f(&t.cofactor), t.shift);
        }
        for t in self.nonlocal_terms() {
            out.add_nonlocal(f(&t.left), f(&t.right));
        }
        out
    }

    /// Renders in the operator grammar, e.g.
    /// `D^-1 + I + (v[0] - v[-1])*S*v[0]^-1`.
    pub fn render(&self, symbols: &Symbols) -> String {
        let mut pieces: Vec<(bool, String)> = Vec::new();
        for t in self.local_terms() {
            let op = match t.shift {
                0 => "I".to_string(),
                1 => "D".to_string(),
                a => format!("D^{a}"),
            };
            pieces.push(render_scaled(&t.cofactor, &op, symbols));
        }
        for t in self.nonlocal_terms() {
            let right = if t.right.len() == 1 && t.right.leading().is_some_and(|(_, c)| c.is_one())
            {
                t.right.render(symbols)
            } else {
                format!("({})", t.right.render(symbols))
            };
            pieces.push(render_scaled(&t.left, &format!("S*{right}"), symbols));
        }
        if pieces.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (neg, body)) in pieces.into_iter().enumerate() {
            match (k, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            out.push_str(&body);
        }
        out
    }
}

/// Local corrections when `D^a` moves across `S = (D - I)^{-1}`:
/// `D^a S = S + Σ sign·D^i`.
fn shift_through_summation(a: i32) -> Vec<(i32, i64)> {
    if a > 0 {
        (0..a).map(|i| (i, 1)).collect()
    } else {
        (a..0).map(|i| (i, -1)).collect()
    }
}

fn render_scaled(cofactor: &LatticePoly, op: &str, symbols: &Symbols) -> (bool, String) {
    if cofactor.len() != 1 {
        return (false, format!("({})*{op}", cofactor.render(symbols)));
    }
    if cofactor.as_constant().is_some_and(|c| c.is_one()) {
        return (false, op.to_string());
    }
    if (-cofactor).as_constant().is_some_and(|c| c.is_one()) {
        return (true, op.to_string());
    }
    let body = cofactor.render(symbols);
    match body.strip_prefix('-') {
        Some(rest) => (true, format!("{rest}*{op}")),
        None => (false, format!("{body}*{op}")),
    }
}

/// A lattice polynomial plus formal nonlocal terms `cofactor·Θ(m)`, where
/// `Θ(m) = (D - I)^{-1} m` for a canonical monomial `m` that is not a
/// forward difference.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtendedExpr {
    pub local: LatticePoly,
    theta: BTreeMap<LatticeMonomial, LatticePoly>,
}

impl ExtendedExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn local(p: LatticePoly) -> Self {
        ExtendedExpr {
            local: p,
            theta: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.local.is_zero() && self.theta.is_empty()
    }

    /// True when every nonlocal application was resolved.
    pub fn is_local(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta_terms(&self) -> impl Iterator<Item = (&LatticeMonomial, &LatticePoly)> {
        self.theta.iter()
    }

    pub fn add_theta(&mut self, arg: LatticeMonomial, cofactor: LatticePoly) {
        if cofactor.is_zero() {
            return;
        }
        let slot = self.theta.entry(arg.clone()).or_default();
        *slot += &cofactor;
        if slot.is_zero() {
            self.theta.remove(&arg);
        }
    }

    pub fn add_assign(&mut self, other: &ExtendedExpr) {
        self.local += &other.local;
        for (m, c) in &other.theta {
            self.add_theta(m.clone(), c.clone());
        }
    }

    pub fn sub(&self, other: &ExtendedExpr) -> ExtendedExpr {
        let mut out = self.clone();
        out.add_assign(&other.scale(&ParamCoeff::from_int(-1)));
        out
    }

    pub fn scale(&self, c: &ParamCoeff) -> ExtendedExpr {
        let mut out = ExtendedExpr::local(self.local.scale(c));
        for (m, b) in &self.theta {
            out.add_theta(m.clone(), b.scale(c));
        }
        out
    }

    pub fn mul_poly(&self, f: &LatticePoly) -> ExtendedExpr {
        let mut out = ExtendedExpr::local(&self.local * f);
        for (m, b) in &self.theta {
            out.add_theta(m.clone(), b * f);
        }
        out
    }

    /// `D^a` using `DΘ(p) = Θ(p) + p` and `D^{-1}Θ(p) = Θ(p) - D^{-1}p`.
    pub fn shift(&self, a: i32) -> ExtendedExpr {
        let mut out = ExtendedExpr::local(self.local.shift(a));
        for (m, b) in &self.theta {
            let b = b.shift(a);
            let p = LatticePoly::monomial(m.clone());
            for (i, sign) in shift_through_summation(a) {
                out.local += &(&b * &p.shift(i)).scale(&ParamCoeff::from_int(sign));
            }
            out.add_theta(m.clone(), b);
        }
        out
    }

    pub fn render(&self, symbols: &Symbols) -> String {
        let mut out = self.local.render(symbols);
        for (m, b) in &self.theta {
            out.push_str(&format!(
                " + ({})*T({})",
                b.render(symbols),
                LatticePoly::monomial(m.clone()).render(symbols)
            ));
        }
        out
    }
}

/// N×N matrix of operator entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffOperator {
    entries: Vec<Vec<OpEntry>>,
}

impl DiffOperator {
    pub fn zero(n: usize) -> Self {
        DiffOperator {
            entries: vec![vec![OpEntry::zero(); n]; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zero(n);
        for i in 0..n {
            out.entries[i][i] = OpEntry::identity();
        }
        out
    }

    pub fn from_entries(entries: Vec<Vec<OpEntry>>) -> Result<Self> {
        let n = entries.len();
        if entries.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("operator matrix must be square".into()));
        }
        Ok(DiffOperator { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &OpEntry {
        &self.entries[i][j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut OpEntry {
        &mut self.entries[i][j]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(OpEntry::is_zero)
    }

    pub fn add(&self, other: &DiffOperator) -> DiffOperator {
        let mut out = self.clone();
        for (i, row) in other.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out.entries[i][j].add_assign(e);
            }
        }
        out
    }

    pub fn sub(&self, other: &DiffOperator) -> DiffOperator {
        self.add(&other.scale(&ParamCoeff::from_int(-1)))
    }

    pub fn scale(&self, c: &ParamCoeff) -> DiffOperator {
        DiffOperator {
            entries: self
                .entries
                .iter()
                .map(|r| r.iter().map(|e| e.scale(c)).collect())
                .collect(),
        }
    }

    pub fn compose(&self, other: &DiffOperator) -> Result<DiffOperator> {
        let n = self.dim();
        if other.dim() != n {
            return Err(Error::Dimension("operator sizes differ".into()));
        }
        let mut out = DiffOperator::zero(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = self.entries[i][k].compose(&other.entries[k][j])?;
                    out.entries[i][j].add_assign(&c);
                }
            }
        }
        Ok(out)
    }

    /// Fréchet derivative of the operator in the direction of the flow.
    pub fn frechet(&self, sys: &DdeSystem) -> DiffOperator {
        DiffOperator {
            entries: self
                .entries
                .iter()
                .map(|r| r.iter().map(|e| e.frechet(sys)).collect())
                .collect(),
        }
    }

    pub fn apply(&self, g: &[ExtendedExpr]) -> Result<Vec<ExtendedExpr>> {
        if g.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "operator of size {} applied to vector of length {}",
                self.dim(),
                g.len()
            )));
        }
        let mut out = vec![ExtendedExpr::zero(); g.len()];
        for (i, row) in self.entries.iter().enumerate() {
            for (e, gj) in row.iter().zip(g) {
                if !e.is_zero() {
                    out[i].add_assign(&e.apply(gj)?);
                }
            }
        }
        Ok(out)
    }

    pub fn apply_polys(&self, g: &[LatticePoly]) -> Result<Vec<ExtendedExpr>> {
        let ext: Vec<ExtendedExpr> = g.iter().cloned().map(ExtendedExpr::local).collect();
        self.apply(&ext)
    }

    pub fn map_entries(&self, f: impl Fn(&OpEntry) -> OpEntry) -> DiffOperator {
        DiffOperator {
            entries: self
                .entries
                .iter()
                .map(|r| r.iter().map(&f).collect())
                .collect(),
        }
    }

    /// One `R(i,j) = entry` line per nonzero entry, 1-based indices.
    pub fn render(&self, symbols: &Symbols) -> String {
        let mut out = String::new();
        for (i, row) in self.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out.push_str(&format!("R({},{}) = {}\n", i + 1, j + 1, e.render(symbols)));
            }
        }
        out
    }
}
