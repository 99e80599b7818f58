//! Polynomial differential-difference systems `u_i' = F_i(shifts of u)`.

use crate::error::Error;
use crate::expr::{LatticePoly, Symbols, VarRef};
use crate::param::ParamCoeff;

/// An N-component evolution system with polynomial right-hand sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DdeSystem {
    symbols: Symbols,
    rhs: Vec<LatticePoly>,
}

impl DdeSystem {
    pub fn new(symbols: Symbols, rhs: Vec<LatticePoly>) -> Result<Self, Error> {
        if rhs.is_empty() || rhs.len() != symbols.components.len() {
            return Err(Error::InvalidSystem(format!(
                "{} components declared but {} right-hand sides given",
                symbols.components.len(),
                rhs.len()
            )));
        }
        for (i, f) in rhs.iter().enumerate() {
            if !f.is_polynomial() {
                return Err(Error::InvalidSystem(format!(
                    "non-polynomial right-hand side for {}",
                    symbols.components[i]
                )));
            }
            if let Some(v) = f.variables().iter().find(|v| v.component >= rhs.len()) {
                return Err(Error::InvalidSystem(format!(
                    "undeclared component index {}",
                    v.component
                )));
            }
        }
        Ok(DdeSystem { symbols, rhs })
    }

    /// The Toda lattice `u' = v[-1] - v[0]`, `v' = v[0]*(u[0] - u[1])`.
    pub fn toda() -> Self {
        let u = |k| LatticePoly::var(VarRef::new(0, k));
        let v = |k| LatticePoly::var(VarRef::new(1, k));
        DdeSystem::new(
            Symbols::new(vec!["u".into(), "v".into()], Vec::new()),
            vec![&v(-1) - &v(0), &v(0) * &(&u(0) - &u(1))],
        )
        .expect("toda is well formed")
    }

    /// `u' = a*v[-1] - v[0]`, `v' = v[0]*(b*u[0] - u[1])` with parameters
    /// `a`, `b`; the Toda lattice at `a = b = 1`.
    pub fn parameterized_toda() -> Self {
        let u = |k| LatticePoly::var(VarRef::new(0, k));
        let v = |k| LatticePoly::var(VarRef::new(1, k));
        let a = ParamCoeff::param(0);
        let b = ParamCoeff::param(1);
        DdeSystem::new(
            Symbols::new(vec!["u".into(), "v".into()], vec!["a".into(), "b".into()]),
            vec![&v(-1).scale(&a) - &v(0), &v(0) * &(&u(0).scale(&b) - &u(1))],
        )
        .expect("parameterized toda is well formed")
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn n_components(&self) -> usize {
        self.rhs.len()
    }

    pub fn n_params(&self) -> usize {
        self.symbols.params.len()
    }

    /// True when no right-hand side coefficient depends on a parameter.
    pub fn is_numeric(&self) -> bool {
        self.rhs
            .iter()
            .all(|f| f.terms().all(|(_, c)| c.is_constant()))
    }

    pub fn rhs(&self, component: usize) -> &LatticePoly {
        &self.rhs[component]
    }

    pub fn flows(&self) -> &[LatticePoly] {
        &self.rhs
    }

    /// The same system with parameter `index` replaced by `value`. The
    /// parameter stays declared so indices remain stable.
    pub fn substitute_param(&self, index: usize, value: &ParamCoeff) -> Self {
        DdeSystem {
            symbols: self.symbols.clone(),
            rhs: self
                .rhs
                .iter()
                .map(|f| f.substitute_param(index, value))
                .collect(),
        }
    }

    /// Renders in the system file grammar.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.symbols.params.is_empty() {
            out.push_str("params: ");
            out.push_str(&self.symbols.params.join(", "));
            out.push('\n');
        }
        for (name, f) in self.symbols.components.iter().zip(&self.rhs) {
            out.push_str(&format!("{name}' = {}\n", f.render(&self.symbols)));
        }
        out
    }
}
