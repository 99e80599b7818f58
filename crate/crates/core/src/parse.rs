//! Text grammar for systems, expressions and operators.
//!
//! ```text
//! params: a, b              # optional
//! u' = a*v[-1] - v[0]
//! v' = v[0]*(b*u[0] - u[1])
//! ```
//!
//! Expressions use `name[k]` for shifted variables, `^` for integer powers
//! and exact integer or `p/q` literals. Operator entries add `I`, `D`,
//! `D^k` and `S = (D - I)^-1`, composed with `*`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::expr::{LatticeMonomial, LatticePoly, Symbols, VarRef};
use crate::param::ParamCoeff;
use crate::recursion::{DiffOperator, OpEntry};
use crate::system::DdeSystem;

const RESERVED: [&str; 3] = ["I", "D", "S"];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    col: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str, line: usize, col0: usize) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Spanned { tok, col });
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                return Err(err(
                    line,
                    col0 + i,
                    "decimal literals are not allowed; use p/q",
                ));
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Spanned {
                tok: Tok::Num(s.parse().expect("digits")),
                col,
            });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                col,
            });
        } else {
            return Err(err(line, col, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
enum Ast {
    Num(BigInt),
    Var { name: String, shift: i32 },
    Ident(String),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
}

#[derive(Clone, Debug)]
struct Node {
    ast: Ast,
    col: usize,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl Parser {
    fn new(text: &str, line: usize, col0: usize) -> Result<Self> {
        Ok(Parser {
            toks: tokenize(text, line, col0)?,
            pos: 0,
            line,
            end_col: col0 + text.chars().count(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |s| s.col)
    }

    fn bump(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        let col = self.col();
        match self.bump() {
            Some(s) if s.tok == tok => Ok(()),
            _ => Err(err(self.line, col, format!("expected {what}"))),
        }
    }

    fn parse_all(mut self) -> Result<Node> {
        let node = self.expr()?;
        if self.pos < self.toks.len() {
            return Err(err(self.line, self.col(), "unexpected trailing input"));
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let col = self.col();
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Node {
                        ast: Ast::Add(Box::new(lhs), Box::new(rhs)),
                        col,
                    };
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Node {
                        ast: Ast::Sub(Box::new(lhs), Box::new(rhs)),
                        col,
                    };
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let col = self.col();
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Node {
                        ast: Ast::Mul(Box::new(lhs), Box::new(rhs)),
                        col,
                    };
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Node {
                        ast: Ast::Div(Box::new(lhs), Box::new(rhs)),
                        col,
                    };
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        let col = self.col();
        if self.peek() == Some(&Tok::Minus) {
            self.bump();
            let inner = self.unary()?;
            return Ok(Node {
                ast: Ast::Neg(Box::new(inner)),
                col,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        let col = self.col();
        self.bump();
        let e = self.signed_int("integer exponent")?;
        Ok(Node {
            ast: Ast::Pow(Box::new(base), e),
            col,
        })
    }

    fn signed_int(&mut self, what: &str) -> Result<i32> {
        let col = self.col();
        let neg = match self.peek() {
            Some(Tok::Minus) => {
                self.bump();
                true
            }
            Some(Tok::Plus) => {
                self.bump();
                false
            }
            _ => false,
        };
        match self.bump() {
            Some(Spanned {
                tok: Tok::Num(n), ..
            }) => {
                let v: i32 = n
                    .try_into()
                    .map_err(|_| err(self.line, col, format!("{what} out of range")))?;
                Ok(if neg { -v } else { v })
            }
            _ => Err(err(self.line, col, format!("expected {what}"))),
        }
    }

    fn primary(&mut self) -> Result<Node> {
        let col = self.col();
        match self.bump().map(|s| s.tok) {
            Some(Tok::Num(n)) => Ok(Node {
                ast: Ast::Num(n),
                col,
            }),
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LBracket) {
                    self.bump();
                    let shift = self.signed_int("integer shift")?;
                    self.expect(Tok::RBracket, "']'")?;
                    Ok(Node {
                        ast: Ast::Var { name, shift },
                        col,
                    })
                } else {
                    Ok(Node {
                        ast: Ast::Ident(name),
                        col,
                    })
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            _ => Err(err(self.line, col, "expected a number, variable or '('")),
        }
    }
}

/// How division and negative powers are treated when evaluating to a
/// lattice polynomial.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Division {
    /// Only by nonzero rational constants.
    ConstantsOnly,
    /// Also by single monomials (Laurent terms such as `1/v[0]`).
    Monomials,
}

struct Evaluator<'a> {
    symbols: &'a Symbols,
    line: usize,
    division: Division,
}

impl Evaluator<'_> {
    fn poly(&self, node: &Node) -> Result<LatticePoly> {
        let e = |m: &str| err(self.line, node.col, m.to_string());
        Ok(match &node.ast {
            Ast::Num(n) => LatticePoly::constant(ParamCoeff::from_rational(
                BigRational::from_integer(n.clone()),
            )),
            Ast::Var { name, shift } => {
                let c = self
                    .symbols
                    .component_index(name)
                    .ok_or_else(|| e(&format!("unknown variable '{name}'")))?;
                LatticePoly::var(VarRef::new(c, *shift))
            }
            Ast::Ident(name) => {
                let p = self
                    .symbols
                    .param_index(name)
                    .ok_or_else(|| e(&format!("unknown symbol '{name}'")))?;
                LatticePoly::constant(ParamCoeff::param(p))
            }
            Ast::Neg(a) => -self.poly(a)?,
            Ast::Add(a, b) => &self.poly(a)? + &self.poly(b)?,
            Ast::Sub(a, b) => &self.poly(a)? - &self.poly(b)?,
            Ast::Mul(a, b) => &self.poly(a)? * &self.poly(b)?,
            Ast::Div(a, b) => {
                let num = self.poly(a)?;
                let den = self.poly(b)?;
                &num * &self.reciprocal(&den, node.col)?
            }
            Ast::Pow(a, k) => {
                let base = self.poly(a)?;
                if *k >= 0 {
                    base.pow(*k as u32)
                } else {
                    self.reciprocal(&base, node.col)?.pow(k.unsigned_abs())
                }
            }
        })
    }

    fn reciprocal(&self, den: &LatticePoly, col: usize) -> Result<LatticePoly> {
        if let Some(c) = den.as_constant() {
            return match c.as_rational() {
                Some(q) if !q.is_zero() => {
                    Ok(LatticePoly::constant(ParamCoeff::from_rational(q.recip())))
                }
                Some(_) => Err(err(self.line, col, "division by zero")),
                None => Err(err(self.line, col, "division by a parameter expression")),
            };
        }
        if self.division == Division::ConstantsOnly {
            return Err(err(self.line, col, "non-polynomial right-hand side"));
        }
        match den.leading() {
            Some((m, c)) if den.len() == 1 => match c.as_rational() {
                Some(q) => Ok(LatticePoly::term(
                    m.inverse(),
                    ParamCoeff::from_rational(q.recip()),
                )),
                None => Err(err(self.line, col, "division by a parameter expression")),
            },
            _ => Err(err(
                self.line,
                col,
                "division by a sum is not a Laurent polynomial",
            )),
        }
    }

    fn op(&self, node: &Node) -> Result<OpEntry> {
        let wrap = |r: Result<OpEntry>| {
            r.map_err(|e| match e {
                Error::Unsupported(m) => err(self.line, node.col, m),
                other => other,
            })
        };
        Ok(match &node.ast {
            Ast::Ident(name) if name == "I" => OpEntry::identity(),
            Ast::Ident(name) if name == "D" => OpEntry::shift_op(1),
            Ast::Ident(name) if name == "S" => OpEntry::summation(),
            Ast::Pow(base, k) if matches!(&base.ast, Ast::Ident(n) if n == "D") => {
                OpEntry::shift_op(*k)
            }
            Ast::Neg(a) => self.op(a)?.neg(),
            Ast::Add(a, b) => self.op(a)?.add(&self.op(b)?),
            Ast::Sub(a, b) => self.op(a)?.add(&self.op(b)?.neg()),
            Ast::Mul(a, b) => wrap(self.op(a)?.compose(&self.op(b)?))?,
            _ => OpEntry::mul_by(self.poly(node)?),
        })
    }
}

/// Parses a lattice polynomial; `1/v[0]` and negative powers are allowed.
pub fn parse_poly(text: &str, symbols: &Symbols) -> Result<LatticePoly> {
    let node = Parser::new(text, 1, 1)?.parse_all()?;
    Evaluator {
        symbols,
        line: 1,
        division: Division::Monomials,
    }
    .poly(&node)
}

/// Parses one operator entry such as `D^-1 + I + (v[0] - v[-1])*S*(1/v[0])`.
pub fn parse_op_entry(text: &str, symbols: &Symbols) -> Result<OpEntry> {
    parse_op_entry_at(text, symbols, 1, 1)
}

fn parse_op_entry_at(text: &str, symbols: &Symbols, line: usize, col: usize) -> Result<OpEntry> {
    let node = Parser::new(text, line, col)?.parse_all()?;
    Evaluator {
        symbols,
        line,
        division: Division::Monomials,
    }
    .op(&node)
}

/// Strips a `#` comment; returns `None` for blank lines.
fn content(line: &str) -> Option<&str> {
    let s = line.split('#').next().unwrap_or("");
    (!s.trim().is_empty()).then_some(s)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// Parses a system file.
pub fn parse_system(text: &str) -> Result<DdeSystem> {
    let mut params: Vec<String> = Vec::new();
    let mut equations: Vec<(usize, usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let Some(body) = content(raw) else { continue };
        let trimmed = body.trim_start();
        let indent = body.len() - trimmed.len();
        if let Some(rest) = trimmed.strip_prefix("params:") {
            if !params.is_empty() || !equations.is_empty() {
                return Err(err(
                    line,
                    indent + 1,
                    "params must be declared once, before the equations",
                ));
            }
            for name in rest.split(',') {
                let name = name.trim();
                if !is_ident(name) {
                    return Err(err(
                        line,
                        indent + 1,
                        format!("invalid parameter name '{name}'"),
                    ));
                }
                if RESERVED.contains(&name) {
                    return Err(err(
                        line,
                        indent + 1,
                        format!("'{name}' is reserved for operators"),
                    ));
                }
                if params.iter().any(|p| p == name) {
                    return Err(err(
                        line,
                        indent + 1,
                        format!("duplicate parameter '{name}'"),
                    ));
                }
                params.push(name.to_string());
            }
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(err(line, indent + 1, "expected `name' = expression`"));
        };
        let lhs = body[..eq].trim();
        let Some(name) = lhs.strip_suffix('\'').map(str::trim) else {
            return Err(err(
                line,
                indent + 1,
                "left-hand side must be a time derivative like u'",
            ));
        };
        if !is_ident(name) {
            return Err(err(
                line,
                indent + 1,
                format!("invalid component name '{name}'"),
            ));
        }
        if params.iter().any(|p| p == name) {
            return Err(err(
                line,
                indent + 1,
                format!("'{name}' is declared as a parameter"),
            ));
        }
        if equations.iter().any(|(_, _, n, _)| n == name) {
            return Err(err(
                line,
                indent + 1,
                format!("second equation for '{name}'"),
            ));
        }
        equations.push((line, eq + 2, name.to_string(), body[eq + 1..].to_string()));
    }
    if equations.is_empty() {
        return Err(err(1, 1, "no equations found"));
    }
    let symbols = Symbols::new(
        equations.iter().map(|(_, _, n, _)| n.clone()).collect(),
        params,
    );
    let mut rhs = Vec::with_capacity(equations.len());
    for (line, col, _, text) in &equations {
        let node = Parser::new(text, *line, *col)?.parse_all()?;
        let eval = Evaluator {
            symbols: &symbols,
            line: *line,
            division: Division::ConstantsOnly,
        };
        rhs.push(eval.poly(&node)?);
    }
    DdeSystem::new(symbols, rhs)
}

/// Parses `name = expression` lines keyed by the given names, returning
/// the expressions in key order. Missing keys are zero unless `required`.
fn parse_keyed<T>(
    text: &str,
    key_of: impl Fn(&str) -> Option<usize>,
    n: usize,
    mut value: impl FnMut(&str, usize, usize) -> Result<T>,
) -> Result<Vec<Option<T>>> {
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let Some(body) = content(raw) else { continue };
        let Some(eq) = body.find('=') else {
            return Err(err(line, 1, "expected `key = expression`"));
        };
        let key = body[..eq].trim();
        let Some(k) = key_of(key) else {
            return Err(err(line, 1, format!("unknown key '{key}'")));
        };
        if out[k].is_some() {
            return Err(err(line, 1, format!("duplicate key '{key}'")));
        }
        out[k] = Some(value(&body[eq + 1..], line, eq + 2)?);
    }
    Ok(out)
}

fn poly_at(text: &str, symbols: &Symbols, line: usize, col: usize) -> Result<LatticePoly> {
    let node = Parser::new(text, line, col)?.parse_all()?;
    Evaluator {
        symbols,
        line,
        division: Division::Monomials,
    }
    .poly(&node)
}

/// A density file: `rho = …` and optionally `flux = …`.
pub fn parse_density_file(
    text: &str,
    symbols: &Symbols,
) -> Result<(LatticePoly, Option<LatticePoly>)> {
    let keys = |k: &str| match k {
        "rho" => Some(0),
        "flux" => Some(1),
        _ => None,
    };
    let mut vals = parse_keyed(text, keys, 2, |t, l, c| poly_at(t, symbols, l, c))?;
    let flux = vals[1].take();
    let rho = vals[0]
        .take()
        .ok_or_else(|| err(1, 1, "missing `rho = …` line"))?;
    Ok((rho, flux))
}

/// A symmetry file: one `component = expression` line per component.
pub fn parse_vector_file(text: &str, symbols: &Symbols) -> Result<Vec<LatticePoly>> {
    let vals = parse_keyed(
        text,
        |k| symbols.component_index(k),
        symbols.components.len(),
        |t, l, c| poly_at(t, symbols, l, c),
    )?;
    Ok(vals.into_iter().map(Option::unwrap_or_default).collect())
}

/// An operator file: `R(i,j) = entry` lines with 1-based indices; missing
/// entries are zero.
pub fn parse_operator_file(text: &str, symbols: &Symbols) -> Result<DiffOperator> {
    let n = symbols.components.len();
    let key_of = |k: &str| {
        let inner = k.strip_prefix("R(")?.strip_suffix(')')?;
        let (i, j) = inner.split_once(',')?;
        let i: usize = i.trim().parse().ok()?;
        let j: usize = j.trim().parse().ok()?;
        (1..=n).contains(&i).then_some(())?;
        (1..=n).contains(&j).then_some((i - 1) * n + (j - 1))
    };
    let vals = parse_keyed(text, key_of, n * n, |t, l, c| {
        parse_op_entry_at(t, symbols, l, c)
    })?;
    let mut entries = vec![vec![OpEntry::zero(); n]; n];
    for (k, v) in vals.into_iter().enumerate() {
        if let Some(e) = v {
            entries[k / n][k % n] = e;
        }
    }
    DiffOperator::from_entries(entries)
}

/// Parses a rational literal such as `3`, `-1/2`.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = num.parse().ok()?;
    let d: BigInt = den.parse().ok()?;
    (!d.is_zero()).then(|| BigRational::new(n, d))
}

/// Convenience for tests and examples: monomial `name[k]`.
pub fn var_monomial(symbols: &Symbols, name: &str, shift: i32) -> Option<LatticeMonomial> {
    Some(LatticeMonomial::var(VarRef::new(
        symbols.component_index(name)?,
        shift,
    )))
}
