//! Exact homogeneous linear systems for undetermined coefficients.
//!
//! Parameter-free systems are reduced over the rationals. Systems whose
//! entries depend on declared parameters go through fraction-free
//! elimination that splits into cases whenever a pivot might vanish.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::param::ParamCoeff;

/// Homogeneous system `Σ_k a_k c_k = 0` over unknowns `c_0 … c_{n-1}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearSystem {
    n_unknowns: usize,
    equations: BTreeSet<Vec<(usize, ParamCoeff)>>,
}

impl LinearSystem {
    pub fn new(n_unknowns: usize) -> Self {
        LinearSystem {
            n_unknowns,
            equations: BTreeSet::new(),
        }
    }

    /// Adds one equation; zero rows are skipped and rational multiples of an
    /// existing row collapse onto it.
    pub fn add_equation(&mut self, row: BTreeMap<usize, ParamCoeff>) {
        let row: Vec<(usize, ParamCoeff)> = row.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let Some((_, first)) = row.first() else {
            return;
        };
        let (content, _) = first.content_and_primitive();
        let inv = content.recip();
        let row = row.into_iter().map(|(k, c)| (k, c.scale(&inv))).collect();
        self.equations.insert(row);
    }

    /// Builds the system "every key has zero total coefficient" from
    /// contributions `(unknown, key, coefficient)`.
    pub fn from_contributions<K: Ord>(
        n_unknowns: usize,
        items: impl IntoIterator<Item = (usize, K, ParamCoeff)>,
    ) -> Self {
        let mut rows: BTreeMap<K, BTreeMap<usize, ParamCoeff>> = BTreeMap::new();
        for (k, key, c) in items {
            *rows
                .entry(key)
                .or_default()
                .entry(k)
                .or_insert_with(ParamCoeff::zero) += &c;
        }
        let mut sys = LinearSystem::new(n_unknowns);
        for row in rows.into_values() {
            sys.add_equation(row);
        }
        sys
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }

    pub fn n_equations(&self) -> usize {
        self.equations.len()
    }

    pub fn equations(&self) -> impl Iterator<Item = &[(usize, ParamCoeff)]> {
        self.equations.iter().map(|r| r.as_slice())
    }

    pub fn is_parametric(&self) -> bool {
        self.equations
            .iter()
            .any(|r| r.iter().any(|(_, c)| !c.is_constant()))
    }

    /// Value of every equation at `solution`.
    pub fn residuals(&self, solution: &[ParamCoeff]) -> Vec<ParamCoeff> {
        self.equations
            .iter()
            .map(|r| {
                r.iter().fold(ParamCoeff::zero(), |acc, (k, c)| {
                    &acc + &(c * &solution[*k])
                })
            })
            .collect()
    }

    fn dense_rational(&self) -> Option<Vec<Vec<BigRational>>> {
        self.equations
            .iter()
            .map(|r| {
                let mut row = vec![BigRational::zero(); self.n_unknowns];
                for (k, c) in r {
                    row[*k] = c.as_rational()?;
                }
                Some(row)
            })
            .collect()
    }

    fn dense_param(&self) -> Vec<Vec<ParamCoeff>> {
        self.equations
            .iter()
            .map(|r| {
                let mut row = vec![ParamCoeff::zero(); self.n_unknowns];
                for (k, c) in r {
                    row[*k] = c.clone();
                }
                row
            })
            .collect()
    }
}

/// Reduced row echelon form over the rationals. Returns the nonzero rows and
/// their pivot columns.
pub fn rref(rows: Vec<Vec<BigRational>>, ncols: usize) -> (Vec<Vec<BigRational>>, Vec<usize>) {
    let mut basis: Vec<Vec<BigRational>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    for mut row in rows {
        for (b, &p) in basis.iter().zip(&pivots) {
            if !row[p].is_zero() {
                let f = row[p].clone();
                for j in 0..ncols {
                    if !b[j].is_zero() {
                        row[j] -= &f * &b[j];
                    }
                }
            }
        }
        let Some(p) = row.iter().position(|x| !x.is_zero()) else {
            continue;
        };
        let inv = row[p].recip();
        for x in row.iter_mut() {
            *x *= &inv;
        }
        for b in basis.iter_mut() {
            if !b[p].is_zero() {
                let f = b[p].clone();
                for j in 0..ncols {
                    if !row[j].is_zero() {
                        b[j] -= &f * &row[j];
                    }
                }
            }
        }
        basis.push(row);
        pivots.push(p);
    }
    let mut order: Vec<usize> = (0..pivots.len()).collect();
    order.sort_by_key(|&i| pivots[i]);
    (
        order.iter().map(|&i| basis[i].clone()).collect(),
        order.iter().map(|&i| pivots[i]).collect(),
    )
}

/// Basis of the solution space of a parameter-free system, one vector per
/// free unknown (that unknown set to one, the other free unknowns to zero).
///
/// # Panics
///
/// Panics if an equation has a parameter-dependent coefficient; use
/// [`parametric_solve`] for those.
pub fn nullspace(sys: &LinearSystem) -> Vec<Vec<BigRational>> {
    let rows = sys
        .dense_rational()
        .expect("nullspace needs a parameter-free system");
    let n = sys.n_unknowns;
    let (reduced, pivots) = rref(rows, n);
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|f| {
            let mut v = vec![BigRational::zero(); n];
            v[f] = BigRational::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -reduced[r][f].clone();
            }
            v
        })
        .collect()
}

/// Scales `v` so that `v[index] = value`. Returns `None` if `v[index]` is zero.
pub fn normalize(v: &[BigRational], index: usize, value: &BigRational) -> Option<Vec<BigRational>> {
    if v[index].is_zero() {
        return None;
    }
    let f = value / &v[index];
    Some(v.iter().map(|x| x * &f).collect())
}

/// One case of a parametric solve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    /// Parameter assignments `(index, value)` defining the case, in the
    /// order they were made. Values only mention unassigned parameters.
    pub substitution: Vec<(usize, ParamCoeff)>,
    /// Primitive factors assumed nonzero on this branch.
    pub inequalities: Vec<ParamCoeff>,
    pub outcome: BranchOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BranchOutcome {
    /// Nullspace basis; entries may still depend on unassigned parameters.
    Solutions(Vec<Vec<ParamCoeff>>),
    /// Only the zero solution.
    NoCandidate,
    /// The case split hit the depth cap before this branch was settled.
    DepthExhausted,
    /// A pivot factor could not be solved for any parameter.
    Unresolved(ParamCoeff),
}

impl Branch {
    pub fn has_solutions(&self) -> bool {
        matches!(&self.outcome, BranchOutcome::Solutions(b) if !b.is_empty())
    }

    /// `name = value` for every assignment, e.g. `a = 1`, ordered by
    /// parameter.
    pub fn render_conditions(&self, names: &[String]) -> Vec<String> {
        render_substitution(&self.substitution, names)
    }

    /// `factor != 0` for every recorded inequality.
    pub fn render_inequalities(&self, names: &[String]) -> Vec<String> {
        self.inequalities
            .iter()
            .map(|f| format!("{} != 0", f.render(names)))
            .collect()
    }
}

/// `name = value` strings ordered by parameter index.
pub fn render_substitution(subs: &[(usize, ParamCoeff)], names: &[String]) -> Vec<String> {
    let mut sorted: Vec<&(usize, ParamCoeff)> = subs.iter().collect();
    sorted.sort_by_key(|(p, _)| *p);
    sorted
        .iter()
        .map(|(p, v)| format!("{} = {}", names[*p], v.render(names)))
        .collect()
}

/// Solves a system whose coefficients may depend on parameters, splitting
/// into cases on pivot factors. Declared parameters are assumed nonzero, so
/// cases that force a parameter to vanish are discarded. At most
/// `max_depth` nested assignments are made; deeper cases are reported as
/// [`BranchOutcome::DepthExhausted`].
pub fn parametric_solve(sys: &LinearSystem, max_depth: usize) -> Vec<Branch> {
    if !sys.is_parametric() {
        let basis = nullspace(sys)
            .into_iter()
            .map(|v| v.into_iter().map(ParamCoeff::from_rational).collect())
            .collect::<Vec<Vec<ParamCoeff>>>();
        return vec![Branch {
            substitution: Vec::new(),
            inequalities: Vec::new(),
            outcome: if basis.is_empty() {
                BranchOutcome::NoCandidate
            } else {
                BranchOutcome::Solutions(basis)
            },
        }];
    }
    let original = sys.dense_param();
    let mut out = Vec::new();
    explore(
        &original,
        sys.n_unknowns,
        Vec::new(),
        Vec::new(),
        max_depth,
        &mut out,
    );
    out
}

fn substitute_all(p: &ParamCoeff, subs: &[(usize, ParamCoeff)]) -> ParamCoeff {
    subs.iter()
        .fold(p.clone(), |acc, (i, v)| acc.substitute(*i, v))
}

fn primitive(p: &ParamCoeff) -> ParamCoeff {
    p.content_and_primitive().1
}

/// Nonconstant primitive factors of `p`; parameters are nonzero so monomial
/// factors never matter.
fn nonconstant_factors(p: &ParamCoeff) -> Vec<ParamCoeff> {
    p.factor().factors.into_iter().map(|(f, _)| f).collect()
}

fn explore(
    original: &[Vec<ParamCoeff>],
    n: usize,
    subs: Vec<(usize, ParamCoeff)>,
    mut ineqs: Vec<ParamCoeff>,
    depth_left: usize,
    out: &mut Vec<Branch>,
) {
    let mut m: Vec<Vec<ParamCoeff>> = original
        .iter()
        .map(|r| r.iter().map(|c| substitute_all(c, &subs)).collect())
        .collect();
    m.retain(|r| r.iter().any(|c| !c.is_zero()));
    let mut prev = ParamCoeff::one();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let candidates: Vec<usize> = (r..m.len()).filter(|&i| !m[i][col].is_zero()).collect();
        if candidates.is_empty() {
            continue;
        }
        let known_nonzero = |p: &ParamCoeff, ineqs: &[ParamCoeff]| {
            nonconstant_factors(p).iter().all(|f| ineqs.contains(f))
        };
        let choice = candidates
            .iter()
            .copied()
            .find(|&i| m[i][col].is_constant())
            .or_else(|| {
                candidates
                    .iter()
                    .copied()
                    .find(|&i| known_nonzero(&m[i][col], &ineqs))
            })
            .unwrap_or_else(|| {
                *candidates
                    .iter()
                    .min_by_key(|&&i| (m[i][col].total_degree(), m[i][col].num_terms()))
                    .expect("nonempty")
            });
        let pivot = m[choice][col].clone();
        for f in nonconstant_factors(&pivot) {
            if ineqs.contains(&f) {
                continue;
            }
            split_on(original, n, &subs, &ineqs, &f, depth_left, out);
            ineqs.push(f);
        }
        m.swap(r, choice);
        let (top, rest) = m.split_at_mut(r + 1);
        let prow = &top[r];
        for row in rest.iter_mut() {
            let lead = row[col].clone();
            for j in 0..n {
                if j == col {
                    continue;
                }
                let v = &(&pivot * &row[j]) - &(&lead * &prow[j]);
                row[j] = v
                    .div_exact(&prev)
                    .expect("fraction-free step divides exactly");
            }
            row[col] = ParamCoeff::zero();
        }
        // Rows left of the pivot block stay in echelon form; earlier pivot
        // rows are untouched, which fraction-free elimination allows.
        prev = pivot;
        pivots.push(col);
        r += 1;
        let tail: Vec<Vec<ParamCoeff>> = m
            .drain(r..)
            .filter(|row| row.iter().any(|c| !c.is_zero()))
            .collect();
        m.extend(tail);
        if r == m.len() {
            break;
        }
    }
    let basis = back_substitute(&m[..r], &pivots, n);
    out.push(Branch {
        substitution: subs,
        inequalities: ineqs,
        outcome: if basis.is_empty() {
            BranchOutcome::NoCandidate
        } else {
            BranchOutcome::Solutions(basis)
        },
    });
}

fn split_on(
    original: &[Vec<ParamCoeff>],
    n: usize,
    subs: &[(usize, ParamCoeff)],
    ineqs: &[ParamCoeff],
    factor: &ParamCoeff,
    depth_left: usize,
    out: &mut Vec<Branch>,
) {
    let Some((p, value)) = factor.solve_linear() else {
        out.push(Branch {
            substitution: subs.to_vec(),
            inequalities: ineqs.to_vec(),
            outcome: BranchOutcome::Unresolved(factor.clone()),
        });
        return;
    };
    // The parameter itself may not vanish.
    if value.is_zero() {
        return;
    }
    let mut new_subs: Vec<(usize, ParamCoeff)> = subs
        .iter()
        .map(|(i, v)| (*i, v.substitute(p, &value)))
        .collect();
    new_subs.push((p, value.clone()));
    if new_subs.iter().any(|(_, v)| v.is_zero()) {
        return;
    }
    let mut new_ineqs = Vec::new();
    for f in ineqs {
        let g = f.substitute(p, &value);
        if g.is_zero() {
            return;
        }
        if !g.is_constant() {
            for h in nonconstant_factors(&g) {
                if !new_ineqs.contains(&h) {
                    new_ineqs.push(h);
                }
            }
        }
    }
    if depth_left == 0 {
        out.push(Branch {
            substitution: new_subs,
            inequalities: new_ineqs,
            outcome: BranchOutcome::DepthExhausted,
        });
        return;
    }
    explore(original, n, new_subs, new_ineqs, depth_left - 1, out);
}

/// Solutions of an echelon system with polynomial entries. Each free unknown
/// is set to the product of the pivots so every division is exact.
fn back_substitute(rows: &[Vec<ParamCoeff>], pivots: &[usize], n: usize) -> Vec<Vec<ParamCoeff>> {
    let scale = rows
        .iter()
        .zip(pivots)
        .fold(ParamCoeff::one(), |acc, (row, &p)| &acc * &row[p]);
    let mut basis = Vec::new();
    for f in (0..n).filter(|c| !pivots.contains(c)) {
        let mut x = vec![ParamCoeff::zero(); n];
        x[f] = scale.clone();
        for (row, &p) in rows.iter().zip(pivots).rev() {
            let mut s = ParamCoeff::zero();
            for j in p + 1..n {
                if !row[j].is_zero() && !x[j].is_zero() {
                    s += &(&row[j] * &x[j]);
                }
            }
            x[p] = (-s)
                .div_exact(&row[p])
                .expect("pivot product clears denominators");
        }
        basis.push(reduce_vector(x));
    }
    basis
}

/// Removes common polynomial factors and rational content.
fn reduce_vector(mut x: Vec<ParamCoeff>) -> Vec<ParamCoeff> {
    let mut candidates: Vec<ParamCoeff> = Vec::new();
    if let Some(first) = x.iter().find(|c| !c.is_zero()) {
        let fac = first.factor();
        for (f, mult) in fac.factors {
            for _ in 0..mult {
                candidates.push(f.clone());
            }
        }
        for &(i, e) in fac.monomial.factors() {
            for _ in 0..e {
                candidates.push(ParamCoeff::param(i));
            }
        }
    }
    for f in candidates {
        let divided: Option<Vec<ParamCoeff>> = x.iter().map(|c| c.div_exact(&f)).collect();
        if let Some(d) = divided {
            x = d;
        }
    }
    let mut content: Option<BigRational> = None;
    for c in x.iter().filter(|c| !c.is_zero()) {
        let (k, _) = c.content_and_primitive();
        content = Some(match content {
            None => k,
            Some(prev) => rational_gcd(&prev, &k),
        });
    }
    if let Some(k) = content {
        let inv = k.recip();
        x = x.iter().map(|c| c.scale(&inv)).collect();
    }
    x
}

fn rational_gcd(a: &BigRational, b: &BigRational) -> BigRational {
    use num_integer::Integer;
    BigRational::new(a.numer().gcd(b.numer()), a.denom().lcm(b.denom()))
}

/// Substitutes a branch assignment into a coefficient.
pub fn apply_substitution(p: &ParamCoeff, subs: &[(usize, ParamCoeff)]) -> ParamCoeff {
    substitute_all(p, subs)
}

/// Normalizes a parametric solution so that entry `index` is one when that
/// entry is a nonzero constant; otherwise returns the vector unchanged.
pub fn normalize_param(v: &[ParamCoeff], index: usize) -> Vec<ParamCoeff> {
    match v[index].as_rational() {
        Some(q) if !q.is_zero() => {
            let inv = q.recip();
            v.iter().map(|c| c.scale(&inv)).collect()
        }
        _ => v.to_vec(),
    }
}

/// Primitive representative used to compare factors.
pub fn primitive_part(p: &ParamCoeff) -> ParamCoeff {
    primitive(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn row(entries: &[(usize, ParamCoeff)]) -> BTreeMap<usize, ParamCoeff> {
        entries.iter().cloned().collect()
    }

    fn c(n: i64) -> ParamCoeff {
        ParamCoeff::from_int(n)
    }

    #[test]
    fn density_rank_three_system() {
        let mut s = LinearSystem::new(3);
        s.add_equation(row(&[(0, c(3)), (1, c(-1))]));
        s.add_equation(row(&[(2, c(1)), (0, c(-3))]));
        s.add_equation(row(&[(1, c(1)), (2, c(-1))]));
        let basis = nullspace(&s);
        assert_eq!(basis.len(), 1);
        let v = normalize(&basis[0], 0, &BigRational::new(1.into(), 3.into())).unwrap();
        assert_eq!(v, vec![BigRational::new(1.into(), 3.into()), q(1), q(1)]);
    }

    #[test]
    fn trivial_and_duplicate_rows() {
        let mut s = LinearSystem::new(2);
        s.add_equation(row(&[(0, c(1))]));
        s.add_equation(row(&[(0, c(2))]));
        s.add_equation(row(&[(1, c(1))]));
        s.add_equation(row(&[(1, c(0))]));
        assert_eq!(s.n_equations(), 2);
        assert!(nullspace(&s).is_empty());
        let b = parametric_solve(&s, 6);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].outcome, BranchOutcome::NoCandidate);
    }

    #[test]
    fn rref_matches_hand_reduction() {
        let (r, p) = rref(vec![vec![q(2), q(4), q(2)], vec![q(1), q(2), q(3)]], 3);
        assert_eq!(p, vec![0, 2]);
        assert_eq!(r[0], vec![q(1), q(2), q(0)]);
        assert_eq!(r[1], vec![q(0), q(0), q(1)]);
    }

    #[test]
    fn parametric_branching() {
        // (a - 1) c0 = 0, (b - 2) c1 + c0 = 0, c2 = 0 with a, b nonzero.
        let a = ParamCoeff::param(0);
        let b = ParamCoeff::param(1);
        let mut s = LinearSystem::new(3);
        s.add_equation(row(&[(0, &a - &c(1))]));
        s.add_equation(row(&[(1, &b - &c(2)), (0, c(1))]));
        s.add_equation(row(&[(2, c(1))]));
        let branches = parametric_solve(&s, 6);
        let names = vec!["a".to_string(), "b".to_string()];
        let with: Vec<Vec<String>> = branches
            .iter()
            .filter(|br| br.has_solutions())
            .map(|br| br.render_conditions(&names))
            .collect();
        assert!(with.contains(&vec!["a = 1".to_string()]));
        assert!(with.iter().any(|c| c.contains(&"b = 2".to_string())));
        for br in &branches {
            if let BranchOutcome::Solutions(basis) = &br.outcome {
                for v in basis {
                    let res = s.residuals(v);
                    for r in res {
                        assert!(apply_substitution(&r, &br.substitution).is_zero());
                    }
                }
            }
        }
        // The generic branch has only the zero solution.
        assert!(branches
            .iter()
            .any(|br| br.substitution.is_empty() && br.outcome == BranchOutcome::NoCandidate));
    }

    #[test]
    fn zero_parameter_branch_is_dropped() {
        let a = ParamCoeff::param(0);
        let mut s = LinearSystem::new(1);
        s.add_equation(row(&[(0, a)]));
        let branches = parametric_solve(&s, 6);
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].outcome, BranchOutcome::NoCandidate);
    }

    #[test]
    fn depth_cap_is_reported() {
        let a = ParamCoeff::param(0);
        let mut s = LinearSystem::new(1);
        s.add_equation(row(&[(0, &a - &c(3))]));
        let branches = parametric_solve(&s, 0);
        assert!(branches
            .iter()
            .any(|b| b.outcome == BranchOutcome::DepthExhausted));
    }
}
