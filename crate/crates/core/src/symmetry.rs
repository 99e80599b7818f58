//! Fréchet derivatives and generalized symmetries.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::expr::{total_time_derivative, LatticeMonomial, LatticePoly, Symbols};
use crate::linalg::{apply_substitution, parametric_solve, Branch, BranchOutcome, LinearSystem};
use crate::param::ParamCoeff;
use crate::recursion::{DiffOperator, OpEntry};
use crate::scaling::{completion_set, monomials_upto_rank, rank_offset, WeightVector};
use crate::system::DdeSystem;

/// `F'[G]_i = Σ_{j,k} ∂F_i/∂u⁽ʲ⁾_{n+k} · D^k G_j`.
pub fn frechet_apply(f: &[LatticePoly], g: &[LatticePoly]) -> Vec<LatticePoly> {
    f.iter()
        .map(|fi| {
            let mut out = LatticePoly::zero();
            for x in fi.variables() {
                out += &(&fi.partial(x) * &g[x.component].shift(x.shift));
            }
            out
        })
        .collect()
}

/// The Fréchet derivative as a matrix of local operators.
pub fn frechet_operator(f: &[LatticePoly]) -> DiffOperator {
    let n = f.len();
    let mut entries = vec![vec![OpEntry::zero(); n]; n];
    for (i, fi) in f.iter().enumerate() {
        for x in fi.variables() {
            entries[i][x.component].add_local(fi.partial(x), x.shift);
        }
    }
    DiffOperator::from_entries(entries).expect("square by construction")
}

/// `Dₜ G - F'[G]`, zero exactly when `G` is a symmetry.
pub fn symmetry_residual(sys: &DdeSystem, g: &[LatticePoly]) -> Vec<LatticePoly> {
    let fg = frechet_apply(sys.flows(), g);
    g.iter()
        .zip(&fg)
        .map(|(gi, fgi)| &total_time_derivative(gi, sys) - fgi)
        .collect()
}

/// `G_i = Σ c_k m_k` with unknown `k` attached to `(component, monomial)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryCandidate {
    pub ranks: Vec<BigRational>,
    pub blocks: Vec<(usize, LatticeMonomial)>,
}

impl SymmetryCandidate {
    pub fn n_unknowns(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn instantiate(&self, coeffs: &[ParamCoeff]) -> Vec<LatticePoly> {
        let mut g = vec![LatticePoly::zero(); self.ranks.len()];
        for ((i, m), c) in self.blocks.iter().zip(coeffs) {
            g[*i].add_term(m.clone(), c.clone());
        }
        g
    }

    /// One line per component, `c1*u[0]^3 + c2*u[-1]*v[-1] + …`.
    pub fn render(&self, symbols: &Symbols) -> Vec<String> {
        (0..self.ranks.len())
            .map(|i| {
                self.blocks
                    .iter()
                    .enumerate()
                    .filter(|(_, (c, _))| *c == i)
                    .map(|(k, (_, m))| format!("c{}*{}", k + 1, m.render(symbols)))
                    .collect::<Vec<_>>()
                    .join(" + ")
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryResult {
    pub ranks: Vec<BigRational>,
    pub components: Vec<LatticePoly>,
    /// Parameter assignments under which the symmetry exists.
    pub substitution: Vec<(usize, ParamCoeff)>,
}

/// Every parameter case of one symmetry solve, with the symmetries found.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymmetryOutcome {
    pub results: Vec<SymmetryResult>,
    pub branches: Vec<Branch>,
}

/// Ranks `w_i + offset`.
pub fn symmetry_ranks(w: &WeightVector, offset: &BigRational) -> Vec<BigRational> {
    w.as_slice().iter().map(|wi| wi + offset).collect()
}

/// Candidate with every shifted monomial reached by time derivatives from
/// lower-rank monomials; shifted representatives are all kept.
pub fn build_symmetry_candidate(
    sys: &DdeSystem,
    w: &WeightVector,
    ranks: &[BigRational],
) -> Result<SymmetryCandidate> {
    rank_offset(ranks, w)?;
    let mut blocks = Vec::new();
    for (i, r) in ranks.iter().enumerate() {
        if !r.is_zero() && r < &BigRational::zero() {
            return Err(Error::RankTarget(format!(
                "rank of component {} is negative",
                i + 1
            )));
        }
        let ms = monomials_upto_rank(w, r, sys)?;
        for m in completion_set(&ms, w, r, sys) {
            blocks.push((i, m));
        }
    }
    Ok(SymmetryCandidate {
        ranks: ranks.to_vec(),
        blocks,
    })
}

/// Coefficients of `Dₜ G - F'[G]` per (component, monomial).
pub fn symmetry_system(cand: &SymmetryCandidate, sys: &DdeSystem) -> LinearSystem {
    let n = sys.n_components();
    let mut contributions = Vec::new();
    for (k, (i, m)) in cand.blocks.iter().enumerate() {
        let mut g = vec![LatticePoly::zero(); n];
        g[*i] = LatticePoly::monomial(m.clone());
        for (comp, res) in symmetry_residual(sys, &g).into_iter().enumerate() {
            for (mono, c) in res.terms() {
                contributions.push((k, (comp, mono.clone()), c.clone()));
            }
        }
    }
    LinearSystem::from_contributions(cand.n_unknowns(), contributions)
}

/// Solves for the symmetries in the span of the candidate. Each solution is
/// scaled so that its last nonzero unknown is one.
pub fn solve_symmetry(
    cand: &SymmetryCandidate,
    sys: &DdeSystem,
    max_depth: usize,
) -> SymmetryOutcome {
    let mut out = SymmetryOutcome::default();
    if cand.is_empty() {
        return out;
    }
    let lin = symmetry_system(cand, sys);
    for branch in parametric_solve(&lin, max_depth) {
        if let BranchOutcome::Solutions(basis) = &branch.outcome {
            for v in basis {
                let v: Vec<ParamCoeff> = v
                    .iter()
                    .map(|c| apply_substitution(c, &branch.substitution))
                    .collect();
                let v = normalize_last(&v);
                out.results.push(SymmetryResult {
                    ranks: cand.ranks.clone(),
                    components: cand.instantiate(&v),
                    substitution: branch.substitution.clone(),
                });
            }
        }
        out.branches.push(branch);
    }
    out
}

/// Rank offset of level `k`: `k` times the smallest weight.
pub fn level_offset(w: &WeightVector, level: usize) -> BigRational {
    let min = w
        .as_slice()
        .iter()
        .min()
        .cloned()
        .unwrap_or_else(BigRational::zero);
    min * BigRational::from_integer((level as i64).into())
}

/// The symmetry at each level `1..=levels`, or `None` where the level has
/// no symmetry or more than one.
pub fn symmetry_levels(
    sys: &DdeSystem,
    w: &WeightVector,
    levels: usize,
    max_depth: usize,
) -> Result<Vec<Option<Vec<LatticePoly>>>> {
    (1..=levels)
        .map(|k| {
            let ranks = symmetry_ranks(w, &level_offset(w, k));
            let cand = build_symmetry_candidate(sys, w, &ranks)?;
            let out = solve_symmetry(&cand, sys, max_depth);
            Ok(match out.results.as_slice() {
                [one] => Some(one.components.clone()),
                _ => None,
            })
        })
        .collect()
}

fn normalize_last(v: &[ParamCoeff]) -> Vec<ParamCoeff> {
    match v
        .iter()
        .rev()
        .find(|c| !c.is_zero())
        .and_then(|c| c.as_rational())
    {
        Some(q) => {
            let inv = q.recip();
            v.iter().map(|c| c.scale(&inv)).collect()
        }
        None => v.to_vec(),
    }
}
