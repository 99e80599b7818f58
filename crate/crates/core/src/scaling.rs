//! Dilation weights, ranks and rank-targeted monomial generation.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::expr::{canonical_rep, total_time_derivative, LatticeMonomial, VarRef};
use crate::linalg::rref;
use crate::param::render_rational;
use crate::system::DdeSystem;

/// Weight of each component; the time derivative has weight one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector(Vec<BigRational>);

impl WeightVector {
    pub fn new(weights: Vec<BigRational>) -> Self {
        WeightVector(weights)
    }

    pub fn from_ints(weights: &[i64]) -> Self {
        WeightVector(
            weights
                .iter()
                .map(|&w| BigRational::from_integer(BigInt::from(w)))
                .collect(),
        )
    }

    pub fn get(&self, component: usize) -> &BigRational {
        &self.0[component]
    }

    pub fn as_slice(&self) -> &[BigRational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn require_positive(&self, sys: &DdeSystem) -> Result<()> {
        match self.0.iter().position(|w| !w.is_positive()) {
            Some(i) => Err(Error::ZeroWeight(sys.symbols().components[i].clone())),
            None => Ok(()),
        }
    }
}

/// Result of balancing the weights of every equation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightOutcome {
    Unique(WeightVector),
    /// `particular + Σ t_k·directions[k]` solves the balance equations for
    /// every choice of the `t_k`; a normalization must pick one.
    Underdetermined {
        particular: Vec<BigRational>,
        directions: Vec<Vec<BigRational>>,
    },
    Inconsistent(String),
}

/// Solves `w(u_i) + 1 = rank(m)` for every monomial `m` of every right-hand
/// side, plus any `(component, weight)` normalizations.
pub fn compute_weights(sys: &DdeSystem, normalization: &[(usize, BigRational)]) -> WeightOutcome {
    let n = sys.n_components();
    // Augmented rows [coefficients | rhs].
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    for i in 0..n {
        for m in sys.rhs(i).monomials() {
            let mut row = vec![BigRational::zero(); n + 1];
            row[i] += BigRational::from_integer(1.into());
            for &(v, e) in m.factors() {
                row[v.component] -= BigRational::from_integer(e.into());
            }
            row[n] = BigRational::from_integer((-1).into());
            rows.push(row);
        }
    }
    for (c, w) in normalization {
        let mut row = vec![BigRational::zero(); n + 1];
        row[*c] = BigRational::from_integer(1.into());
        row[n] = w.clone();
        rows.push(row);
    }
    let (reduced, pivots) = rref(rows, n + 1);
    if pivots.contains(&n) {
        return WeightOutcome::Inconsistent(
            "the balance equations have no solution; the system is not dilation invariant".into(),
        );
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut particular = vec![BigRational::zero(); n];
    for (r, &c) in pivots.iter().enumerate() {
        particular[c] = reduced[r][n].clone();
    }
    if free.is_empty() {
        if let Some(i) = particular.iter().position(|w| w.is_negative()) {
            return WeightOutcome::Inconsistent(format!(
                "component {} would need negative weight {}",
                sys.symbols().components[i],
                render_rational(&particular[i])
            ));
        }
        return WeightOutcome::Unique(WeightVector(particular));
    }
    let directions = free
        .iter()
        .map(|&f| {
            let mut d = vec![BigRational::zero(); n];
            d[f] = BigRational::from_integer(1.into());
            for (r, &c) in pivots.iter().enumerate() {
                d[c] = -reduced[r][f].clone();
            }
            d
        })
        .collect();
    WeightOutcome::Underdetermined {
        particular,
        directions,
    }
}

/// Total weight of a monomial; shifts do not matter.
pub fn rank_of(m: &LatticeMonomial, w: &WeightVector) -> BigRational {
    m.factors()
        .iter()
        .map(|&(v, e)| w.get(v.component) * BigRational::from_integer(e.into()))
        .sum()
}

/// True when every right-hand side is uniform in rank `w(u_i) + 1`.
pub fn is_uniform(sys: &DdeSystem, w: &WeightVector) -> bool {
    (0..sys.n_components()).all(|i| {
        let target = w.get(i) + BigRational::from_integer(1.into());
        sys.rhs(i).monomials().all(|m| rank_of(m, w) == target)
    })
}

/// All zero-shift monomials with nonnegative exponents and rank in `(0, R]`,
/// in term order.
pub fn monomials_upto_rank(
    w: &WeightVector,
    max_rank: &BigRational,
    sys: &DdeSystem,
) -> Result<Vec<LatticeMonomial>> {
    w.require_positive(sys)?;
    let mut out = Vec::new();
    let mut exps = vec![0i32; w.len()];
    enumerate(w, max_rank, 0, &BigRational::zero(), &mut exps, &mut out);
    out.sort();
    Ok(out)
}

fn enumerate(
    w: &WeightVector,
    max_rank: &BigRational,
    comp: usize,
    used: &BigRational,
    exps: &mut Vec<i32>,
    out: &mut Vec<LatticeMonomial>,
) {
    if comp == w.len() {
        if used.is_positive() {
            out.push(LatticeMonomial::from_factors(
                exps.iter()
                    .enumerate()
                    .map(|(c, &e)| (VarRef::new(c, 0), e)),
            ));
        }
        return;
    }
    let mut e = 0;
    let mut r = used.clone();
    while &r <= max_rank {
        exps[comp] = e;
        enumerate(w, max_rank, comp + 1, &r, exps, out);
        e += 1;
        r += w.get(comp);
    }
    exps[comp] = 0;
}

/// Brings each monomial to rank `R` by applying the time derivative
/// `R - rank(m)` times and collects every monomial of the expansions.
/// Monomials with a negative or non-integer deficit are dropped.
pub fn completion_set(
    ms: &[LatticeMonomial],
    w: &WeightVector,
    rank: &BigRational,
    sys: &DdeSystem,
) -> Vec<LatticeMonomial> {
    let mut out = BTreeSet::new();
    for m in ms {
        let deficit = rank - rank_of(m, w);
        if deficit.is_negative() || !deficit.is_integer() {
            continue;
        }
        let d: usize = deficit.to_integer().try_into().unwrap_or(usize::MAX);
        let mut p = crate::expr::LatticePoly::monomial(m.clone());
        for _ in 0..d {
            p = total_time_derivative(&p, sys);
        }
        out.extend(p.monomials().cloned());
    }
    out.into_iter().collect()
}

/// [`completion_set`] followed by canonical representatives, deduplicated.
pub fn derivative_completion(
    ms: &[LatticeMonomial],
    w: &WeightVector,
    rank: &BigRational,
    sys: &DdeSystem,
) -> Vec<LatticeMonomial> {
    let set: BTreeSet<LatticeMonomial> = completion_set(ms, w, rank, sys)
        .iter()
        .map(|m| canonical_rep(m).0)
        .collect();
    set.into_iter().collect()
}

/// Checks that `ranks[i] - w(u_i)` is the same for every component and
/// returns that common offset.
pub fn rank_offset(ranks: &[BigRational], w: &WeightVector) -> Result<BigRational> {
    if ranks.len() != w.len() {
        return Err(Error::RankTarget(format!(
            "{} ranks given for {} components",
            ranks.len(),
            w.len()
        )));
    }
    let offset = &ranks[0] - w.get(0);
    for (i, r) in ranks.iter().enumerate() {
        if r - w.get(i) != offset {
            return Err(Error::RankTarget(format!(
                "rank of component {} must be its weight plus {}",
                i + 1,
                render_rational(&offset)
            )));
        }
    }
    Ok(offset)
}
