//! Recursion-operator candidates, coefficient determination and checks.
//!
//! A candidate `R = R₀ + R₁` is a linear combination of fixed operator
//! blocks. `R₀` holds local terms `f·D^a` whose cofactors have the rank the
//! rank matrix prescribes; `R₁` holds outer products `G (D - I)^{-1} ⊗ ρ'`
//! of a symmetry with a covariant. The coefficients come from two families
//! of linear constraints on a list of consecutive symmetries:
//!
//! * interpolation, `R G⁽ʲ⁾ = c₀ G⁽ʲ⁺ˢ⁾` with a homogenizing unknown `c₀`;
//! * the defining equation `R'[F] + R∘F' - F'∘R = 0`, applied to each
//!   symmetry.
//!
//! Both are evaluated block by block on concrete functions, with formal
//! `Θ` terms recording summations that do not telescope.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::conservation::{build_density_candidate, solve_density};
use crate::error::{Error, Result};
use crate::expr::{antidifference, Antidifference, LatticeMonomial, LatticePoly, Symbols, VarRef};
use crate::linalg::{nullspace, LinearSystem};
use crate::param::{render_rational, ParamCoeff};
use crate::scaling::{rank_of, WeightVector};
use crate::symmetry::{
    frechet_operator, level_offset, symmetry_levels, symmetry_ranks, symmetry_residual,
};
use crate::system::DdeSystem;

use super::operator::{DiffOperator, ExtendedExpr, OpEntry};

/// `rm(i, j) = rank Gb_i - rank Ga_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankMatrix(Vec<Vec<BigRational>>);

impl RankMatrix {
    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.0[i][j]
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.0
    }

    /// `[[1, 0], [2, 1]]`
    pub fn render(&self) -> String {
        let rows: Vec<String> = self
            .0
            .iter()
            .map(|r| {
                let cells: Vec<String> = r.iter().map(render_rational).collect();
                format!("[{}]", cells.join(", "))
            })
            .collect();
        format!("[{}]", rows.join(", "))
    }
}

pub fn rank_matrix(ranks_a: &[BigRational], ranks_b: &[BigRational]) -> RankMatrix {
    RankMatrix(
        ranks_b
            .iter()
            .map(|rb| ranks_a.iter().map(|ra| rb - ra).collect())
            .collect(),
    )
}

/// Rank of each component when every component is uniform in rank.
pub fn vector_ranks(g: &[LatticePoly], w: &WeightVector) -> Option<Vec<BigRational>> {
    g.iter()
        .map(|gi| {
            let mut ranks = gi.monomials().map(|m| rank_of(m, w));
            let r = ranks.next()?;
            ranks.all(|s| s == r).then_some(r)
        })
        .collect()
}

/// A conserved density entering `R₁` through its Fréchet derivative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Covariant {
    Polynomial {
        rho: LatticePoly,
        rank: BigRational,
    },
    /// `ln(u⁽ⁱ⁾)`, of rank zero.
    Logarithmic {
        component: usize,
    },
}

impl Covariant {
    pub fn rank(&self) -> BigRational {
        match self {
            Covariant::Polynomial { rank, .. } => rank.clone(),
            Covariant::Logarithmic { .. } => BigRational::zero(),
        }
    }

    pub fn render(&self, symbols: &Symbols) -> String {
        match self {
            Covariant::Polynomial { rho, .. } => rho.render(symbols),
            Covariant::Logarithmic { component } => {
                format!("ln({}[0])", symbols.components[*component])
            }
        }
    }
}

/// Row `(Σ_k ∂ρ/∂u⁽ˡ⁾_{n+k} D^k)_l`; for `ln(u⁽ⁱ⁾)` this is `u⁽ⁱ⁾^{-1}·I`
/// in slot `i`.
pub fn covariant(rho: &Covariant, n: usize) -> Vec<OpEntry> {
    let mut row = vec![OpEntry::zero(); n];
    match rho {
        Covariant::Polynomial { rho, .. } => {
            for x in rho.variables() {
                row[x.component].add_local(rho.partial(x), x.shift);
            }
        }
        Covariant::Logarithmic { component } => {
            let inv = LatticeMonomial::var(VarRef::new(*component, 0)).inverse();
            row[*component].add_local(LatticePoly::monomial(inv), 0);
        }
    }
    row
}

/// Components `i` for which `ln(u⁽ⁱ⁾)` is conserved: every term of `F_i`
/// carries `u⁽ⁱ⁾_n` and `F_i / u⁽ⁱ⁾_n` is a forward difference.
pub fn logarithmic_densities(sys: &DdeSystem) -> Vec<usize> {
    (0..sys.n_components())
        .filter(|&i| {
            let fi = sys.rhs(i);
            let x = VarRef::new(i, 0);
            if fi.is_zero() || fi.monomials().any(|m| m.exponent(x) < 1) {
                return false;
            }
            let quotient = fi.mul_monomial(&LatticeMonomial::var(x).inverse());
            matches!(antidifference(&quotient), Antidifference::Exact(_))
        })
        .collect()
}

/// Local block `monomial·D^shift` in entry `(row, col)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalBlock {
    pub row: usize,
    pub col: usize,
    pub shift: i32,
    pub monomial: LatticeMonomial,
}

/// Nonlocal block `generators[generator] (D - I)^{-1} ⊗ covariant'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonlocalBlock {
    pub generator: usize,
    pub covariant: usize,
}

/// Range of shift powers for entry `(i, j)`: for every component present in
/// both `Ga_j` and `Gb_i`, the growth of the lowest and highest shifts.
pub fn shift_window(ga_j: &LatticePoly, gb_i: &LatticePoly) -> Option<(i32, i32)> {
    let ea = ga_j.shift_extents();
    let eb = gb_i.shift_extents();
    let mut window: Option<(i32, i32)> = None;
    for (c, (lo_a, hi_a)) in &ea {
        let Some((lo_b, hi_b)) = eb.get(c) else {
            continue;
        };
        let (lo, hi) = (lo_b - lo_a, hi_b - hi_a);
        window = Some(match window {
            None => (lo, hi),
            Some((l, h)) => (l.max(lo), h.min(hi)),
        });
    }
    window.filter(|(l, h)| l <= h)
}

/// Variables of the right-hand sides, in term order.
pub fn cofactor_pool(sys: &DdeSystem) -> Vec<VarRef> {
    let mut vars: Vec<VarRef> = sys.flows().iter().flat_map(|f| f.variables()).collect();
    vars.sort();
    vars.dedup();
    vars
}

/// Monomials with nonnegative exponents in `pool` of rank exactly `rank`,
/// including the constant when `rank` is zero.
pub fn pool_monomials(
    pool: &[VarRef],
    w: &WeightVector,
    rank: &BigRational,
) -> Vec<LatticeMonomial> {
    let mut out = Vec::new();
    if rank < &BigRational::zero() {
        return out;
    }
    let mut exps = vec![0i32; pool.len()];
    fn go(
        pool: &[VarRef],
        w: &WeightVector,
        k: usize,
        left: &BigRational,
        exps: &mut Vec<i32>,
        out: &mut Vec<LatticeMonomial>,
    ) {
        if k == pool.len() {
            if left.is_zero() {
                out.push(LatticeMonomial::from_factors(
                    pool.iter().zip(exps.iter()).map(|(v, e)| (*v, *e)),
                ));
            }
            return;
        }
        let wk = w.get(pool[k].component);
        let mut e = 0;
        let mut rest = left.clone();
        while rest >= BigRational::zero() {
            exps[k] = e;
            go(pool, w, k + 1, &rest, exps, out);
            if wk.is_zero() {
                break;
            }
            e += 1;
            rest -= wk;
        }
        exps[k] = 0;
    }
    go(pool, w, 0, rank, &mut exps, &mut out);
    out.sort();
    out
}

/// Local part of the candidate, entry by entry (row-major), shift ascending,
/// then cofactor monomials in term order.
pub fn build_r0(
    sys: &DdeSystem,
    w: &WeightVector,
    rm: &RankMatrix,
    ga: &[LatticePoly],
    gb: &[LatticePoly],
) -> Vec<LocalBlock> {
    let pool = cofactor_pool(sys);
    let n = rm.dim();
    let mut blocks = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let Some((lo, hi)) = shift_window(&ga[j], &gb[i]) else {
                continue;
            };
            let monos = pool_monomials(&pool, w, rm.get(i, j));
            for a in lo..=hi {
                for m in &monos {
                    blocks.push(LocalBlock {
                        row: i,
                        col: j,
                        shift: a,
                        monomial: m.clone(),
                    });
                }
            }
        }
    }
    blocks
}

/// Pairs `(generator, covariant)` whose outer product has rank exactly
/// `rm(i, l)` in every nonzero entry.
pub fn build_r1(
    generators: &[Vec<LatticePoly>],
    covariants: &[Covariant],
    rm: &RankMatrix,
    w: &WeightVector,
) -> Vec<NonlocalBlock> {
    let n = rm.dim();
    let mut blocks = Vec::new();
    for (g_idx, g) in generators.iter().enumerate() {
        let Some(g_ranks) = vector_ranks(g, w) else {
            continue;
        };
        for (c_idx, cov) in covariants.iter().enumerate() {
            let row = covariant(cov, n);
            let fits = (0..n).all(|i| {
                (0..n).all(|l| {
                    if g[i].is_zero() || row[l].is_zero() {
                        return true;
                    }
                    &g_ranks[i] + &cov.rank() - w.get(l) == *rm.get(i, l)
                })
            });
            let nonzero = (0..n).any(|i| !g[i].is_zero()) && row.iter().any(|e| !e.is_zero());
            if fits && nonzero {
                blocks.push(NonlocalBlock {
                    generator: g_idx,
                    covariant: c_idx,
                });
            }
        }
    }
    blocks
}

/// `R = Σ c_k block_k` with local blocks first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecursionCandidate {
    pub n: usize,
    pub local: Vec<LocalBlock>,
    pub nonlocal: Vec<NonlocalBlock>,
    pub generators: Vec<Vec<LatticePoly>>,
    pub covariants: Vec<Covariant>,
}

impl RecursionCandidate {
    pub fn n_unknowns(&self) -> usize {
        self.local.len() + self.nonlocal.len()
    }

    /// Operator of block `k` with unit coefficient.
    pub fn block(&self, k: usize) -> DiffOperator {
        let mut op = DiffOperator::zero(self.n);
        if k < self.local.len() {
            let b = &self.local[k];
            op.entry_mut(b.row, b.col)
                .add_local(LatticePoly::monomial(b.monomial.clone()), b.shift);
        } else {
            let b = &self.nonlocal[k - self.local.len()];
            let g = &self.generators[b.generator];
            let row = covariant(&self.covariants[b.covariant], self.n);
            for (i, gi) in g.iter().enumerate() {
                for (l, rho_l) in row.iter().enumerate() {
                    if gi.is_zero() || rho_l.is_zero() {
                        continue;
                    }
                    let term = OpEntry::sandwich(gi.clone(), LatticePoly::one())
                        .compose(rho_l)
                        .expect("sandwich after local term");
                    op.entry_mut(i, l).add_assign(&term);
                }
            }
        }
        op
    }

    pub fn instantiate(&self, coeffs: &[BigRational]) -> DiffOperator {
        let mut op = DiffOperator::zero(self.n);
        for (k, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                op = op.add(&self.block(k).scale(&ParamCoeff::from_rational(c.clone())));
            }
        }
        op
    }

    /// The candidate with symbolic coefficients `c1 … cK`, one
    /// `R(i,j) = …` line per entry.
    pub fn render(&self, symbols: &Symbols) -> String {
        let names: Vec<String> = (1..=self.n_unknowns()).map(|k| format!("c{k}")).collect();
        let sym = Symbols::new(symbols.components.clone(), names);
        let mut op = DiffOperator::zero(self.n);
        for k in 0..self.n_unknowns() {
            op = op.add(&self.block(k).scale(&ParamCoeff::param(k)));
        }
        op.render(&sym)
    }
}

/// Which group of constraints ruled the candidate out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintFamily {
    /// Not enough symmetries to link.
    Symmetries,
    /// `R G⁽ʲ⁾ = G⁽ʲ⁺ˢ⁾`.
    Interpolation,
    /// `R'[F] + R∘F' - F'∘R` applied to the symmetries.
    DefiningEquation,
    /// Several independent operators survive every constraint.
    Underdetermined,
    /// The solved operator failed an independent check.
    Verification,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintFamily::Symmetries => "symmetries",
            ConstraintFamily::Interpolation => "interpolation",
            ConstraintFamily::DefiningEquation => "defining-equation",
            ConstraintFamily::Underdetermined => "underdetermined",
            ConstraintFamily::Verification => "verification",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoSolution {
    pub family: ConstraintFamily,
    pub detail: String,
}

impl fmt::Display for NoSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} constraints: {}", self.family, self.detail)
    }
}

/// Outcome of the independent checks on an operator.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecursionReport {
    /// Iterates `R^k G⁽¹⁾`, `k = 1, 2, …`.
    pub generated: Vec<Vec<ExtendedExpr>>,
    /// Per iterate: no formal summation left.
    pub theta_free: Vec<bool>,
    /// Per iterate: satisfies `Dₜ G = F'[G]`.
    pub symmetric: Vec<bool>,
    /// Per supplied symmetry: probe residual of the defining equation is zero.
    pub probes: Vec<bool>,
    /// Per supplied symmetry: operator-level residual applied to it agrees
    /// with the probe residual.
    pub dual_route: Vec<bool>,
    /// Per consecutive pair of supplied symmetries: `R G⁽ʲ⁾ = G⁽ʲ⁺ˢ⁾`.
    pub links: Vec<bool>,
}

impl RecursionReport {
    pub fn passed(&self) -> bool {
        [
            &self.theta_free,
            &self.symmetric,
            &self.probes,
            &self.dual_route,
            &self.links,
        ]
        .iter()
        .all(|v| v.iter().all(|&b| b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecursionSolution {
    pub rank_matrix: RankMatrix,
    pub candidate: RecursionCandidate,
    /// Values of `c1 … cK`.
    pub coefficients: Vec<BigRational>,
    pub operator: DiffOperator,
    pub report: RecursionReport,
}

/// Probe residual `R'[F]G + R(F'G) - F'(RG)`.
pub fn probe_residual(
    sys: &DdeSystem,
    r: &DiffOperator,
    g: &[LatticePoly],
) -> Result<Vec<ExtendedExpr>> {
    let fp = frechet_operator(sys.flows());
    let rg = r.apply_polys(g)?;
    let fg: Vec<LatticePoly> = fp.apply_polys(g)?.into_iter().map(|e| e.local).collect();
    let a = r.frechet(sys).apply_polys(g)?;
    let b = r.apply_polys(&fg)?;
    let c = fp.apply(&rg)?;
    Ok(a.iter()
        .zip(&b)
        .zip(&c)
        .map(|((a, b), c)| {
            let mut s = a.clone();
            s.add_assign(b);
            s.sub(c)
        })
        .collect())
}

/// The operator `R'[F] + R∘F' - F'∘R`.
pub fn defining_operator(sys: &DdeSystem, r: &DiffOperator) -> Result<DiffOperator> {
    let fp = frechet_operator(sys.flows());
    Ok(r.frechet(sys).add(&r.compose(&fp)?).sub(&fp.compose(r)?))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Local(LatticeMonomial),
    Theta(LatticeMonomial, LatticeMonomial),
}

fn push_expr(
    out: &mut Vec<(usize, (usize, Slot), ParamCoeff)>,
    k: usize,
    comp: usize,
    e: &ExtendedExpr,
    scale: &ParamCoeff,
) {
    for (m, c) in e.local.terms() {
        out.push((k, (comp, Slot::Local(m.clone())), c * scale));
    }
    for (arg, cof) in e.theta_terms() {
        for (m, c) in cof.terms() {
            out.push((k, (comp, Slot::Theta(arg.clone(), m.clone())), c * scale));
        }
    }
}

/// Everything needed to set up and check the coefficient problem.
#[derive(Clone, Debug)]
pub struct RecursionProblem<'a> {
    pub sys: &'a DdeSystem,
    pub weights: &'a WeightVector,
    /// Symmetries of consecutive levels, lowest first.
    pub symmetries: &'a [Vec<LatticePoly>],
    pub gap: usize,
    pub covariants: Vec<Covariant>,
}

impl<'a> RecursionProblem<'a> {
    /// Covariants from the detected logarithmic densities plus the given
    /// polynomial densities.
    pub fn new(
        sys: &'a DdeSystem,
        weights: &'a WeightVector,
        symmetries: &'a [Vec<LatticePoly>],
        gap: usize,
        densities: &[(LatticePoly, BigRational)],
    ) -> Self {
        let mut covariants: Vec<Covariant> = logarithmic_densities(sys)
            .into_iter()
            .map(|component| Covariant::Logarithmic { component })
            .collect();
        covariants.extend(densities.iter().map(|(rho, rank)| Covariant::Polynomial {
            rho: rho.clone(),
            rank: rank.clone(),
        }));
        RecursionProblem {
            sys,
            weights,
            symmetries,
            gap,
            covariants,
        }
    }

    /// The flow, then every supplied symmetry not proportional to it.
    pub fn generators(&self) -> Vec<Vec<LatticePoly>> {
        let flow = self.sys.flows().to_vec();
        let mut out = vec![flow.clone()];
        for g in self.symmetries {
            if !proportional(g, &flow) {
                out.push(g.clone());
            }
        }
        out
    }

    pub fn candidate(&self) -> std::result::Result<(RankMatrix, RecursionCandidate), NoSolution> {
        if self.gap == 0 || self.symmetries.len() <= self.gap {
            return Err(NoSolution {
                family: ConstraintFamily::Symmetries,
                detail: format!(
                    "need two symmetries {} level(s) apart, found {}",
                    self.gap,
                    self.symmetries.len()
                ),
            });
        }
        let (ga, gb) = (&self.symmetries[0], &self.symmetries[self.gap]);
        let (Some(ra), Some(rb)) = (
            vector_ranks(ga, self.weights),
            vector_ranks(gb, self.weights),
        ) else {
            return Err(NoSolution {
                family: ConstraintFamily::Symmetries,
                detail: "symmetry components are not uniform in rank".into(),
            });
        };
        let rm = rank_matrix(&ra, &rb);
        let generators = self.generators();
        let local = build_r0(self.sys, self.weights, &rm, ga, gb);
        let nonlocal = build_r1(&generators, &self.covariants, &rm, self.weights);
        Ok((
            rm,
            RecursionCandidate {
                n: self.sys.n_components(),
                local,
                nonlocal,
                generators,
                covariants: self.covariants.clone(),
            },
        ))
    }

    /// Determines the coefficients, then checks the result independently.
    pub fn solve(&self) -> Result<std::result::Result<RecursionSolution, NoSolution>> {
        if !self.sys.is_numeric() {
            return Err(Error::Unsupported(
                "recursion operators need numeric parameter values".into(),
            ));
        }
        let (rm, cand) = match self.candidate() {
            Ok(x) => x,
            Err(e) => return Ok(Err(e)),
        };
        let k_total = cand.n_unknowns() + 1;
        let blocks: Vec<DiffOperator> = (0..cand.n_unknowns()).map(|k| cand.block(k)).collect();
        let one = ParamCoeff::one();
        let minus_one = ParamCoeff::from_int(-1);
        let mut interp = Vec::new();
        let mut probe = Vec::new();
        let mut probed = vec![false; self.symmetries.len()];
        let pairs = self.symmetries.len() - self.gap;
        let mut result = None;
        for t in 0..pairs {
            let (g, h) = (&self.symmetries[t], &self.symmetries[t + self.gap]);
            let tag = t * self.sys.n_components();
            for (k, b) in blocks.iter().enumerate() {
                for (comp, e) in b.apply_polys(g)?.iter().enumerate() {
                    push_expr(&mut interp, k + 1, tag + comp, e, &one);
                }
            }
            for (comp, hc) in h.iter().enumerate() {
                push_expr(
                    &mut interp,
                    0,
                    tag + comp,
                    &ExtendedExpr::local(hc.clone()),
                    &minus_one,
                );
            }
            for s in [t, t + self.gap] {
                if probed[s] {
                    continue;
                }
                probed[s] = true;
                let tag = s * self.sys.n_components();
                for (k, b) in blocks.iter().enumerate() {
                    for (comp, e) in probe_residual(self.sys, b, &self.symmetries[s])?
                        .iter()
                        .enumerate()
                    {
                        push_expr(&mut probe, k + 1, tag + comp, e, &one);
                    }
                }
            }
            let only_interp = LinearSystem::from_contributions(k_total, interp.clone());
            if !has_normalizable(&nullspace(&only_interp)) {
                return Ok(Err(NoSolution {
                    family: ConstraintFamily::Interpolation,
                    detail: format!(
                        "no candidate operator maps level {} to level {}",
                        t + 1,
                        t + 1 + self.gap
                    ),
                }));
            }
            let tagged = interp
                .iter()
                .map(|(k, (c, s), v)| (*k, (0usize, *c, s.clone()), v.clone()))
                .chain(
                    probe
                        .iter()
                        .map(|(k, (c, s), v)| (*k, (1usize, *c, s.clone()), v.clone())),
                );
            let combined = LinearSystem::from_contributions(k_total, tagged);
            let basis = nullspace(&combined);
            if !has_normalizable(&basis) {
                return Ok(Err(NoSolution {
                    family: ConstraintFamily::DefiningEquation,
                    detail:
                        "every operator that links the symmetries violates R'[F] + R∘F' - F'∘R = 0"
                            .into(),
                }));
            }
            if basis.len() == 1 {
                result = Some(basis[0].clone());
                break;
            }
        }
        let Some(v) = result else {
            return Ok(Err(NoSolution {
                family: ConstraintFamily::Underdetermined,
                detail:
                    "several independent operators satisfy every constraint; supply more levels"
                        .into(),
            }));
        };
        let inv = v[0].recip();
        let coefficients: Vec<BigRational> = v[1..].iter().map(|c| c * &inv).collect();
        let operator = cand.instantiate(&coefficients);
        let report = verify_recursion(
            self.sys,
            &operator,
            self.symmetries,
            self.gap,
            self.symmetries.len(),
        )?;
        if !report.passed() {
            return Ok(Err(NoSolution {
                family: ConstraintFamily::Verification,
                detail: "the solved operator failed the generation or residual checks".into(),
            }));
        }
        Ok(Ok(RecursionSolution {
            rank_matrix: rm,
            candidate: cand,
            coefficients,
            operator,
            report,
        }))
    }
}

/// Computes the symmetries of levels `1..=levels` and solves for an
/// operator linking levels `gap` apart. The nonlocal part draws on any
/// detected logarithmic density and on the polynomial densities up to
/// [`covariant_rank_bound`].
pub fn solve_recursion(
    sys: &DdeSystem,
    w: &WeightVector,
    levels: usize,
    gap: usize,
    max_depth: usize,
) -> Result<std::result::Result<RecursionSolution, NoSolution>> {
    if !sys.is_numeric() {
        return Err(Error::Unsupported(
            "recursion operators need numeric parameter values".into(),
        ));
    }
    let mut symmetries = Vec::new();
    let mut missing = None;
    for (k, g) in symmetry_levels(sys, w, levels, max_depth)?
        .into_iter()
        .enumerate()
    {
        match g {
            Some(g) => symmetries.push(g),
            None => {
                missing = Some(k + 1);
                break;
            }
        }
    }
    if symmetries.len() <= gap {
        let detail = match missing {
            Some(k) => format!(
                "no unique symmetry at level {k} (ranks {})",
                symmetry_ranks(w, &level_offset(w, k))
                    .iter()
                    .map(render_rational)
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            None => format!("{levels} level(s) cannot be linked with gap {gap}"),
        };
        return Ok(Err(NoSolution {
            family: ConstraintFamily::Symmetries,
            detail,
        }));
    }
    let ranks = |g: &[LatticePoly]| vector_ranks(g, w);
    let mut densities = Vec::new();
    if let (Some(ra), Some(rb), Some(rf)) = (
        ranks(&symmetries[0]),
        ranks(&symmetries[gap]),
        ranks(sys.flows()),
    ) {
        let rm = rank_matrix(&ra, &rb);
        let bound = covariant_rank_bound(&rm, w, &rf);
        let step = w
            .as_slice()
            .iter()
            .min()
            .cloned()
            .unwrap_or_else(BigRational::one);
        let mut rank = step.clone();
        while rank <= bound {
            let cand = build_density_candidate(sys, w, &rank)?;
            for d in solve_density(&cand, sys, max_depth).results {
                densities.push((d.rho, rank.clone()));
            }
            rank += &step;
        }
    }
    RecursionProblem::new(sys, w, &symmetries, gap, &densities).solve()
}

/// Largest density rank that can pair with a generator of the given
/// component ranks: `max(rm(i, l) + w_l) - min_i rank G_i`.
pub fn covariant_rank_bound(
    rm: &RankMatrix,
    w: &WeightVector,
    generator: &[BigRational],
) -> BigRational {
    let n = rm.dim();
    let top = (0..n)
        .flat_map(|i| (0..n).map(move |l| (i, l)))
        .map(|(i, l)| rm.get(i, l) + w.get(l))
        .max()
        .unwrap_or_else(BigRational::zero);
    let low = generator
        .iter()
        .min()
        .cloned()
        .unwrap_or_else(BigRational::zero);
    top - low
}

fn has_normalizable(basis: &[Vec<BigRational>]) -> bool {
    basis.iter().any(|v| !v[0].is_zero())
}

/// `a = k·b` for some nonzero rational `k`.
pub fn proportional(a: &[LatticePoly], b: &[LatticePoly]) -> bool {
    let Some((m, cb)) = b.iter().flat_map(|p| p.terms()).next() else {
        return false;
    };
    let comp = b.iter().position(|p| !p.is_zero()).expect("nonzero");
    let ca = a[comp].coeff(m);
    let (Some(x), Some(y)) = (ca.as_rational(), cb.as_rational()) else {
        return false;
    };
    if x.is_zero() {
        return false;
    }
    let k = x / y;
    a.iter().zip(b).all(|(p, q)| *p == q.scale_rational(&k))
}

/// Independent checks of a recursion operator against the system and a
/// list of consecutive symmetries: `levels` iterates from the first
/// symmetry, the probe residual and the operator-level residual on every
/// symmetry, and every link `R G⁽ʲ⁾ = G⁽ʲ⁺ˢ⁾`.
pub fn verify_recursion(
    sys: &DdeSystem,
    r: &DiffOperator,
    symmetries: &[Vec<LatticePoly>],
    gap: usize,
    levels: usize,
) -> Result<RecursionReport> {
    let mut report = RecursionReport::default();
    let Some(first) = symmetries.first() else {
        return Ok(report);
    };
    let mut current: Vec<ExtendedExpr> = first.iter().cloned().map(ExtendedExpr::local).collect();
    for _ in 0..levels {
        if !current.iter().all(ExtendedExpr::is_local) {
            break;
        }
        let next = r.apply(&current)?;
        let local = next.iter().all(ExtendedExpr::is_local);
        report.theta_free.push(local);
        let polys: Vec<LatticePoly> = next.iter().map(|e| e.local.clone()).collect();
        report.symmetric.push(
            local
                && symmetry_residual(sys, &polys)
                    .iter()
                    .all(LatticePoly::is_zero),
        );
        report.generated.push(next.clone());
        current = next;
    }
    let op = defining_operator(sys, r);
    for g in symmetries {
        let probe = probe_residual(sys, r, g)?;
        report.probes.push(probe.iter().all(ExtendedExpr::is_zero));
        let dual = match &op {
            Ok(op) => op.apply_polys(g)? == probe,
            Err(_) => false,
        };
        report.dual_route.push(dual);
    }
    for t in 0..symmetries.len().saturating_sub(gap) {
        let image = r.apply_polys(&symmetries[t])?;
        let target: Vec<ExtendedExpr> = symmetries[t + gap]
            .iter()
            .cloned()
            .map(ExtendedExpr::local)
            .collect();
        report.links.push(image == target);
    }
    Ok(report)
}

/// Coefficient of each candidate unknown, rendered `c1 = 1`.
pub fn render_coefficients(coeffs: &[BigRational]) -> Vec<String> {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| format!("c{} = {}", k + 1, render_rational(c)))
        .collect()
}

/// Groups unknown indices (1-based) by value, e.g. `{0: [2, 5], 1: [1, 3]}`.
pub fn coefficient_groups(coeffs: &[BigRational]) -> BTreeMap<BigRational, Vec<usize>> {
    let mut out: BTreeMap<BigRational, Vec<usize>> = BTreeMap::new();
    for (k, c) in coeffs.iter().enumerate() {
        out.entry(c.clone()).or_default().push(k + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_op_entry;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn toda_symmetries() -> Vec<Vec<LatticePoly>> {
        let w = WeightVector::from_ints(&[1, 2]);
        symmetry_levels(&DdeSystem::toda(), &w, 3, 6)
            .unwrap()
            .into_iter()
            .map(Option::unwrap)
            .collect()
    }

    #[test]
    fn toda_rank_matrix_and_r0() {
        let toda = DdeSystem::toda();
        let w = WeightVector::from_ints(&[1, 2]);
        let syms = toda_symmetries();
        let problem = RecursionProblem::new(&toda, &w, &syms, 1, &[]);
        let (rm, cand) = problem.candidate().unwrap();
        assert_eq!(rm.render(), "[[1, 0], [2, 1]]");
        assert_eq!(cand.local.len(), 16);
        assert_eq!(cand.nonlocal.len(), 1);
        assert_eq!(
            cand.render(toda.symbols()),
            "R(1,1) = (c1*u[0] + c2*u[1])*I\n\
             R(1,2) = c3*D^-1 + c4*I + (c17*v[-1] - c17*v[0])*S*v[0]^-1\n\
             R(2,1) = (c5*u[0]^2 + c6*u[0]*u[1] + c7*u[1]^2 + c8*v[-1] + c9*v[0])*I + \
             (c10*u[0]^2 + c11*u[0]*u[1] + c12*u[1]^2 + c13*v[-1] + c14*v[0])*D\n\
             R(2,2) = (c15*u[0] + c16*u[1])*I + (c17*u[0]*v[0] - c17*u[1]*v[0])*S*v[0]^-1\n"
        );
    }

    #[test]
    fn toda_recursion_operator() {
        let toda = DdeSystem::toda();
        let w = WeightVector::from_ints(&[1, 2]);
        let syms = toda_symmetries();
        let problem = RecursionProblem::new(&toda, &w, &syms, 1, &[]);
        let sol = problem.solve().unwrap().unwrap();
        let expected: Vec<i64> = vec![1, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 1, -1];
        assert_eq!(
            sol.coefficients,
            expected.into_iter().map(q).collect::<Vec<_>>()
        );
        let s = toda.symbols();
        let e = |t: &str| parse_op_entry(t, s).unwrap();
        assert_eq!(sol.operator.entry(0, 0), &e("u[0]*I"));
        assert_eq!(
            sol.operator.entry(0, 1),
            &e("D^-1 + I + (v[0] - v[-1])*S*(1/v[0])")
        );
        assert_eq!(sol.operator.entry(1, 0), &e("v[0]*I + v[0]*D"));
        assert_eq!(
            sol.operator.entry(1, 1),
            &e("u[1]*I + v[0]*(u[1] - u[0])*S*(1/v[0])")
        );
        assert!(sol.report.passed());
    }

    #[test]
    fn later_levels_share_the_rank_matrix() {
        let w = WeightVector::from_ints(&[1, 2]);
        let syms = toda_symmetries();
        let r = |g: &[LatticePoly]| vector_ranks(g, &w).unwrap();
        assert_eq!(
            rank_matrix(&r(&syms[1]), &r(&syms[2])).render(),
            "[[1, 0], [2, 1]]"
        );
        assert_eq!(rank_matrix(&[q(2)], &[q(3)]).render(), "[[1]]");
    }

    #[test]
    fn r1_admits_only_matching_ranks() {
        let w = WeightVector::from_ints(&[1, 2]);
        let syms = toda_symmetries();
        let rm = rank_matrix(
            &vector_ranks(&syms[0], &w).unwrap(),
            &vector_ranks(&syms[1], &w).unwrap(),
        );
        let rho1 = Covariant::Polynomial {
            rho: LatticePoly::var(VarRef::new(0, 0)),
            rank: q(1),
        };
        let covs = vec![Covariant::Logarithmic { component: 1 }, rho1];
        let blocks = build_r1(&[syms[0].clone()], &covs, &rm, &w);
        assert_eq!(
            blocks,
            vec![NonlocalBlock {
                generator: 0,
                covariant: 0
            }]
        );
        assert!(build_r1(&[], &covs, &rm, &w).is_empty());
    }

    #[test]
    fn covariant_rows() {
        let toda = DdeSystem::toda();
        let s = toda.symbols();
        let rho2 = Covariant::Polynomial {
            rho: crate::parse::parse_poly("(1/2)*u[0]^2 + v[0]", s).unwrap(),
            rank: q(2),
        };
        let row = covariant(&rho2, 2);
        assert_eq!(row[0].render(s), "u[0]*I");
        assert_eq!(row[1].render(s), "I");
    }

    #[test]
    fn broken_parameters_fail_on_symmetries() {
        let sys = DdeSystem::parameterized_toda()
            .substitute_param(0, &ParamCoeff::from_int(2))
            .substitute_param(1, &ParamCoeff::from_int(1));
        let w = WeightVector::from_ints(&[1, 2]);
        let err = solve_recursion(&sys, &w, 3, 1, 6).unwrap().unwrap_err();
        assert_eq!(err.family, ConstraintFamily::Symmetries);
        assert!(err.detail.contains("level 2"), "{}", err.detail);
        let symbolic = DdeSystem::parameterized_toda();
        let syms = toda_symmetries();
        let problem = RecursionProblem::new(&symbolic, &w, &syms, 1, &[]);
        assert!(matches!(problem.solve(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn toda_pipeline_uses_rank_one_density_but_not_in_r1() {
        let toda = DdeSystem::toda();
        let w = WeightVector::from_ints(&[1, 2]);
        let rm = rank_matrix(&[q(2), q(3)], &[q(3), q(4)]);
        assert_eq!(covariant_rank_bound(&rm, &w, &[q(2), q(3)]), q(1));
        let sol = solve_recursion(&toda, &w, 3, 1, 6).unwrap().unwrap();
        assert_eq!(sol.candidate.covariants.len(), 2);
        assert_eq!(sol.candidate.n_unknowns(), 17);
        assert_eq!(sol.report.generated.len(), 3);
    }

    #[test]
    fn logarithmic_density_detection() {
        assert_eq!(logarithmic_densities(&DdeSystem::toda()), vec![1]);
        let row = covariant(&Covariant::Logarithmic { component: 1 }, 2);
        assert!(row[0].is_zero());
        assert_eq!(row[1].render(DdeSystem::toda().symbols()), "v[0]^-1*I");
    }
}
