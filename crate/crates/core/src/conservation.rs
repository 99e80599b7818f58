//! Polynomial conserved densities and their fluxes.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::Result;
use crate::expr::{delta_decompose, total_time_derivative, LatticeMonomial, LatticePoly, Symbols};
use crate::linalg::{apply_substitution, parametric_solve, Branch, BranchOutcome, LinearSystem};
use crate::param::ParamCoeff;
use crate::scaling::{derivative_completion, monomials_upto_rank, WeightVector};
use crate::system::DdeSystem;

/// `ρ = Σ c_k m_k` over canonical monomials of one rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityCandidate {
    pub rank: BigRational,
    pub monomials: Vec<LatticeMonomial>,
}

impl DensityCandidate {
    pub fn n_unknowns(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn instantiate(&self, coeffs: &[ParamCoeff]) -> LatticePoly {
        LatticePoly::from_terms(self.monomials.iter().cloned().zip(coeffs.iter().cloned()))
    }

    /// `c1*u[0]^3 + c2*u[0]*v[-1] + …`
    pub fn render(&self, symbols: &Symbols) -> String {
        self.monomials
            .iter()
            .enumerate()
            .map(|(k, m)| format!("c{}*{}", k + 1, m.render(symbols)))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// A density with its flux. `flux` satisfies `Dₜρ + Δflux = 0`;
/// `flux_decomposition` is the telescoping part of `Dₜρ` itself, so it is
/// the negative of `flux`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityResult {
    pub rank: BigRational,
    pub rho: LatticePoly,
    pub flux: LatticePoly,
    pub flux_decomposition: LatticePoly,
    /// Parameter assignments under which the density exists.
    pub substitution: Vec<(usize, ParamCoeff)>,
}

/// Densities found at one rank plus any parameter cases left unsettled.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DensityOutcome {
    pub results: Vec<DensityResult>,
    pub unsettled: Vec<Branch>,
}

/// Candidate of rank `rank`: the canonical monomials reached from every
/// lower-rank monomial by time derivatives.
pub fn build_density_candidate(
    sys: &DdeSystem,
    w: &WeightVector,
    rank: &BigRational,
) -> Result<DensityCandidate> {
    let ms = monomials_upto_rank(w, rank, sys)?;
    Ok(DensityCandidate {
        rank: rank.clone(),
        monomials: derivative_completion(&ms, w, rank, sys),
    })
}

/// Linear system "canonical part of `Dₜρ` vanishes" together with the
/// telescoping flux of each unknown's block.
pub fn density_system(
    cand: &DensityCandidate,
    sys: &DdeSystem,
) -> (LinearSystem, Vec<LatticePoly>) {
    let mut contributions = Vec::new();
    let mut fluxes = Vec::new();
    for (k, m) in cand.monomials.iter().enumerate() {
        let dt = total_time_derivative(&LatticePoly::monomial(m.clone()), sys);
        let dec = delta_decompose(&dt);
        for (mono, c) in dec.canonical.terms() {
            contributions.push((k, mono.clone(), c.clone()));
        }
        fluxes.push(dec.flux);
    }
    (
        LinearSystem::from_contributions(cand.n_unknowns(), contributions),
        fluxes,
    )
}

/// Solves for every density in the span of the candidate. Parameterized
/// systems are split into cases; each case with solutions contributes
/// densities tagged with its parameter assignments.
pub fn solve_density(cand: &DensityCandidate, sys: &DdeSystem, max_depth: usize) -> DensityOutcome {
    let mut out = DensityOutcome::default();
    if cand.is_empty() {
        return out;
    }
    let (lin, fluxes) = density_system(cand, sys);
    for branch in parametric_solve(&lin, max_depth) {
        match &branch.outcome {
            BranchOutcome::Solutions(basis) => {
                for v in basis {
                    let subst = &branch.substitution;
                    let rho = cand
                        .instantiate(v)
                        .map_coeffs(|c| apply_substitution(c, subst));
                    let mut j_dec = LatticePoly::zero();
                    for (x, f) in v.iter().zip(&fluxes) {
                        if !x.is_zero() {
                            j_dec += &f.scale(x);
                        }
                    }
                    let j_dec = j_dec.map_coeffs(|c| apply_substitution(c, subst));
                    let scale = density_normalization(&rho);
                    let rho = rho.scale_rational(&scale);
                    let j_dec = j_dec.scale_rational(&scale);
                    out.results.push(DensityResult {
                        rank: cand.rank.clone(),
                        rho,
                        flux: -&j_dec,
                        flux_decomposition: j_dec,
                        substitution: subst.clone(),
                    });
                }
            }
            BranchOutcome::NoCandidate => {}
            BranchOutcome::DepthExhausted | BranchOutcome::Unresolved(_) => {
                out.unsettled.push(branch.clone())
            }
        }
    }
    out
}

/// Factor that gives the first pure power `x^e` of a zero-shift variable
/// coefficient `1/e`, or else makes the first coefficient one. Coefficients
/// that still depend on parameters are left alone.
pub fn density_normalization(rho: &LatticePoly) -> BigRational {
    let pure = rho.terms().find_map(|(m, c)| match m.factors() {
        [(v, e)] if v.shift == 0 && *e > 0 => Some((c.clone(), *e)),
        _ => None,
    });
    let (c, target) = match pure {
        Some((c, e)) => (c, BigRational::new(1.into(), e.into())),
        None => match rho.terms().next() {
            Some((_, c)) => (c.clone(), BigRational::from_integer(1.into())),
            None => return BigRational::from_integer(1.into()),
        },
    };
    match c.as_rational() {
        Some(q) if !q.is_zero() => target / q,
        _ => BigRational::from_integer(1.into()),
    }
}

/// `Dₜρ + Δflux`, which vanishes exactly for a conservation law.
pub fn conservation_residual(
    sys: &DdeSystem,
    rho: &LatticePoly,
    flux: &LatticePoly,
) -> LatticePoly {
    &total_time_derivative(rho, sys) + &flux.delta()
}

/// A density is trivial when it is a forward difference.
pub fn is_trivial(rho: &LatticePoly) -> bool {
    delta_decompose(rho).canonical.is_zero()
}

/// Nonzero rational `k` with `ρ₁ + kρ₂ = Δψ` for some `ψ`, if one exists.
pub fn equivalent(rho1: &LatticePoly, rho2: &LatticePoly) -> Option<BigRational> {
    let c1 = delta_decompose(rho1).canonical;
    let c2 = delta_decompose(rho2).canonical;
    let (m, a2) = c2.terms().next()?;
    let a1 = c1.coeff(m);
    let k = -(a1.as_rational()? / a2.as_rational()?);
    if k.is_zero() {
        return None;
    }
    let sum = &c1 + &c2.scale_rational(&k);
    sum.is_zero().then_some(k)
}
