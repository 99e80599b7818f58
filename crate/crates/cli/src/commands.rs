//! One function per subcommand, each filling a [`Report`].

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::Signed;

use lik_core::conservation::{build_density_candidate, conservation_residual, solve_density};
use lik_core::linalg::render_substitution;
use lik_core::param::render_rational;
use lik_core::parse::parse_rational;
use lik_core::recursion::{solve_recursion, verify_recursion, ConstraintFamily, RecursionReport};
use lik_core::scaling::monomials_upto_rank;
use lik_core::symmetry::{
    build_symmetry_candidate, level_offset, solve_symmetry, symmetry_levels, symmetry_ranks,
    symmetry_residual,
};
use lik_core::{
    antidifference, compute_weights, parse_density_file, parse_operator_file, parse_system,
    parse_vector_file, rank_of, total_time_derivative, Antidifference, BranchOutcome, DdeSystem,
    LatticePoly, ParamCoeff, WeightOutcome, WeightVector,
};

use crate::report::{
    DensityReport, EntryReport, Named, OperatorReport, Report, SymmetryReport, Verdict,
    WeightStatus, WeightsReport,
};

/// Exit status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Usage = 1,
    NoResult = 2,
    VerificationFailed = 3,
}

/// A finished run: the report (if one was produced), diagnostics for the
/// error stream and the exit status.
pub struct Outcome {
    pub report: Option<Report>,
    pub diagnostics: Vec<String>,
    pub status: Status,
}

impl Outcome {
    fn usage(message: impl Into<String>) -> Self {
        Outcome {
            report: None,
            diagnostics: vec![message.into()],
            status: Status::Usage,
        }
    }
}

/// Shared flags.
pub struct Options {
    pub params: Vec<String>,
    pub weights: Vec<String>,
    pub branch_depth: usize,
}

/// Parsed system with its fixed parameters, plus the report being built.
pub struct Session {
    pub sys: DdeSystem,
    pub report: Report,
    pub depth: usize,
    normalization: Vec<(usize, BigRational)>,
    diagnostics: Vec<String>,
}

fn split_assignment(text: &str) -> Result<(&str, BigRational), String> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got '{text}'"))?;
    let q = parse_rational(value)
        .ok_or_else(|| format!("'{}' is not a rational number", value.trim()))?;
    Ok((name.trim(), q))
}

impl Session {
    pub fn open(text: &str, opts: &Options) -> Result<Session, String> {
        let mut sys = parse_system(text).map_err(|e| format!("system file: {e}"))?;
        let mut fixed = Vec::new();
        for p in &opts.params {
            let (name, q) = split_assignment(p)?;
            let idx = sys
                .symbols()
                .param_index(name)
                .ok_or_else(|| format!("unknown parameter '{name}'"))?;
            fixed.push(format!("{name} = {}", render_rational(&q)));
            sys = sys.substitute_param(idx, &ParamCoeff::from_rational(q));
        }
        let mut normalization = Vec::new();
        for w in &opts.weights {
            let (name, q) = split_assignment(w)?;
            let idx = sys
                .symbols()
                .component_index(name)
                .ok_or_else(|| format!("unknown component '{name}'"))?;
            normalization.push((idx, q));
        }
        let symbols = sys.symbols();
        let report = Report {
            system: crate::report::SystemReport {
                components: symbols.components.clone(),
                params: symbols.params.clone(),
                fixed,
                equations: sys
                    .render()
                    .lines()
                    .filter(|l| !l.starts_with("params:"))
                    .map(String::from)
                    .collect(),
            },
            ..Report::default()
        };
        Ok(Session {
            sys,
            report,
            depth: opts.branch_depth,
            normalization,
            diagnostics: Vec::new(),
        })
    }

    /// The system specialized to a parameter case.
    fn under(&self, substitution: &[(usize, ParamCoeff)]) -> DdeSystem {
        substitution
            .iter()
            .fold(self.sys.clone(), |sys, (p, v)| sys.substitute_param(*p, v))
    }

    fn names(&self) -> &[String] {
        &self.sys.symbols().params
    }

    fn render(&self, p: &LatticePoly) -> String {
        p.render(self.sys.symbols())
    }

    fn finish(self, status: Status) -> Outcome {
        Outcome {
            report: Some(self.report),
            diagnostics: self.diagnostics,
            status,
        }
    }

    fn fail(mut self, status: Status, message: impl Into<String>) -> Outcome {
        self.diagnostics.push(message.into());
        self.finish(status)
    }

    /// Computes the weights and records them; `None` unless unique.
    fn weights(&mut self) -> Option<WeightVector> {
        let names = &self.sys.symbols().components;
        let named = |ws: &[BigRational]| {
            names
                .iter()
                .zip(ws)
                .map(|(n, w)| Named {
                    name: n.clone(),
                    value: render_rational(w),
                })
                .collect::<Vec<_>>()
        };
        let (report, w) = match compute_weights(&self.sys, &self.normalization) {
            WeightOutcome::Unique(w) => (
                WeightsReport {
                    status: WeightStatus::Unique,
                    values: named(w.as_slice()),
                    detail: None,
                },
                Some(w),
            ),
            WeightOutcome::Underdetermined {
                particular,
                directions,
            } => (
                WeightsReport {
                    status: WeightStatus::Underdetermined,
                    values: named(&particular),
                    detail: Some(format!(
                        "{} free direction(s); fix them with --weight NAME=VALUE",
                        directions.len()
                    )),
                },
                None,
            ),
            WeightOutcome::Inconsistent(why) => (
                WeightsReport {
                    status: WeightStatus::Inconsistent,
                    values: Vec::new(),
                    detail: Some(why),
                },
                None,
            ),
        };
        self.report.weights = Some(report);
        w
    }

    fn require_weights(&mut self) -> Result<WeightVector, String> {
        match self.weights() {
            Some(w) => match w.as_slice().iter().position(|x| !x.is_positive()) {
                Some(i) => Err(format!(
                    "component {} has non-positive weight",
                    self.sys.symbols().components[i]
                )),
                None => Ok(w),
            },
            None => Err(match &self.report.weights {
                Some(r) => format!(
                    "weights are not unique: {}",
                    r.detail.as_deref().unwrap_or("no solution")
                ),
                None => "weights unavailable".into(),
            }),
        }
    }

    fn add_condition(&mut self, c: &[String]) {
        if c.is_empty() {
            return;
        }
        let joined = c.join(", ");
        if !self.report.conditions.contains(&joined) {
            self.report.conditions.push(joined);
        }
    }

    /// Records a parameter case the solver left open. Such cases are listed
    /// with the conditions and warned about, but are not failures.
    fn note_unsettled(
        &mut self,
        what: &str,
        substitution: &[(usize, ParamCoeff)],
        outcome: &BranchOutcome,
    ) {
        let mut case = render_substitution(substitution, self.names()).join(", ");
        if case.is_empty() {
            case = "generic parameters".into();
        }
        let note = match outcome {
            BranchOutcome::DepthExhausted => {
                format!("unsettled {what}: case-split depth exhausted before the case {case}")
            }
            BranchOutcome::Unresolved(f) => {
                format!(
                    "unsettled {what}: {} = 0 not split under {case}",
                    f.render(self.names())
                )
            }
            _ => return,
        };
        self.diagnostics.push(format!("warning: {note}"));
        self.report.conditions.push(note);
    }
}

fn parse_rank(text: &str) -> Result<BigRational, String> {
    parse_rational(text).ok_or_else(|| format!("invalid rank '{text}'"))
}

pub fn weights(mut s: Session) -> Outcome {
    match s.weights() {
        Some(_) => s.finish(Status::Success),
        None => s.fail(Status::NoResult, "no unique weights"),
    }
}

/// Densities at one rank or at every monomial rank up to a bound.
pub fn densities(mut s: Session, rank: Option<&str>, max_rank: Option<&str>) -> Outcome {
    let w = match s.require_weights() {
        Ok(w) => w,
        Err(e) => return s.fail(Status::NoResult, e),
    };
    let ranks: Vec<BigRational> = match (rank, max_rank) {
        (Some(r), None) => match parse_rank(r) {
            Ok(r) => vec![r],
            Err(e) => return s.fail(Status::Usage, e),
        },
        (None, Some(r)) => {
            let bound = match parse_rank(r) {
                Ok(r) => r,
                Err(e) => return s.fail(Status::Usage, e),
            };
            match monomials_upto_rank(&w, &bound, &s.sys) {
                Ok(ms) => ms
                    .iter()
                    .map(|m| rank_of(m, &w))
                    .filter(|r| r.is_positive())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
                Err(e) => return s.fail(Status::Usage, e.to_string()),
            }
        }
        _ => return s.fail(Status::Usage, "give exactly one of --rank and --max-rank"),
    };
    let mut found = 0;
    for r in &ranks {
        let cand = match build_density_candidate(&s.sys, &w, r) {
            Ok(c) => c,
            Err(e) => return s.fail(Status::Usage, e.to_string()),
        };
        let out = solve_density(&cand, &s.sys, s.depth);
        for b in &out.unsettled {
            s.note_unsettled(
                &format!("densities of rank {}", render_rational(r)),
                &b.substitution,
                &b.outcome,
            );
        }
        for d in out.results {
            found += 1;
            let conditions = render_substitution(&d.substitution, s.names());
            s.add_condition(&conditions);
            let residual = conservation_residual(&s.under(&d.substitution), &d.rho, &d.flux);
            s.report.verification.push(Verdict::new(
                "conservation",
                residual.is_zero(),
                format!(
                    "rank {}: Dt(rho) + Delta(flux) {}",
                    render_rational(r),
                    if residual.is_zero() {
                        "= 0".to_string()
                    } else {
                        format!("= {}", s.render(&residual))
                    }
                ),
            ));
            s.report.densities.push(DensityReport {
                rank: render_rational(r),
                rho: s.render(&d.rho),
                flux: s.render(&d.flux),
                conditions,
            });
        }
    }
    if !s.report.all_passed() {
        return s.fail(
            Status::VerificationFailed,
            "a density failed its conservation check",
        );
    }
    if found == 0 {
        let what = ranks
            .iter()
            .map(render_rational)
            .collect::<Vec<_>>()
            .join(", ");
        return s.fail(
            Status::NoResult,
            format!("no conserved density of rank {what}"),
        );
    }
    s.finish(Status::Success)
}

/// Symmetries at explicit ranks or at levels `1..=L`.
pub fn symmetries(mut s: Session, ranks: Option<&[String]>, levels: Option<usize>) -> Outcome {
    let w = match s.require_weights() {
        Ok(w) => w,
        Err(e) => return s.fail(Status::NoResult, e),
    };
    let targets: Vec<Vec<BigRational>> = match (ranks, levels) {
        (Some(rs), None) => {
            let parsed: Result<Vec<_>, _> = rs.iter().map(|r| parse_rank(r)).collect();
            match parsed {
                Ok(p) => vec![p],
                Err(e) => return s.fail(Status::Usage, e),
            }
        }
        (None, Some(l)) => (1..=l)
            .map(|k| symmetry_ranks(&w, &level_offset(&w, k)))
            .collect(),
        _ => return s.fail(Status::Usage, "give exactly one of --ranks and --levels"),
    };
    let mut missing = Vec::new();
    for ranks in &targets {
        let n = s.sys.n_components();
        if ranks.len() != n {
            return s.fail(
                Status::Usage,
                format!("--ranks needs {n} values, one per component"),
            );
        }
        let label = ranks.iter().map(render_rational).collect::<Vec<_>>();
        let cand = match build_symmetry_candidate(&s.sys, &w, ranks) {
            Ok(c) => c,
            Err(e) => return s.fail(Status::Usage, e.to_string()),
        };
        let out = solve_symmetry(&cand, &s.sys, s.depth);
        for b in &out.branches {
            s.note_unsettled(
                &format!("symmetries of ranks ({})", label.join(", ")),
                &b.substitution,
                &b.outcome,
            );
        }
        if out.results.is_empty() {
            missing.push(label.join(","));
        }
        for g in out.results {
            let conditions = render_substitution(&g.substitution, s.names());
            s.add_condition(&conditions);
            let residual = symmetry_residual(&s.under(&g.substitution), &g.components);
            let ok = residual.iter().all(LatticePoly::is_zero);
            s.report.verification.push(Verdict::new(
                "symmetry",
                ok,
                format!(
                    "ranks ({}): Dt(G) - F'[G] {}",
                    label.join(", "),
                    if ok { "= 0" } else { "!= 0" }
                ),
            ));
            let components = s
                .sys
                .symbols()
                .components
                .iter()
                .zip(&g.components)
                .map(|(n, p)| Named {
                    name: n.clone(),
                    value: s.render(p),
                })
                .collect();
            s.report.symmetries.push(SymmetryReport {
                ranks: label.clone(),
                components,
                conditions,
            });
        }
    }
    if !s.report.all_passed() {
        return s.fail(
            Status::VerificationFailed,
            "a symmetry failed its residual check",
        );
    }
    if !missing.is_empty() {
        return s.fail(
            Status::NoResult,
            format!("no symmetry of ranks ({})", missing.join("), (")),
        );
    }
    s.finish(Status::Success)
}

fn record_recursion_checks(s: &mut Session, r: &RecursionReport, n_syms: usize, gap: usize) {
    let n = r.generated.len();
    let gen_ok = n > 0 && r.theta_free.iter().all(|&b| b) && r.symmetric.iter().all(|&b| b);
    let levels = (2..=n + 1)
        .map(|k| format!("G({k})"))
        .collect::<Vec<_>>()
        .join(", ");
    let detail = if gen_ok {
        format!("generates {levels}: verified")
    } else {
        let bad: Vec<String> = r
            .theta_free
            .iter()
            .zip(&r.symmetric)
            .enumerate()
            .filter(|(_, (t, s))| !(**t && **s))
            .map(|(k, (t, _))| {
                format!(
                    "G({}) {}",
                    k + 2,
                    if *t {
                        "is not a symmetry"
                    } else {
                        "keeps a nonlocal term"
                    }
                )
            })
            .collect();
        format!(
            "iterating from G(1): {}",
            if bad.is_empty() {
                "nothing generated".into()
            } else {
                bad.join("; ")
            }
        )
    };
    s.report
        .verification
        .push(Verdict::new("generation", gen_ok, detail));
    let probe_ok = r.probes.iter().all(|&b| b);
    let targets = (1..=n_syms)
        .map(|k| format!("G({k})"))
        .collect::<Vec<_>>()
        .join(", ");
    s.report.verification.push(Verdict::new(
        "defining-equation",
        probe_ok,
        format!(
            "R'[F] + R o F' - F' o R {} on {targets}",
            if probe_ok {
                "vanishes"
            } else {
                "does not vanish"
            }
        ),
    ));
    let dual_ok = r.dual_route.iter().all(|&b| b);
    s.report.verification.push(Verdict::new(
        "operator-residual",
        dual_ok,
        if dual_ok {
            "operator-level residual agrees with the probes".to_string()
        } else {
            "operator-level residual disagrees with the probes".to_string()
        },
    ));
    let links_ok = r.links.iter().all(|&b| b);
    s.report.verification.push(Verdict::new(
        "interpolation",
        links_ok,
        format!(
            "R G(j) {} G(j+{gap}) for j = 1..{}",
            if links_ok { "=" } else { "!=" },
            r.links.len()
        ),
    ));
}

pub fn recursion(mut s: Session, levels: usize, gap: usize) -> Outcome {
    if !s.sys.is_numeric() {
        return s.fail(
            Status::Usage,
            "recursion operators need numeric parameters; fix them with --param NAME=VALUE",
        );
    }
    let w = match s.require_weights() {
        Ok(w) => w,
        Err(e) => return s.fail(Status::NoResult, e),
    };
    let solved = match solve_recursion(&s.sys, &w, levels, gap, s.depth) {
        Ok(x) => x,
        Err(e) => return s.fail(Status::Usage, e.to_string()),
    };
    match solved {
        Ok(sol) => {
            let symbols = s.sys.symbols().clone();
            let n = sol.operator.dim();
            let entries = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| EntryReport {
                    row: i + 1,
                    col: j + 1,
                    entry: sol.operator.entry(i, j).render(&symbols),
                })
                .collect();
            s.report.recursion_operator = Some(OperatorReport {
                rank_matrix: sol
                    .rank_matrix
                    .rows()
                    .iter()
                    .map(|r| r.iter().map(render_rational).collect())
                    .collect(),
                unknowns: sol.candidate.n_unknowns(),
                coefficients: lik_core::recursion::render_coefficients(&sol.coefficients),
                entries,
            });
            record_recursion_checks(&mut s, &sol.report, levels, gap);
            if s.report.all_passed() {
                s.finish(Status::Success)
            } else {
                s.fail(
                    Status::VerificationFailed,
                    "the recursion operator failed verification",
                )
            }
        }
        Err(no) => {
            s.report.verification.push(Verdict::new(
                "recursion",
                false,
                format!("{} constraints failed: {}", no.family, no.detail),
            ));
            let status = match no.family {
                ConstraintFamily::Verification => Status::VerificationFailed,
                _ => Status::NoResult,
            };
            let message = format!(
                "no recursion operator: {} constraints failed: {}",
                no.family, no.detail
            );
            s.fail(status, message)
        }
    }
}

pub fn verify_density(mut s: Session, text: &str) -> Outcome {
    let (rho, flux) = match parse_density_file(text, s.sys.symbols()) {
        Ok(x) => x,
        Err(e) => return s.fail(Status::Usage, format!("density file: {e}")),
    };
    let (ok, detail) = match flux {
        Some(j) => {
            let residual = conservation_residual(&s.sys, &rho, &j);
            if residual.is_zero() {
                (true, "Dt(rho) + Delta(flux) = 0".to_string())
            } else {
                (
                    false,
                    format!("Dt(rho) + Delta(flux) = {}", s.render(&residual)),
                )
            }
        }
        None => match antidifference(&total_time_derivative(&rho, &s.sys)) {
            Antidifference::Exact(q) => (
                true,
                format!("Dt(rho) + Delta(flux) = 0 with flux = {}", s.render(&-q)),
            ),
            Antidifference::NotExact { canonical, .. } => (
                false,
                format!(
                    "Dt(rho) is not a forward difference; remainder {}",
                    s.render(&canonical)
                ),
            ),
        },
    };
    s.report
        .verification
        .push(Verdict::new("conservation", ok, detail));
    if ok {
        s.finish(Status::Success)
    } else {
        s.fail(Status::VerificationFailed, "density is not conserved")
    }
}

pub fn verify_symmetry(mut s: Session, text: &str) -> Outcome {
    let g = match parse_vector_file(text, s.sys.symbols()) {
        Ok(g) => g,
        Err(e) => return s.fail(Status::Usage, format!("symmetry file: {e}")),
    };
    let residual = symmetry_residual(&s.sys, &g);
    let ok = residual.iter().all(LatticePoly::is_zero);
    let detail = if ok {
        "Dt(G) - F'[G] = 0".to_string()
    } else {
        let parts: Vec<String> = s
            .sys
            .symbols()
            .components
            .iter()
            .zip(&residual)
            .filter(|(_, r)| !r.is_zero())
            .map(|(n, r)| format!("{n}: {}", s.render(r)))
            .collect();
        format!("Dt(G) - F'[G] != 0 ({})", parts.join("; "))
    };
    s.report
        .verification
        .push(Verdict::new("symmetry", ok, detail));
    if ok {
        s.finish(Status::Success)
    } else {
        s.fail(Status::VerificationFailed, "not a symmetry")
    }
}

pub fn verify_operator(mut s: Session, text: &str, levels: usize, gap: usize) -> Outcome {
    if !s.sys.is_numeric() {
        return s.fail(
            Status::Usage,
            "recursion operators need numeric parameters; fix them with --param NAME=VALUE",
        );
    }
    let op = match parse_operator_file(text, s.sys.symbols()) {
        Ok(op) => op,
        Err(e) => return s.fail(Status::Usage, format!("operator file: {e}")),
    };
    if op.dim() != s.sys.n_components() {
        return s.fail(Status::Usage, "operator size does not match the system");
    }
    let w = match s.require_weights() {
        Ok(w) => w,
        Err(e) => return s.fail(Status::NoResult, e),
    };
    let syms = match symmetry_levels(&s.sys, &w, levels, s.depth) {
        Ok(l) => l.into_iter().map_while(|g| g).collect::<Vec<_>>(),
        Err(e) => return s.fail(Status::Usage, e.to_string()),
    };
    if syms.is_empty() {
        return s.fail(Status::NoResult, "no symmetry at level 1 to start from");
    }
    let report = match verify_recursion(&s.sys, &op, &syms, gap, levels) {
        Ok(r) => r,
        Err(e) => return s.fail(Status::VerificationFailed, e.to_string()),
    };
    let n = syms.len();
    record_recursion_checks(&mut s, &report, n, gap);
    if s.report.all_passed() {
        s.finish(Status::Success)
    } else {
        s.fail(
            Status::VerificationFailed,
            "the operator failed verification",
        )
    }
}

/// Reads the system file and opens a session, mapping failures to usage
/// errors.
pub fn open(path: &std::path::Path, opts: &Options) -> Result<Session, Outcome> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Outcome::usage(format!("cannot read {}: {e}", path.display())))?;
    Session::open(&text, opts).map_err(Outcome::usage)
}

pub fn read(path: &std::path::Path) -> Result<String, Outcome> {
    std::fs::read_to_string(path)
        .map_err(|e| Outcome::usage(format!("cannot read {}: {e}", path.display())))
}
