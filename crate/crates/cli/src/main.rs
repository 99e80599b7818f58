//! `lik`: weights, conserved densities, symmetries and recursion operators
//! of polynomial lattice systems, each checked against its defining identity.
//!
//! Exit status: 0 success, 1 usage or parse error, 2 no result, 3 a
//! verification failed.

mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Parser, Subcommand};

use commands::{Options, Outcome, Status};

const DEFAULT_BRANCH_DEPTH: usize = 6;

#[derive(Parser)]
#[command(
    name = "lik",
    version,
    about = "Integrability toolkit for differential-difference systems"
)]
struct Cli {
    /// Print the JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Fix a parameter before computing, e.g. `--param a=2`.
    #[arg(long = "param", value_name = "NAME=VALUE", global = true)]
    params: Vec<String>,
    /// Pin a weight, e.g. `--weight u=1`.
    #[arg(long = "weight", value_name = "NAME=VALUE", global = true)]
    weights: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dilation weights that make every equation uniform in rank.
    Weights { system: PathBuf },
    /// Polynomial conserved densities with their fluxes.
    #[command(group(ArgGroup::new("target").required(true).args(["rank", "max_rank"])))]
    Densities {
        system: PathBuf,
        #[arg(long)]
        rank: Option<String>,
        /// Every monomial rank up to this bound.
        #[arg(long)]
        max_rank: Option<String>,
    },
    /// Generalized symmetries.
    #[command(group(ArgGroup::new("target").required(true).args(["ranks", "levels"])))]
    Symmetries {
        system: PathBuf,
        /// One rank per component, e.g. `3,4`.
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<String>>,
        /// Levels 1..L, level k at rank offset k times the smallest weight.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Recursion operator linking consecutive symmetries.
    Recursion {
        system: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        gap: usize,
    },
    /// Check a density, a symmetry or a recursion operator from a file.
    #[command(group(ArgGroup::new("target").required(true).args(["density", "symmetry", "operator"])))]
    Verify {
        system: PathBuf,
        /// `rho = …` with an optional `flux = …` line.
        #[arg(long)]
        density: Option<PathBuf>,
        /// One `name = …` line per component.
        #[arg(long)]
        symmetry: Option<PathBuf>,
        /// `R(i,j) = …` lines.
        #[arg(long)]
        operator: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        gap: usize,
    },
    /// Check a recursion operator from a file.
    VerifyRecursion {
        system: PathBuf,
        #[arg(long)]
        operator: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        gap: usize,
    },
}

fn branch_depth() -> Result<usize, String> {
    match std::env::var("LIK_BRANCH_DEPTH") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("LIK_BRANCH_DEPTH must be a non-negative integer, got '{v}'")),
        Err(_) => Ok(DEFAULT_BRANCH_DEPTH),
    }
}

fn run(cli: Cli) -> Outcome {
    let branch_depth = match branch_depth() {
        Ok(d) => d,
        Err(e) => {
            return Outcome {
                report: None,
                diagnostics: vec![e],
                status: Status::Usage,
            }
        }
    };
    let opts = Options {
        params: cli.params,
        weights: cli.weights,
        branch_depth,
    };
    let result = (|| -> Result<Outcome, Outcome> {
        Ok(match cli.command {
            Command::Weights { system } => commands::weights(commands::open(&system, &opts)?),
            Command::Densities {
                system,
                rank,
                max_rank,
            } => commands::densities(
                commands::open(&system, &opts)?,
                rank.as_deref(),
                max_rank.as_deref(),
            ),
            Command::Symmetries {
                system,
                ranks,
                levels,
            } => commands::symmetries(commands::open(&system, &opts)?, ranks.as_deref(), levels),
            Command::Recursion {
                system,
                levels,
                gap,
            } => commands::recursion(commands::open(&system, &opts)?, levels, gap),
            Command::Verify {
                system,
                density,
                symmetry,
                operator,
                levels,
                gap,
            } => {
                let session = commands::open(&system, &opts)?;
                match (density, symmetry, operator) {
                    (Some(f), _, _) => commands::verify_density(session, &commands::read(&f)?),
                    (_, Some(f), _) => commands::verify_symmetry(session, &commands::read(&f)?),
                    (_, _, Some(f)) => {
                        commands::verify_operator(session, &commands::read(&f)?, levels, gap)
                    }
                    _ => unreachable!("clap requires one target"),
                }
            }
            Command::VerifyRecursion {
                system,
                operator,
                levels,
                gap,
            } => {
                let session = commands::open(&system, &opts)?;
                commands::verify_operator(session, &commands::read(&operator)?, levels, gap)
            }
        })
    })();
    result.unwrap_or_else(|o| o)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => Status::Usage as u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    let outcome = run(cli);
    if let Some(report) = &outcome.report {
        let text = if json {
            report.to_json()
        } else {
            report.to_text()
        };
        let _ = std::io::stdout().write_all(text.as_bytes());
    }
    for d in &outcome.diagnostics {
        eprintln!("lik: {d}");
    }
    ExitCode::from(outcome.status as u8)
}
