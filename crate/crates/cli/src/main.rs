use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use confein::curvature::Tolerances;
use confein::genericity::Policy;
use confein_cli::commands::{self, CliError, Input, Options, Outcome};

/// Decide whether a coordinate metric is locally conformally Einstein.
///
/// Exit status: 0 conformally Einstein, 1 not, 2 inconclusive, 3 input error.
#[derive(Parser)]
#[command(name = "confein", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Relative tolerance for vanishing residuals.
    #[arg(long, default_value_t = 1e-8, allow_negative_numbers = true)]
    tol_rel: f64,
    /// Absolute floor added to every tolerance.
    #[arg(long, default_value_t = 1e-12, allow_negative_numbers = true)]
    tol_abs: f64,
    /// Relative singular-value cutoff for rank decisions.
    #[arg(long, default_value_t = 1e-8, allow_negative_numbers = true)]
    rank_tol: f64,
    /// Number of sample points (ignored when the file lists points).
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dual tensor: from-L, from-C, dim4-C3 or auto.
    #[arg(long, default_value = "auto", value_parser = policy_arg)]
    policy: PolicyArg,
    /// Write the JSON report here.
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,
}

#[derive(Clone)]
struct PolicyArg(Option<Policy>);

fn policy_arg(s: &str) -> Result<PolicyArg, String> {
    commands::parse_policy(s).map(PolicyArg)
}

#[derive(Subcommand)]
enum Command {
    /// Run genericity, obstruction and tractor-rank tests.
    Classify {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate selected invariants.
    Invariants {
        file: PathBuf,
        /// Comma-separated: F1,F2,E,G,Gbar,dim4,cspace,bach.
        #[arg(long, default_value = "F1,F2,E,G,Gbar,dim4,cspace,bach")]
        which: String,
        #[command(flatten)]
        common: Common,
    },
    /// Check the curvature identities.
    Identities {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Tractor rank test, and the parallel-tractor check for a scale.
    Tractor {
        file: PathBuf,
        /// Candidate Einstein scale σ.
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Built-in fixtures.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List,
    /// Print an entry as a metric file.
    Export {
        name: String,
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

impl Common {
    fn options(&self) -> Options {
        Options {
            tol: Tolerances { tol_rel: self.tol_rel, tol_abs: self.tol_abs, rank_tol: self.rank_tol },
            points: self.points,
            seed: self.seed,
            policy: self.policy.0,
        }
    }
}

fn write(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn finish(outcome: Outcome, common: &Common) -> Result<i32, CliError> {
    print!("{}", outcome.summary);
    if let Some(path) = &common.json {
        write(path, &outcome.json)?;
    }
    Ok(outcome.code)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Classify { file, common } => finish(commands::classify(&Input::from_path(&file)?, &common.options())?, &common),
        Command::Invariants { file, which, common } => {
            let which = commands::parse_which(&which)?;
            finish(commands::invariants(&Input::from_path(&file)?, &common.options(), &which)?, &common)
        }
        Command::Identities { file, common } => finish(commands::identities(&Input::from_path(&file)?, &common.options())?, &common),
        Command::Tractor { file, sigma, common } => {
            finish(commands::tractor(&Input::from_path(&file)?, &common.options(), sigma.as_deref())?, &common)
        }
        Command::Catalog { action: CatalogAction::List } => {
            print!("{}", commands::catalog_list());
            Ok(0)
        }
        Command::Catalog { action: CatalogAction::Export { name, output } } => {
            let text = commands::catalog_export(&name)?;
            match output {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
