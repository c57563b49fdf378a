use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tancat::{Mutation, SuiteConfig};
use tancat_cli::{exit_code, run, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "tancat",
    version,
    about = "Sampling checks for tangent structure, groupoids and their algebroids"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tangent-structure axioms on the jet tower model.
    Axioms(Flags),
    /// Groupoid, tangent groupoid, differentiability and bundle suites.
    Groupoid(Flags),
    /// Build the algebroid and check its laws, closure and classical oracles.
    Differentiate(Flags),
    /// Lie bracket laws and related fields.
    Bracket(Flags),
    /// Every suite on the builtin inputs.
    All(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    CorruptTau,
    TransposeM,
    DropUnit,
}

#[derive(Args)]
struct Flags {
    #[arg(long, env = "TANCAT_SEED", default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// Overrides every check's default tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 3)]
    max_dim: usize,
    /// Comma-separated subset of the command's suites.
    #[arg(long, value_delimiter = ',')]
    suite: Option<Vec<String>>,
    /// Spec file or `builtin:<name>`; repeatable.
    #[arg(long = "spec")]
    specs: Vec<String>,
    #[arg(long, value_enum)]
    mutate: Option<MutationArg>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Cmd::Axioms(f) => (Command::Axioms, f),
        Cmd::Groupoid(f) => (Command::Groupoid, f),
        Cmd::Differentiate(f) => (Command::Differentiate, f),
        Cmd::Bracket(f) => (Command::Bracket, f),
        Cmd::All(f) => (Command::All, f),
    };
    let config = RunConfig {
        suite: SuiteConfig {
            seed: flags.seed,
            samples: flags.samples,
            tolerance: flags.tol,
            max_dim: flags.max_dim,
            mutation: flags.mutate.map(|m| match m {
                MutationArg::CorruptTau => Mutation::CorruptTau,
                MutationArg::TransposeM => Mutation::TransposeM,
                MutationArg::DropUnit => Mutation::DropUnit,
            }),
        },
        selection: flags.suite,
        specs: flags.specs,
    };
    let report = match run(command, &config) {
        Ok(r) => r,
        Err(e @ (CliError::Input(_) | CliError::NoChecks)) => {
            eprintln!("tancat: {e}");
            return ExitCode::from(2);
        }
    };
    let json = report.to_json();
    match &flags.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("tancat: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{json}"),
    }
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    eprintln!(
        "{}: {} checks, {} failed",
        command.name(),
        report.checks.len(),
        failed.len()
    );
    for name in &failed {
        eprintln!("  FAIL {name}");
    }
    ExitCode::from(exit_code(&report) as u8)
}
