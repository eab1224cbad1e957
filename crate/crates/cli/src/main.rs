use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use unidist_cli::{catalog, parse_checks, parse_window, read_scenario, validate, verify, CheckId, Input, Options};

#[derive(Parser, Debug)]
#[command(
    name = "unidist",
    version,
    about = "Exact checks for the universal norm distribution and its Kolyvagin recursions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a scenario and check the Kolyvagin conditions.
    Validate { scenario: String },
    /// Run verification checks and write a JSON report.
    Verify {
        /// Scenario file, or a bundled name (s1..s4).
        scenario: String,
        /// Comma-separated check ids (default: all).
        #[arg(long)]
        checks: Option<String>,
        /// Degree window of the double complex, lo:hi.
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Treat skipped checks as failures.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra recursive family (JSON keyed by level name).
        #[arg(long)]
        family: Option<PathBuf>,
        /// Mock model used by euler-mock.
        #[arg(long)]
        mock: Option<PathBuf>,
    },
    /// Describe a check.
    Explain { check: String },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Option<PathBuf>) -> Result<Option<String>> {
    path.as_ref().map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))).transpose()
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { scenario } => {
            let (name, text) = read_scenario(&scenario)?;
            match validate(&text) {
                Ok(sc) => {
                    println!("{name}: ok ({} primes, M = {})", sc.num_primes(), sc.modulus);
                    Ok(0)
                }
                Err(e) => {
                    println!("{name}: invalid: {e}");
                    Ok(1)
                }
            }
        }
        Command::Verify { scenario, checks, window, seed, jobs, strict, out, family, mock } => {
            let (name, text) = read_scenario(&scenario)?;
            let sc = validate(&text).with_context(|| format!("{name} is not a valid scenario"))?;
            let checks = match checks {
                Some(c) => parse_checks(&c)?,
                None => catalog::ALL.to_vec(),
            };
            let window = window.as_deref().map(parse_window).transpose()?;
            let input = Input { name, scenario: sc, family: read(&family)?, mock: read(&mock)? };
            let opts = Options { checks, window, seed, jobs };
            let report = verify(&input, &opts, strict);
            let json = report.to_json();
            match out {
                Some(p) => {
                    std::fs::write(&p, &json).with_context(|| format!("writing {}", p.display()))?;
                    for c in &report.checks {
                        println!("{:<5} {:<20} {} ms", format!("{:?}", c.status).to_lowercase(), c.id, c.wall_time_ms);
                    }
                }
                None => print!("{json}"),
            }
            Ok(report.exit_code() as u8)
        }
        Command::Explain { check } => {
            let id: CheckId = check.parse()?;
            print!("{}", catalog::explain(id));
            Ok(0)
        }
    }
}
