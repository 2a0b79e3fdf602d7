use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use popdyn_cli::core::{GameSpec, BUILTIN_GAMES};
use popdyn_cli::{run_experiment, run_sweep, ExperimentConfig, Fixtures, HarnessError, Suite};

#[derive(Parser)]
#[command(name = "popdyn", about = "Learning dynamics in population games", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trajectory.csv and summary.json.
    Run { config: PathBuf },
    /// Run a base config once per value of a numeric leaf.
    Sweep {
        config: PathBuf,
        /// Dotted path to the swept leaf, e.g. `eps.value` or `eta.exponent`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; empty for a no-op.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Run the invariant suite from the bundled fixtures.
    Check,
    /// Print the built-in games.
    ListGames,
    /// Print the crate version.
    Version,
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_FAILED })
}

fn parse_values(text: &str) -> Result<Vec<f64>, HarnessError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|e| HarnessError::Config {
                field: "--values".into(),
                message: format!("`{s}`: {e}"),
            })
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match cli.command {
        Command::Run { config } => {
            let cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run_experiment(&cfg) {
                Ok(summary) => {
                    println!("{}", summary.to_json());
                    if summary.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILED)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { config, axis, values } => {
            let run = || -> Result<_, HarnessError> {
                let cfg = ExperimentConfig::from_path(&config)?;
                run_sweep(&cfg, &axis, &parse_values(&values)?)
            };
            match run() {
                Ok(sweep) => {
                    for r in &sweep.runs {
                        println!(
                            "{}={}  gap {}  {}",
                            sweep.axis,
                            r.value,
                            r.summary.terminal_gap.map(|g| format!("{g:.3e}")).unwrap_or_else(|| "-".into()),
                            if r.summary.passed { "ok" } else { "FAILED" }
                        );
                    }
                    if sweep.runs.iter().all(|r| r.summary.passed) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILED)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Check => {
            let suite = Suite::new(Fixtures::bundled());
            let results = suite.run_all(|r| println!("{r}"));
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} passed, {failed} failed", results.len() - failed);
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
        Command::ListGames => {
            for name in BUILTIN_GAMES {
                let spec = GameSpec::builtin(name).resolve().expect("built-in resolves");
                match spec {
                    GameSpec::Matrix { matrix, offset, .. } => {
                        let rows: Vec<String> = matrix.iter().map(|r| format!("{r:?}")).collect();
                        let off = offset.map(|o| format!(" + {o:?}")).unwrap_or_default();
                        println!("{name:<18} matrix [{}]{off}", rows.join(", "));
                    }
                    GameSpec::Congestion { slopes, .. } => println!("{name:<18} congestion slopes {slopes:?}"),
                    GameSpec::Builtin { .. } => unreachable!(),
                }
            }
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("popdyn {} (summary schema {})", env!("CARGO_PKG_VERSION"), popdyn_cli::SCHEMA_VERSION);
            ExitCode::SUCCESS
        }
    }
}
