use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optomech::protocols::WignerMethod;
use optomech_cli::config::{parse, RawConfig, Scenario};
use optomech_cli::run::{rerun, run_scenario, summary, RunError};

#[derive(Debug, Parser)]
#[command(name = "optomech", version, about = "Condensate-cavity optomechanics scenarios")]
struct Cli {
    /// Scenario configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for data files and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `sampling.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    CouplingMap,
    Evolve,
    Cat,
    Conditional,
    NumberStats,
    Wigner {
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Emulate a finite number of repetitions per grid point.
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Reruns a previous manifest and checks every artifact hash.
    Rerun {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Method {
    Direct,
    Counting,
    Parity,
}

fn load(path: &Option<PathBuf>) -> Result<RawConfig, RunError> {
    match path {
        None => Ok(RawConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| RunError::Io(format!("{}: {e}", p.display())))?;
            parse(&text).map_err(RunError::Validation)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        if let Command::Rerun { manifest } = &cli.command {
            return rerun(manifest, &cli.out);
        }
        let mut raw = load(&cli.config)?;
        if let Some(seed) = cli.seed {
            raw.sampling.seed = Some(seed);
        }
        let scenario = match &cli.command {
            Command::CouplingMap => Scenario::CouplingMap,
            Command::Evolve => Scenario::Evolve,
            Command::Cat => Scenario::Cat,
            Command::Conditional => Scenario::Conditional,
            Command::NumberStats => Scenario::NumberStats,
            Command::Wigner { method, shots } => {
                if let Some(m) = method {
                    raw.protocol.method = Some(match m {
                        Method::Direct => WignerMethod::Direct,
                        Method::Counting => WignerMethod::Counting,
                        Method::Parity => WignerMethod::Parity,
                    });
                }
                if let Some(n) = shots {
                    raw.sampling.shots = Some(*n);
                }
                Scenario::Wigner
            }
            Command::Rerun { .. } => unreachable!(),
        };
        run_scenario(&raw, scenario, &cli.out)
    })();
    match result {
        Ok(m) => {
            if !cli.quiet {
                for line in summary(&m) {
                    println!("{line}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
