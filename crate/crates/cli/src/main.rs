use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use stopbound_cli::export::{check_table, checks_json};
use stopbound_cli::{
    builtin_examples, check_hypotheses, export_artifacts, find_example, load_config, run_problem,
    RunConfig,
};

#[derive(Parser)]
#[command(
    name = "stopbound",
    version,
    about = "Optimal stopping boundaries: solve, simulate, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configured problem and write artifacts.
    Solve {
        config: PathBuf,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides simulation.seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Halve dt and dx this many times.
        #[arg(long, default_value_t = 0)]
        refine: u32,
    },
    /// Built-in example gallery.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
    /// Check hypotheses only, without solving.
    Check { config: PathBuf },
}

#[derive(Subcommand)]
enum ExamplesAction {
    List,
    Run {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        refine: u32,
    },
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn solve(mut cfg: RunConfig, out: Option<PathBuf>, seed: Option<u64>, refine: u32) -> ExitCode {
    if let Some(s) = seed {
        cfg.simulation.seed = s;
    }
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    cfg.grid.nt <<= refine;
    cfg.grid.nx <<= refine;
    let start = Instant::now();
    let artifacts = match run_problem(&cfg) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    if let Err(e) = export_artifacts(&artifacts, &cfg.output.dir) {
        eprintln!("error: export stage failed: {e}");
        return ExitCode::from(EXIT_ERROR);
    }
    print!("{}", check_table(&artifacts.checks));
    eprintln!(
        "{} finished in {:.2?}; artifacts in {}",
        artifacts.run_id,
        start.elapsed(),
        cfg.output.dir.display()
    );
    if artifacts.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            config,
            out,
            seed,
            refine,
        } => match load_config(&config) {
            Ok(cfg) => solve(cfg, out, seed, refine),
            Err(e) => {
                eprintln!("error: config stage failed: {e}");
                ExitCode::from(EXIT_ERROR)
            }
        },
        Command::Examples {
            action: ExamplesAction::List,
        } => {
            for c in builtin_examples() {
                println!("{}", c.name);
            }
            ExitCode::SUCCESS
        }
        Command::Examples {
            action:
                ExamplesAction::Run {
                    name,
                    out,
                    seed,
                    refine,
                },
        } => match find_example(&name) {
            Some(cfg) => solve(cfg, out, seed, refine),
            None => {
                eprintln!(
                    "error: no built-in example named `{name}` (see `stopbound examples list`)"
                );
                ExitCode::from(EXIT_ERROR)
            }
        },
        Command::Check { config } => {
            let reports = load_config(&config)
                .map_err(|e| format!("config stage failed: {e}"))
                .and_then(|cfg| check_hypotheses(&cfg).map_err(|e| e.to_string()));
            match reports {
                Ok(r) => {
                    print!("{}", checks_json(&r));
                    eprint!("{}", check_table(&r));
                    if r.iter().any(|c| c.failed()) {
                        ExitCode::from(EXIT_CHECK_FAILED)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_ERROR)
                }
            }
        }
    }
}
