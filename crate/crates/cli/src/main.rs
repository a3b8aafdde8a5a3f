use std::path::PathBuf;
use std::process::ExitCode;

use autocurriculum::harness::{self, Command, Profile, Settings};
use autocurriculum::Execution;
use clap::{Parser, Subcommand};

/// Train and evaluate learned meta-solvers for population-based game solving.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Flat TOML config; keys not given take the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "desk")]
    profile: Profile,
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Train a meta-solver and write checkpoint.json and history.csv.
    Train,
    /// Run PSRO with a trained solver on held-out games.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated GoS dimensions; one results file per dimension.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
    },
    /// Run the uniform, Nash and last-agent baselines on the held-out games.
    Baselines,
    /// Train at the configured GoS dimension and evaluate across dimensions.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Skip training and sweep this solver.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Validate meta-gradients and the ES estimator.
    Gradcheck,
}

fn settings(cli: &Cli) -> autocurriculum::Result<Settings> {
    let mut s = match &cli.config {
        Some(path) => Settings::load(path, cli.profile)?,
        None => Settings::parse("", cli.profile)?,
    };
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(out) = &cli.out {
        s.out_dir = out.clone();
    }
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match &cli.command {
        Sub::Train => Command::Train,
        Sub::Eval { checkpoint, dims } => Command::Eval {
            checkpoint: checkpoint.clone(),
            dims: dims.clone(),
        },
        Sub::Baselines => Command::Baselines,
        Sub::Sweep { dims, checkpoint } => Command::Sweep {
            dims: dims.clone(),
            checkpoint: checkpoint.clone(),
        },
        Sub::Gradcheck => Command::Gradcheck,
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = settings(&cli).and_then(|s| harness::run(&command, &s, exec));
    match result {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            let code = if report.passed {
                harness::EXIT_OK
            } else {
                harness::EXIT_CHECK_FAILED
            };
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
