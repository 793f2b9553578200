use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dlhim_cli::commands::{self, Common, SolveArgs};
use dlhim_cli::config::Scenario;
use dlhim_core::solver::Verdict;

#[derive(Parser)]
#[command(
    name = "dlhim",
    version,
    about = "Hybrid iterative solvers with learned corrections"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Write train and test datasets with manifests.
    Gen,
    /// Train correction operators and write checkpoints.
    Train {
        #[arg(long)]
        arm: Option<String>,
        #[arg(long)]
        repeat: Option<usize>,
    },
    /// Run every configured solver on one test instance.
    Solve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        arm: Option<String>,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        #[arg(long, default_value_t = 0)]
        instance: usize,
    },
    /// Run a scenario end to end and print its verdicts.
    Bench { scenario: Scenario },
    /// Print the resolved config, architectures or a checkpoint summary.
    Describe {
        #[arg(long)]
        scenario: Option<Scenario>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    let result = match &cli.verb {
        Verb::Gen => commands::gen(c),
        Verb::Train { arm, repeat } => commands::train(c, arm.as_deref(), *repeat),
        Verb::Solve {
            checkpoint,
            arm,
            repeat,
            instance,
        } => {
            let args = SolveArgs {
                checkpoint,
                arm: arm.as_deref(),
                repeat: *repeat,
                instance: *instance,
            };
            commands::solve(c, &args)
                .map(|runs| runs.iter().all(|r| r.verdict == Verdict::Converged))
        }
        Verb::Bench { scenario } => commands::bench(c, *scenario),
        Verb::Describe {
            scenario,
            checkpoint,
        } => commands::describe(c, *scenario, checkpoint.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
