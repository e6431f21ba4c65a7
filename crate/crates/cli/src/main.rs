use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crossflux_cli::{run, Command};

#[derive(Parser)]
#[command(name = "crossflux", version, about = "Bifurcation experiments for a cross-diffusive Lotka-Volterra system")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent branches and scales.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Spectral table of the constant state.
    Analyze(Common),
    /// Trace the branches bifurcating from the constant state.
    Branches(Common),
    /// Trace the branches of the scalar limit problem.
    Limit(Common),
    /// Compare system branches with the scalar limit along a ray of flux strengths.
    Compare(Common),
    /// Evolve a perturbed constant state in time.
    Evolve(Common),
    /// Run the verification suite.
    Verify(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Analyze(c) => (Command::Analyze, c),
        Cmd::Branches(c) => (Command::Branches, c),
        Cmd::Limit(c) => (Command::Limit, c),
        Cmd::Compare(c) => (Command::Compare, c),
        Cmd::Evolve(c) => (Command::Evolve, c),
        Cmd::Verify(c) => (Command::Verify, c),
    };
    if let Some(k) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("config error: cannot start {k} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(command, &common.config, common.out.as_deref()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
