use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use circsearch_cli::{run, Command, Flags};
use clap::{Args, Parser, Subcommand};

/// Moving-target search experiments: reliability curves, Monte Carlo runs,
/// sweeps and trajectory tables.
#[derive(Parser)]
#[command(name = "circsearch", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the analytic reliability curves as curve_id,R,E rows.
    Curves(Common),
    /// Run one parameter point and write a statistics row.
    Simulate(Common),
    /// Run a Cartesian sweep over N, R, T and strategy; resumable.
    Sweep(Common),
    /// Enumerate the trajectory table and report its size.
    Trajectories(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; required by simulate and sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Override a configuration key, e.g. --set N=24 or --set model.p0=0.1.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::Curves(c) => (Command::Curves, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Trajectories(c) => (Command::Trajectories, c),
    };
    let flags = Flags {
        config: c.config,
        out: c.out,
        seed: c.seed,
        workers: c.workers,
        set: c.set,
    };
    match run(command, &flags) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("circsearch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
