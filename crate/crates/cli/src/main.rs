use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mecaloc::harness::{cmd_fuse, cmd_metrics, cmd_simulate, FuseArgs, SimulateArgs};

/// Mecanum odometry + ultrasonic IPS fusion experiments.
#[derive(Debug, Parser)]
#[command(name = "mecaloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the square-loop experiment and evaluate all three estimators.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Base seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of Monte Carlo runs.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run odometry and the EKF over a recorded trajectory log.
    Fuse {
        #[arg(long)]
        input: PathBuf,
        /// Config whose [filter] section is used.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the error summary of a trajectory log.
    Metrics {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (mut stdout, mut stderr) = (io::stdout(), io::stderr());
    let code = match cli.command {
        Command::Simulate {
            config,
            seed,
            runs,
            out,
        } => cmd_simulate(
            &SimulateArgs {
                config,
                seed,
                runs,
                out,
            },
            &mut stdout,
            &mut stderr,
        ),
        Command::Fuse { input, config, out } => {
            cmd_fuse(&FuseArgs { input, config, out }, &mut stdout, &mut stderr)
        }
        Command::Metrics { input } => cmd_metrics(&input, &mut stdout, &mut stderr),
    };
    ExitCode::from(code as u8)
}
