use clap::{Args, Parser, Subcommand};
use epicycle_harness::{execute, init_threads, Command, ExperimentSpec, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "epicycle", version, about = "Predict, verify and simulate epicyclic drifting of spiral waves")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Radial profiles, hyperbolic roots and manifold predictions.
    Analyze(CommonArgs),
    /// Integrate probes around each prediction and measure the torus.
    Verify(CommonArgs),
    /// Wedge scan over (lambda_k, lambda_j / lambda_k); resumable.
    Sweep(CommonArgs),
    /// Bidomain spiral run with tip tracking and a motion verdict.
    Bidomain(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Integration tolerance (verify, sweep).
    #[arg(long)]
    tol: Option<f64>,
    /// Forcing periods (verify, sweep) or model time (bidomain).
    #[arg(long)]
    horizon: Option<f64>,
    /// Grid points per side (bidomain).
    #[arg(long)]
    grid_n: Option<usize>,
    /// Averaging quadrature nodes (analyze, verify).
    #[arg(long)]
    quadrature_n: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, a) = match cli.command {
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Bidomain(a) => (Command::Bidomain, a),
    };
    let spec = ExperimentSpec::new(command, a.config, a.out).with_overrides(Overrides {
        tol: a.tol,
        horizon: a.horizon,
        grid_n: a.grid_n,
        quadrature_n: a.quadrature_n,
    });
    let result = init_threads().and_then(|_| execute(&spec));
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
