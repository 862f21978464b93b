//! Experiment orchestration for the `epicycle` command-line tool.
//!
//! Each command reads a JSON config, writes its artifacts under the output
//! directory and finishes with a [`RunManifest`]. Scientific disagreement is
//! reported in the output, never through the exit status; only operational
//! errors surface as `Err`.

pub mod analyze;
pub mod bidomain;
pub mod manifest;
pub mod spec;
pub mod sweep;
pub mod verify;

pub use manifest::{read_manifest, RunManifest, RunStatus};
pub use spec::{Command, ExperimentSpec, Overrides, SweepConfig};

/// Caps the worker pool when set to a positive integer.
pub const THREADS_ENV: &str = "EPICYCLE_THREADS";

/// What a finished command hands back: its manifest and the summary lines
/// printed to stdout.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub lines: Vec<String>,
}

pub fn execute(spec: &ExperimentSpec) -> anyhow::Result<Outcome> {
    match spec.command {
        Command::Analyze => analyze::cmd_analyze(spec),
        Command::Verify => verify::cmd_verify(spec),
        Command::Sweep => sweep::cmd_sweep(spec),
        Command::Bidomain => bidomain::cmd_bidomain(spec),
    }
}

/// Applies the thread cap from the environment to the global pool and
/// returns the pool size. A pool that already exists is left alone.
pub fn init_threads() -> anyhow::Result<usize> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
        anyhow::ensure!(n > 0, "{THREADS_ENV} must be positive");
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}
