//! What to run, where, and with which overrides.

use anyhow::{bail, ensure, Context, Result};
use epicycle_core::averaging::MIN_QUADRATURE;
use epicycle_core::cbe::SystemConfig;
use epicycle_core::verify::{VerifyOptions, MIN_STROBE_PERIODS};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Analyze,
    Verify,
    Sweep,
    Bidomain,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Bidomain => "bidomain",
        }
    }
}

/// Command-line overrides. `horizon` counts forcing periods for `verify`
/// and `sweep` and model time units for `bidomain`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub horizon: Option<f64>,
    pub grid_n: Option<usize>,
    pub quadrature_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub overrides: Overrides,
}

impl ExperimentSpec {
    pub fn new(command: Command, config: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            command,
            config: config.into(),
            out: out.into(),
            overrides: Overrides::default(),
        }
    }

    pub fn with_overrides(mut self, overrides: Overrides) -> Self {
        self.overrides = overrides;
        self
    }

    /// Checks that the config exists and that every override applies to
    /// the command and lies in its documented range.
    pub fn validate(&self) -> Result<()> {
        ensure!(self.config.is_file(), "config file {} does not exist", self.config.display());
        let o = &self.overrides;
        let cmd = self.command.name();
        let applies = match self.command {
            Command::Analyze => [false, false, false, true],
            Command::Verify => [true, true, false, true],
            Command::Sweep => [true, true, false, false],
            Command::Bidomain => [false, true, true, false],
        };
        let given = [o.tol.is_some(), o.horizon.is_some(), o.grid_n.is_some(), o.quadrature_n.is_some()];
        for (flag, (&ok, &set)) in ["--tol", "--horizon", "--grid-n", "--quadrature-n"].iter().zip(applies.iter().zip(&given)) {
            if set && !ok {
                bail!("{flag} does not apply to `{cmd}`");
            }
        }
        if let Some(tol) = o.tol {
            ensure!((1e-12..=1e-4).contains(&tol), "--tol {tol:e} outside [1e-12, 1e-4]");
        }
        if let Some(h) = o.horizon {
            ensure!(h.is_finite() && h > 0.0, "--horizon must be positive");
            if self.command != Command::Bidomain {
                ensure!(
                    h.fract() == 0.0 && h >= MIN_STROBE_PERIODS as f64,
                    "--horizon counts whole periods here and must be at least {MIN_STROBE_PERIODS}"
                );
            }
        }
        if let Some(q) = o.quadrature_n {
            ensure!(q >= MIN_QUADRATURE, "--quadrature-n {q} is below the minimum of {MIN_QUADRATURE}");
        }
        if let Some(n) = o.grid_n {
            ensure!(
                n >= bidomain_sim::params::MIN_GRID_N,
                "--grid-n {n} is below the minimum of {}",
                bidomain_sim::params::MIN_GRID_N
            );
        }
        Ok(())
    }

    pub(crate) fn verify_options(&self, mut opts: VerifyOptions) -> VerifyOptions {
        if let Some(tol) = self.overrides.tol {
            opts.tol = tol;
        }
        if let Some(h) = self.overrides.horizon {
            opts.periods = h as usize;
        }
        opts
    }
}

/// A wedge scan: a template system, the pivot center and the two grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub pivot: usize,
    pub lambda_grid: Vec<f64>,
    pub ratio_grid: Vec<f64>,
    #[serde(default)]
    pub options: VerifyOptions,
}

pub fn load_system(path: &Path) -> Result<SystemConfig> {
    SystemConfig::from_path(path).with_context(|| format!("loading {}", path.display()))
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(command: Command, overrides: Overrides) -> (tempfile::NamedTempFile, ExperimentSpec) {
        let cfg = tempfile::NamedTempFile::new().unwrap();
        let spec = ExperimentSpec::new(command, cfg.path(), "unused").with_overrides(overrides);
        (cfg, spec)
    }

    #[test]
    fn missing_config_is_rejected() {
        let spec = ExperimentSpec::new(Command::Analyze, "/nonexistent/config.json", "out");
        assert!(spec.validate().unwrap_err().to_string().contains("does not exist"));
    }

    #[test]
    fn horizon_is_whole_periods_outside_bidomain() {
        let h = |horizon| Overrides { horizon: Some(horizon), ..Default::default() };
        let (_f, s) = spec_with(Command::Verify, h(120.5));
        assert!(s.validate().is_err());
        let (_f, s) = spec_with(Command::Verify, h(MIN_STROBE_PERIODS as f64));
        s.validate().unwrap();
        let (_f, s) = spec_with(Command::Bidomain, h(120.5));
        s.validate().unwrap();
    }

    #[test]
    fn ranges_are_enforced() {
        let (_f, s) = spec_with(Command::Sweep, Overrides { tol: Some(1e-3), ..Default::default() });
        assert!(s.validate().is_err());
        let (_f, s) = spec_with(Command::Analyze, Overrides { quadrature_n: Some(MIN_QUADRATURE - 1), ..Default::default() });
        assert!(s.validate().is_err());
        let (_f, s) = spec_with(Command::Bidomain, Overrides { grid_n: Some(39), ..Default::default() });
        assert!(s.validate().is_err());
    }

    #[test]
    fn overrides_reach_verify_options() {
        let (_f, s) = spec_with(Command::Verify, Overrides { tol: Some(1e-9), horizon: Some(80.0), ..Default::default() });
        let o = s.verify_options(VerifyOptions::default());
        assert_eq!((o.tol, o.periods), (1e-9, 80));
    }
}
