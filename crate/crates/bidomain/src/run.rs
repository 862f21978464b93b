//! A complete simulation: initiation, stepping, tip sampling, checkpoints
//! and the final motion report.

use serde::{Deserialize, Serialize};

use crate::epicycle::{detect_epicycle, EpicycleReport, EpicycleThresholds, TipPath};
use crate::error::{Result, SimError};
use crate::init::{initiate_spiral, CrossField};
use crate::params::BidomainParams;
use crate::sim::{BidomainState, Simulator, TipSample};
use crate::tip::track_tip;

/// Documented bound on both fields along any run.
pub const FIELD_BOUND: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub params: BidomainParams,
    pub protocol: CrossField,
    pub horizon: f64,
    /// Steps between tip samples.
    pub tip_every: usize,
    /// Time between checkpoints; none when absent.
    pub checkpoint_every: Option<f64>,
    pub thresholds: EpicycleThresholds,
}

impl Default for RunSpec {
    fn default() -> Self {
        let params = BidomainParams::default();
        RunSpec {
            thresholds: EpicycleThresholds {
                pivot: params.tsb_center,
                domain: Some(params.domain),
                ..Default::default()
            },
            params,
            protocol: CrossField::default(),
            horizon: 20000.0,
            tip_every: 5,
            checkpoint_every: None,
        }
    }
}

impl RunSpec {
    /// The same run on the isotropic medium without the perturbation.
    pub fn control(&self) -> Self {
        RunSpec {
            params: self.params.control(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: u64,
    pub t_end: f64,
    pub tip_samples: usize,
    pub max_abs_u: f64,
    pub max_abs_v: f64,
    pub mean_psi_iterations: f64,
    pub report: Option<EpicycleReport>,
    /// Why no report was produced.
    pub report_error: Option<String>,
}

pub struct RunOutput {
    pub state: BidomainState,
    pub path: TipPath,
    pub summary: RunSummary,
}

/// Runs `spec`, calling `checkpoint` at the requested cadence and once at
/// the end.
pub fn run(spec: &RunSpec, mut checkpoint: impl FnMut(&BidomainState) -> Result<()>) -> Result<RunOutput> {
    if !(spec.horizon.is_finite() && spec.horizon > 0.0) || spec.tip_every == 0 {
        return Err(SimError::InvalidParams("horizon must be positive and tip_every nonzero".into()));
    }
    let mut sim = Simulator::new(spec.params.clone())?;
    let mut state = initiate_spiral(&spec.params, &spec.protocol);
    let dt = spec.params.dt;
    let steps = (spec.horizon / dt).round() as u64;
    let mut last_tip = None;
    let mut next_ckpt = spec.checkpoint_every;
    let (mut mu, mut mv) = state.max_abs();
    let mut psi_iters = 0usize;
    for k in 0..steps {
        let sample = (k + 1) % spec.tip_every as u64 == 0;
        let prev = sample.then(|| state.u.clone());
        sim.step(&mut state, dt)?;
        psi_iters += sim.last_psi.map_or(0, |s| s.iterations);
        let (a, b) = state.max_abs();
        mu = mu.max(a);
        mv = mv.max(b);
        if let Some(prev) = prev {
            if let Some((x, y)) = track_tip(&sim.grid, &prev, &state.u, last_tip) {
                state.tip_path.push(TipSample { t: state.t, x, y });
                last_tip = Some((x, y));
            }
        }
        if let (Some(at), Some(every)) = (next_ckpt, spec.checkpoint_every) {
            if state.t + 0.5 * dt >= at {
                checkpoint(&state)?;
                next_ckpt = Some(at + every);
            }
        }
    }
    checkpoint(&state)?;
    let (path, report, report_error) = match detect_epicycle(&state.tip_path, &spec.thresholds) {
        Ok((p, r)) => (p, Some(r), None),
        Err(e) => (
            TipPath {
                samples: state.tip_path.clone(),
                meander_center_track: Vec::new(),
            },
            None,
            Some(e.to_string()),
        ),
    };
    let summary = RunSummary {
        steps,
        t_end: state.t,
        tip_samples: state.tip_path.len(),
        max_abs_u: mu,
        max_abs_v: mv,
        mean_psi_iterations: psi_iters as f64 / steps.max(1) as f64,
        report,
        report_error,
    };
    Ok(RunOutput { state, path, summary })
}
