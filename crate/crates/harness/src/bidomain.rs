use anyhow::{anyhow, Result};
use bidomain_sim::io::{write_checkpoint, write_tip_csv};
use bidomain_sim::{run, RunSpec, SimError};

use crate::manifest::{OutDir, RunStatus};
use crate::spec::{load_json, ExperimentSpec};
use crate::Outcome;

/// The run spec after overrides.
pub fn resolve_run_spec(spec: &ExperimentSpec) -> Result<RunSpec> {
    let mut rs: RunSpec = load_json(&spec.config)?;
    if let Some(n) = spec.overrides.grid_n {
        rs.params.grid_n = n;
    }
    if let Some(h) = spec.overrides.horizon {
        rs.horizon = h;
    }
    rs.params.validate()?;
    Ok(rs)
}

pub fn cmd_bidomain(spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate()?;
    let rs = resolve_run_spec(spec)?;
    let echo = serde_json::to_value(&rs)?;
    let mut out = OutDir::create(&spec.out)?;
    let result = out.stage("simulate", |out| {
        Ok(run(&rs, |state| {
            let rel = format!("checkpoints/step_{:08}", state.step);
            let stem = out.path(&rel);
            std::fs::create_dir_all(stem.parent().expect("checkpoint dir"))?;
            write_checkpoint(&stem, state, &rs.params)?;
            for ext in ["json", "bin"] {
                out.record(&format!("{rel}.{ext}")).map_err(|e| SimError::Format(e.to_string()))?;
            }
            Ok(())
        }))
    })?;
    let output = match result {
        Ok(o) => o,
        Err(SimError::NonFinite { step, t }) => {
            let reason = format!("non-finite field value at step {step} (t = {t})");
            out.finish(spec, echo, RunStatus::Aborted { step, t, reason: reason.clone() })?;
            return Err(anyhow!("run aborted: {reason}"));
        }
        Err(e) => return Err(e.into()),
    };
    out.stage("write", |out| {
        write_tip_csv(&out.path("tips.csv"), &output.path.samples)?;
        out.record("tips.csv")?;
        out.write_with("centers.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            for c in &output.path.meander_center_track {
                w.serialize(c)?;
            }
            w.flush()?;
            Ok(())
        })?;
        out.write_json("verdict.json", &output.summary)
    })?;
    let s = &output.summary;
    let mut lines = vec![format!(
        "{} steps to t = {}, {} tip samples, max |u| = {:.3}, max |v| = {:.3}",
        s.steps, s.t_end, s.tip_samples, s.max_abs_u, s.max_abs_v
    )];
    lines.push(match (&s.report, &s.report_error) {
        (Some(r), _) => format!(
            "verdict: {} ({} rotations, tip radius {:.3}, precession radius {:.3})",
            r.verdict.label(),
            r.rotations,
            r.tip_radius,
            r.precession_radius
        ),
        (None, Some(e)) => format!("no verdict: {e}"),
        (None, None) => "no verdict".into(),
    });
    let manifest = out.finish(spec, echo, RunStatus::Completed)?;
    Ok(Outcome { manifest, lines })
}
