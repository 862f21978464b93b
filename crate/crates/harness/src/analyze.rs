use anyhow::Result;
use epicycle_core::averaging::{analyze_center, default_rho_grid, predict_manifold, ManifoldPrediction, RootReport, DEFAULT_QUADRATURE};
use epicycle_core::cbe::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::manifest::{OutDir, RunStatus};
use crate::spec::{load_system, ExperimentSpec};
use crate::Outcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterRoots {
    pub center_index: usize,
    pub profile_file: String,
    pub equivariance_residual: f64,
    pub warnings: Vec<String>,
    pub roots: RootReport,
}

/// Roots and predictions for every center, writing one profile CSV each.
pub(crate) fn predict_all(
    config: &SystemConfig,
    nodes: usize,
    out: &mut OutDir,
) -> Result<(Vec<CenterRoots>, Vec<ManifoldPrediction>)> {
    let grid = default_rho_grid(config);
    let mut centers = Vec::new();
    let mut predictions = Vec::new();
    for k in 0..config.n() {
        let (profile, roots) = analyze_center(config, k, &grid, nodes)?;
        let file = format!("profile_k{k}.csv");
        out.write_with(&file, |buf| Ok(profile.write_csv(buf)?))?;
        for root in &roots.roots {
            predictions.push(predict_manifold(config, k, root, &[], nodes)?);
        }
        centers.push(CenterRoots {
            center_index: k,
            profile_file: file,
            equivariance_residual: profile.equivariance_residual,
            warnings: profile.warnings,
            roots,
        });
    }
    Ok((centers, predictions))
}

pub fn cmd_analyze(spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate()?;
    let config = load_system(&spec.config)?;
    let nodes = spec.overrides.quadrature_n.unwrap_or(DEFAULT_QUADRATURE);
    let mut out = OutDir::create(&spec.out)?;
    let (centers, predictions) = out.stage("predict", |out| predict_all(&config, nodes, out))?;
    out.write_json("roots.json", &centers)?;
    out.write_json("predictions.json", &predictions)?;
    let mut lines = Vec::new();
    for c in &centers {
        lines.push(format!(
            "center {}: {} hyperbolic root(s), {} rejected",
            c.center_index,
            c.roots.roots.len(),
            c.roots.rejected.len()
        ));
    }
    for p in &predictions {
        lines.push(format!(
            "prediction: center {} rho* = {:.10} gamma = {:.10} lambda = {} -> {:?}",
            p.center_index, p.root.rho_star, p.root.gamma, p.lambda_k, p.stability
        ));
    }
    if predictions.is_empty() {
        lines.push("no hyperbolic roots; prediction list is empty".into());
    }
    let echo = serde_json::json!({ "system": config, "quadrature_n": nodes });
    let manifest = out.finish(spec, echo, RunStatus::Completed)?;
    Ok(Outcome { manifest, lines })
}
