use anyhow::Result;
use epicycle_core::averaging::{ManifoldPrediction, Stability, DEFAULT_QUADRATURE};
use epicycle_core::verify::{measure_stability, write_sections_csv, StabilityReport, VerifyOptions};
use serde::{Deserialize, Serialize};

use crate::analyze::predict_all;
use crate::manifest::{OutDir, RunStatus};
use crate::spec::{load_system, ExperimentSpec};
use crate::Outcome;

/// Half-width of the first-order averaging band, `5 |λₖ| ρ*`.
pub fn agreement_band(lambda_k: f64, rho_star: f64) -> f64 {
    5.0 * lambda_k.abs() * rho_star
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub pass: bool,
    pub radius_error: Option<f64>,
    pub band: f64,
    pub reason: String,
}

/// The verdict must match the sign rule and a measured ring must sit
/// inside the averaging band around `ρ*`.
pub fn judge(report: &StabilityReport) -> Agreement {
    let band = agreement_band(report.lambda_k, report.rho_star);
    let radius_error = report.torus.as_ref().map(|t| (t.mean_radius - report.rho_star).abs());
    let (pass, reason) = if !report.agrees {
        (false, format!("verdict {:?} but the sign rule predicts {:?}", report.verdict, report.predicted))
    } else if report.predicted == Stability::Foliated {
        (true, "foliated / no isolated torus".to_string())
    } else {
        match radius_error {
            Some(e) if e <= band => (true, format!("mean radius off by {e:.3e}, band {band:.3e}")),
            Some(e) => (false, format!("mean radius off by {e:.3e}, outside band {band:.3e}")),
            None => (false, "no ring measured".to_string()),
        }
    };
    Agreement {
        pass,
        radius_error,
        band,
        reason,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyEntry {
    pub index: usize,
    pub prediction: ManifoldPrediction,
    pub report: Option<StabilityReport>,
    pub sections_file: Option<String>,
    pub error: Option<String>,
    pub agreement: Agreement,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifySummary {
    pub options: VerifyOptions,
    pub entries: Vec<VerifyEntry>,
    pub passed: usize,
    pub failed: usize,
}

pub fn cmd_verify(spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate()?;
    let config = load_system(&spec.config)?;
    let nodes = spec.overrides.quadrature_n.unwrap_or(DEFAULT_QUADRATURE);
    let opts = spec.verify_options(VerifyOptions::default());
    let mut out = OutDir::create(&spec.out)?;
    let (_, predictions) = out.stage("predict", |out| predict_all(&config, nodes, out))?;
    out.write_json("predictions.json", &predictions)?;
    let entries = out.stage("probe", |out| {
        let mut entries = Vec::new();
        for (i, pred) in predictions.iter().enumerate() {
            let entry = match measure_stability(&config, pred, &opts) {
                Ok(rep) => {
                    let file = format!("sections_{i}.csv");
                    out.write_with(&file, |buf| Ok(write_sections_csv(&rep.sections, buf)?))?;
                    VerifyEntry {
                        index: i,
                        prediction: pred.clone(),
                        agreement: judge(&rep),
                        report: Some(rep),
                        sections_file: Some(file),
                        error: None,
                    }
                }
                Err(e) => VerifyEntry {
                    index: i,
                    prediction: pred.clone(),
                    report: None,
                    sections_file: None,
                    agreement: Agreement {
                        pass: false,
                        radius_error: None,
                        band: agreement_band(pred.lambda_k, pred.root.rho_star),
                        reason: format!("verification failed: {e}"),
                    },
                    error: Some(e.to_string()),
                },
            };
            entries.push(entry);
        }
        Ok(entries)
    })?;
    let passed = entries.iter().filter(|e| e.agreement.pass).count();
    let summary = VerifySummary {
        options: opts,
        failed: entries.len() - passed,
        passed,
        entries,
    };
    out.write_json("verify.json", &summary)?;
    let mut lines: Vec<String> = summary
        .entries
        .iter()
        .map(|e| {
            let verdict = e.report.as_ref().map_or("error".to_string(), |r| format!("{:?}", r.verdict).to_lowercase());
            format!(
                "{} center {} rho* = {:.6} ({verdict}): {}",
                if e.agreement.pass { "PASS" } else { "FAIL" },
                e.prediction.center_index,
                e.prediction.root.rho_star,
                e.agreement.reason
            )
        })
        .collect();
    if summary.entries.is_empty() {
        lines.push("no predictions to verify".into());
    }
    let echo = serde_json::json!({ "system": config, "quadrature_n": nodes, "options": opts });
    let manifest = out.finish(spec, echo, RunStatus::Completed)?;
    Ok(Outcome { manifest, lines })
}
