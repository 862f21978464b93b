//! Checkpoints and tip path files.
//!
//! A checkpoint is a JSON header next to a flat little-endian `f64` file
//! holding `u`, `v`, `ψ` in that order, row-major.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SimError};
use crate::params::BidomainParams;
use crate::sim::{BidomainState, TipSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub grid_n: usize,
    pub t: f64,
    pub step: u64,
    pub fields: Vec<String>,
    pub params: BidomainParams,
}

/// Writes `<stem>.json` and `<stem>.bin`.
pub fn write_checkpoint(stem: &Path, state: &BidomainState, params: &BidomainParams) -> Result<()> {
    let n = params.grid_n;
    if state.u.len() != n * n {
        return Err(SimError::GridMismatch(state.u.len(), n * n));
    }
    let header = CheckpointHeader {
        grid_n: n,
        t: state.t,
        step: state.step,
        fields: vec!["u".into(), "v".into(), "psi".into()],
        params: params.clone(),
    };
    fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
    let mut w = BufWriter::new(fs::File::create(stem.with_extension("bin"))?);
    for x in state.u.iter().chain(&state.v).chain(&state.psi) {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Restores fields and time. The two-step history is not stored, so the
/// next step after a restart is a one-step start.
pub fn read_checkpoint(stem: &Path) -> Result<(CheckpointHeader, BidomainState)> {
    let header: CheckpointHeader = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    let bytes = fs::read(stem.with_extension("bin"))?;
    let len = header.grid_n * header.grid_n;
    if bytes.len() != 3 * len * 8 {
        return Err(SimError::Format(format!(
            "expected {} bytes for grid_n = {}, found {}",
            3 * len * 8,
            header.grid_n,
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let mut s = BidomainState::uniform(header.grid_n, 0.0, 0.0);
    s.u.copy_from_slice(&vals[..len]);
    s.v.copy_from_slice(&vals[len..2 * len]);
    s.psi.copy_from_slice(&vals[2 * len..]);
    s.t = header.t;
    s.step = header.step;
    Ok((header, s))
}

pub fn write_tip_csv(path: &Path, samples: &[TipSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tip_csv(path: &Path) -> Result<Vec<TipSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
