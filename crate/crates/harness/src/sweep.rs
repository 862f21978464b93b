use anyhow::{Context, Result};
use epicycle_core::verify::{read_cells_csv, sweep_wedge_resume, write_cells_csv, WedgeCell};
use std::fs::{self, OpenOptions};
use std::sync::Mutex;

use crate::manifest::{OutDir, RunStatus};
use crate::spec::{load_json, ExperimentSpec, SweepConfig};
use crate::Outcome;

pub const CELLS_FILE: &str = "cells.csv";

/// Cells from an earlier, possibly interrupted, run.
fn previous_cells(out: &OutDir) -> Result<Vec<WedgeCell>> {
    let path = out.path(CELLS_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = fs::File::open(&path)?;
    read_cells_csv(f).with_context(|| format!("reading {}", path.display()))
}

pub fn cmd_sweep(spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate()?;
    let cfg: SweepConfig = load_json(&spec.config)?;
    let opts = spec.verify_options(cfg.options);
    let mut out = OutDir::create(&spec.out)?;
    let done = previous_cells(&out)?;

    // Finished cells are appended as they come in so that an interrupted
    // sweep keeps its progress; the file is rewritten in grid order at the end.
    let path = out.path(CELLS_FILE);
    let fresh = !path.exists() || fs::metadata(&path)?.len() == 0;
    let file = OpenOptions::new().create(true).append(true).open(&path)?;
    let writer = Mutex::new(csv::WriterBuilder::new().has_headers(fresh).from_writer(file));
    let computed = Mutex::new(0usize);
    let scan = out.stage("cells", |_| {
        Ok(sweep_wedge_resume(&cfg.system, cfg.pivot, &cfg.ratio_grid, &cfg.lambda_grid, &opts, &done, |cell| {
            let mut w = writer.lock().expect("cell writer");
            if w.serialize(cell).and_then(|_| Ok(w.flush()?)).is_err() {
                eprintln!("warning: could not append cell ({}, {})", cell.lambda_k, cell.ratio);
            }
            *computed.lock().expect("counter") += 1;
        })?)
    })?;
    drop(writer);
    let computed = computed.into_inner().expect("counter");

    out.write_with(CELLS_FILE, |buf| Ok(write_cells_csv(&scan.cells, buf)?))?;
    out.write_json("scan.json", &scan)?;
    let s = &scan.summary;
    let mut lines = vec![
        format!("{} cells ({computed} computed, {} reused)", s.cells, s.cells - computed),
        format!("{} with torus, {} failed", s.cells_with_torus, s.cells_failed),
    ];
    lines.push(match s.v_hat {
        Some(v) => format!("empirical wedge ratio V = {v}, contiguous = {}", s.contiguous),
        None => format!("no positive wedge ratio found, contiguous = {}", s.contiguous),
    });
    let echo = serde_json::json!({
        "system": cfg.system,
        "pivot": cfg.pivot,
        "lambda_grid": cfg.lambda_grid,
        "ratio_grid": cfg.ratio_grid,
        "options": opts,
    });
    let manifest = out.finish(spec, echo, RunStatus::Completed)?;
    Ok(Outcome { manifest, lines })
}
