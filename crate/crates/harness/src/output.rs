//! Output directory layout: `report.json`, `diagnostics.csv`, `fields/*.hsf`,
//! and `error.json` when a run cannot complete. Reports carry no timestamps
//! so identical inputs give identical bytes.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use hartree_core::io::{save_field, write_diagnostics_csv};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::experiments::Outcome;

pub const REPORT_FILE: &str = "report.json";
pub const ERROR_FILE: &str = "error.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const FIELDS_DIR: &str = "fields";

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// The report document of one run.
pub fn report_value(kind: ExperimentKind, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Value> {
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": kind.to_string(),
        "pass": outcome.pass(),
        "checks": outcome.checks,
        "notes": outcome.notes,
        "results": outcome.results,
        "config": serde_json::to_value(cfg)?,
    }))
}

/// Writes every artifact of a finished run into `dir`.
pub fn write_outcome(dir: &Path, kind: ExperimentKind, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join(REPORT_FILE), &report_value(kind, cfg, outcome)?)?;
    write_diagnostics_csv(BufWriter::new(File::create(dir.join(DIAGNOSTICS_FILE))?), &outcome.diagnostics)?;
    if !outcome.fields.is_empty() {
        let fields = dir.join(FIELDS_DIR);
        fs::create_dir_all(&fields)?;
        for (name, f) in &outcome.fields {
            save_field(fields.join(name), f)?;
        }
    }
    Ok(())
}

/// Records a failed run; best effort, since the directory itself may be the problem.
pub fn write_error(dir: &Path, kind: ExperimentKind, err: &HarnessError) {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": kind.to_string(),
        "error": { "kind": err.kind(), "message": err.to_string() },
    });
    if fs::create_dir_all(dir).is_ok() {
        let _ = write_json(&dir.join(ERROR_FILE), &doc);
    }
}
