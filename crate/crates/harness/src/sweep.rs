//! Parameter sweeps: the cartesian product of the listed axes, each point a
//! full run in its own directory, executed on a rayon pool.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::experiments::run_experiment;
use crate::output::{write_error, write_json, write_outcome, REPORT_FILE};

/// One point of the sweep and its verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub gamma: Option<f64>,
    pub strength: Option<f64>,
    pub amplitude: Option<f64>,
    pub dir: PathBuf,
    /// `None` when the run raised an error.
    pub pass: Option<bool>,
    pub error: Option<String>,
}

fn axis(values: &[f64]) -> Vec<Option<f64>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

/// Expands the sweep block into per-point configs (in a fixed order).
pub fn expand(cfg: &ExperimentConfig) -> Result<Vec<(SweepPoint, ExperimentConfig)>> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| HarnessError::Config("sweep: block missing".into()))?;
    let mut points = Vec::new();
    for g in axis(&sw.gamma) {
        for c in axis(&sw.strength) {
            for a in axis(&sw.amplitude) {
                let index = points.len();
                let mut point = cfg.clone();
                point.sweep = None;
                point.experiment = Some(sw.base);
                if let Some(g) = g {
                    point.potential.exponent = Some(g);
                }
                if let Some(c) = c {
                    point.potential.strength = Some(c);
                }
                if let Some(a) = a {
                    point.initial.amplitude = Some(a);
                    point.initial.norm = None;
                }
                point.validate()?;
                let dir = PathBuf::from(format!("point_{index:03}"));
                points.push((
                    SweepPoint { index, gamma: g, strength: c, amplitude: a, dir, pass: None, error: None },
                    point,
                ));
            }
        }
    }
    Ok(points)
}

/// Runs every point into `out/point_NNN/` and writes the summary report.
/// Returns whether every point passed.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path, threads: Option<usize>) -> Result<bool> {
    let base = cfg.sweep.as_ref().expect("validated").base;
    let points = expand(cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let results: Vec<SweepPoint> = pool.install(|| {
        points
            .into_par_iter()
            .map(|(mut point, pcfg)| {
                let dir = out.join(&point.dir);
                match run_experiment(base, &pcfg).and_then(|o| write_outcome(&dir, base, &pcfg, &o).map(|_| o.pass())) {
                    Ok(pass) => point.pass = Some(pass),
                    Err(e) => {
                        write_error(&dir, base, &e);
                        point.error = Some(e.to_string());
                    }
                }
                point
            })
            .collect()
    });
    let pass = results.iter().all(|p| p.pass == Some(true));
    write_json(
        &out.join(REPORT_FILE),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "experiment": "sweep",
            "base": base.to_string(),
            "pass": pass,
            "points": results,
            "config": serde_json::to_value(cfg)?,
        }),
    )?;
    for p in &results {
        let verdict = match p.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "ERROR",
        };
        println!("{verdict} {}", p.dir.display());
    }
    Ok(pass)
}
