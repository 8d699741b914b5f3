//! Config-driven experiment harness for the Hartree scattering lab.
//!
//! `hartree <experiment> --config run.toml [--out DIR]` writes
//! `report.json`, `diagnostics.csv` and `fields/*.hsf` into the output
//! directory. Exit status: 0 when every check passes, 1 when a check fails,
//! 2 when the run could not complete (see `error.json`).

// Validation uses `!(x > 0.0)` so that NaN is rejected with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod initial;
pub mod output;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};
pub use experiments::{run_experiment, Check, Outcome};

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

/// Loads `config`, applies overrides and checks the experiment name.
pub fn prepare(kind: ExperimentKind, config: &Path, ov: &Overrides) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::read(config)?;
    if let Some(declared) = cfg.experiment {
        if declared != kind {
            return Err(HarnessError::Config(format!(
                "config declares experiment = \"{declared}\" but the command is {kind}"
            )));
        }
    }
    if kind == ExperimentKind::Sweep && cfg.sweep.is_none() {
        return Err(HarnessError::Config("sweep: block missing".into()));
    }
    if let Some(seed) = ov.seed {
        cfg.initial.seed = Some(seed);
    }
    cfg.validate()?;
    let out = ov
        .out
        .clone()
        .or_else(|| cfg.output.clone().map(|o| config.parent().unwrap_or(Path::new(".")).join(o)))
        .unwrap_or_else(|| PathBuf::from("out").join(kind.to_string()));
    Ok((cfg, out))
}

/// Runs one command end to end and returns the exit code.
pub fn run(kind: ExperimentKind, config: &Path, ov: &Overrides) -> i32 {
    let fallback = ov.out.clone().unwrap_or_else(|| PathBuf::from("out").join(kind.to_string()));
    let (cfg, out) = match prepare(kind, config, ov) {
        Ok(v) => v,
        Err(e) => return fail(&fallback, kind, &e),
    };
    if kind == ExperimentKind::Sweep {
        return match sweep::run_sweep(&cfg, &out, ov.threads) {
            Ok(true) => EXIT_PASS,
            Ok(false) => EXIT_CHECK_FAILED,
            Err(e) => fail(&out, kind, &e),
        };
    }
    let outcome = match run_experiment(kind, &cfg) {
        Ok(o) => o,
        Err(e) => return fail(&out, kind, &e),
    };
    if let Err(e) = output::write_outcome(&out, kind, &cfg, &outcome) {
        return fail(&out, kind, &e);
    }
    for c in &outcome.checks {
        println!("{}", c.line());
    }
    if outcome.pass() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

fn fail(dir: &Path, kind: ExperimentKind, e: &HarnessError) -> i32 {
    eprintln!("error ({}): {e}", e.kind());
    output::write_error(dir, kind, e);
    EXIT_ERROR
}
