//! Experiment runners. Each returns its checks, a JSON result block,
//! diagnostics rows and the fields to persist; writing happens in `output`.

use hartree_core::io::load_tabulated_potential;
use hartree_core::observables::{boundary_mass_fraction, decay_scan, morawetz_check, MorawetzTolerances};
use hartree_core::potential::{
    check_assumptions, regularize, sample_potential, theorem_windows, Theorem, DEFAULT_REGULARIZATION_ORDER,
};
use hartree_core::scattering::{completeness_roundtrip, extract_asymptotic, Direction, ScatteringConfig};
use hartree_core::{
    evolve, make_grid, DiagnosticsOptions, DiagnosticsRow, EvolveConfig64, Field64, GridSpec64, PotentialOnGrid64,
    PotentialSpec, Trajectory64,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{DirectionName, ExperimentConfig, ExperimentKind, PotentialShape};
use crate::error::{HarnessError, Result};
use crate::initial::generate_initial_data;

/// One PASS/FAIL line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `value <= threshold` passes; boolean checks use value 1 (true) against threshold 1.
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold, detail: detail.into() }
    }

    pub fn holds(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, threshold: 1.0, pass: ok, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        format!("{verdict} {}: {}", self.name, self.detail)
    }
}

/// Everything an experiment produces.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub results: Value,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub fields: Vec<(String, Field64)>,
    pub notes: Vec<String>,
}

impl Outcome {
    fn push(&mut self, enabled: bool, check: Check) {
        if enabled {
            self.checks.push(check);
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn build_grid(cfg: &ExperimentConfig) -> Result<GridSpec64> {
    Ok(make_grid(cfg.grid.dim, cfg.grid.points, cfg.grid.half_length)?)
}

/// The analytic potential of the config (before regularization).
pub fn potential_spec(cfg: &ExperimentConfig) -> Result<PotentialSpec> {
    let p = &cfg.potential;
    let mut spec = match p.kind {
        PotentialShape::Zero => PotentialSpec::zero(),
        PotentialShape::InversePower => {
            PotentialSpec::inverse_power(p.strength.unwrap_or(1.0), p.exponent.expect("validated"))
        }
        PotentialShape::Tabulated => load_tabulated_potential(p.path.as_ref().expect("validated"))?,
    };
    if let Some(c) = p.cutoff {
        spec = spec.with_cutoff(c);
    }
    Ok(spec)
}

pub fn build_potential(cfg: &ExperimentConfig, grid: &GridSpec64) -> Result<PotentialOnGrid64> {
    let spec = potential_spec(cfg)?;
    if spec.is_zero() {
        return Ok(PotentialOnGrid64::zero(grid));
    }
    Ok(match cfg.potential.regularize_j {
        Some(j) => regularize(&spec, j, grid, DEFAULT_REGULARIZATION_ORDER)?,
        None => sample_potential(&spec, grid)?,
    })
}

/// `(p1, p2, alpha, a)` with defaults from the completeness window.
pub fn hypothesis_parameters(cfg: &ExperimentConfig) -> (f64, f64, f64, f64) {
    let (w1, w2) = Theorem::Completeness.extreme_exponents(cfg.grid.dim);
    let h = &cfg.potential.hypotheses;
    let p2 = h.p2.unwrap_or(w2);
    let p1 = h.p1.unwrap_or(w1).max(p2);
    (p1, p2, h.alpha.unwrap_or(2.0), h.a.unwrap_or(1.0))
}

fn direction(d: DirectionName) -> Direction {
    match d {
        DirectionName::Future => Direction::Future,
        DirectionName::Past => Direction::Past,
    }
}

fn diagnostics_options() -> DiagnosticsOptions {
    DiagnosticsOptions::default()
}

/// Runs one (non-sweep) experiment.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = build_grid(cfg)?;
    let pot = build_potential(cfg, &grid)?;
    match kind {
        ExperimentKind::CheckPotential => check_potential(cfg, &pot),
        ExperimentKind::Evolve => {
            let u0 = generate_initial_data(&cfg.initial, &grid)?;
            run_evolve(cfg, &u0, &pot)
        }
        ExperimentKind::Scatter => {
            let u0 = generate_initial_data(&cfg.initial, &grid)?;
            run_scatter(cfg, &u0, &pot)
        }
        ExperimentKind::Roundtrip => {
            let u0 = generate_initial_data(&cfg.initial, &grid)?;
            run_roundtrip(cfg, &u0, &pot)
        }
        ExperimentKind::Morawetz => {
            let u0 = generate_initial_data(&cfg.initial, &grid)?;
            run_morawetz(cfg, &u0, &pot)
        }
        ExperimentKind::Sweep => Err(HarnessError::Config("sweeps are run by the sweep driver".into())),
    }
}

fn relative_drift(rows: &[DiagnosticsRow], value: impl Fn(&DiagnosticsRow) -> f64, scale: f64) -> f64 {
    let Some(first) = rows.first() else { return 0.0 };
    let v0 = value(first);
    let worst = rows.iter().map(|r| (value(r) - v0).abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

fn trajectory_checks(cfg: &ExperimentConfig, traj: &Trajectory64, out: &mut Outcome) {
    let checks = &cfg.checks;
    let rows = traj.diagnostics();
    let mass0 = rows.first().map(|r| r.mass).unwrap_or(0.0);
    let mass_drift = relative_drift(rows, |r| r.mass, mass0);
    out.push(
        checks.enabled("mass_drift"),
        Check::at_most(
            "mass_drift",
            mass_drift,
            checks.mass_drift,
            format!("max relative mass drift {mass_drift:.3e} <= {:.1e}", checks.mass_drift),
        ),
    );
    let e0 = rows.first().map(|r| r.energy.abs()).unwrap_or(0.0);
    let energy_drift = relative_drift(rows, |r| r.energy, e0);
    out.push(
        checks.enabled("energy_drift"),
        Check::at_most(
            "energy_drift",
            energy_drift,
            checks.energy_drift,
            format!("max relative energy drift {energy_drift:.3e} <= {:.1e}", checks.energy_drift),
        ),
    );
    let width = 2.0 * traj.first().grid().spacing();
    let boundary = traj
        .snapshots()
        .iter()
        .map(|s| boundary_mass_fraction(s, width))
        .fold(0.0, f64::max);
    out.push(
        checks.enabled("boundary_mass"),
        Check::at_most(
            "boundary_mass",
            boundary,
            checks.boundary_mass,
            format!("max mass fraction within 2h of the faces {boundary:.3e} <= {:.1e}", checks.boundary_mass),
        ),
    );
}

fn stored_fields(traj: &Trajectory64, write: bool) -> Vec<(String, Field64)> {
    if !write {
        return Vec::new();
    }
    traj.snapshots()
        .iter()
        .enumerate()
        .map(|(k, s)| (format!("u_{k:05}.hsf"), s.clone()))
        .collect()
}

fn run_evolve(cfg: &ExperimentConfig, u0: &Field64, pot: &PotentialOnGrid64) -> Result<Outcome> {
    let ev = &cfg.evolve;
    let ecfg = EvolveConfig64::new(ev.dt, 0.0, ev.horizon)
        .with_sample_stride(ev.stride)
        .with_diagnostics(Some(diagnostics_options()), ev.diagnostics_stride);
    let traj = evolve(u0, pot, &ecfg)?;
    let mut out = Outcome::default();
    trajectory_checks(cfg, &traj, &mut out);
    let last = traj.diagnostics().last().cloned();
    out.results = json!({
        "steps": traj.steps(),
        "step": traj.step(),
        "snapshots": traj.snapshots().len(),
        "final": last,
    });
    out.fields = stored_fields(&traj, ev.write_fields);
    out.diagnostics = traj.diagnostics().to_vec();
    Ok(out)
}

fn steps_to(t: f64, dt: f64) -> Result<usize> {
    let k = (t / dt).round();
    if (k * dt - t).abs() > 1e-9 * t.max(1.0) || k < 1.0 {
        return Err(HarnessError::Config(format!("scatter.checkpoints: {t} is not a multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn run_scatter(cfg: &ExperimentConfig, u0: &Field64, pot: &PotentialOnGrid64) -> Result<Outcome> {
    let dt = cfg.evolve.dt;
    let sign = match cfg.scatter.direction {
        DirectionName::Future => 1.0,
        DirectionName::Past => -1.0,
    };
    let checkpoints: Vec<f64> = cfg.scatter.checkpoints.iter().map(|t| sign * t).collect();
    let stride = cfg
        .scatter
        .checkpoints
        .iter()
        .map(|t| steps_to(*t, dt))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0, gcd);
    let horizon = *checkpoints.last().expect("validated");
    let ecfg = EvolveConfig64::new(dt, 0.0, horizon)
        .with_sample_stride(stride)
        .with_diagnostics(Some(diagnostics_options()), cfg.evolve.diagnostics_stride);
    let traj = evolve(u0, pot, &ecfg)?;
    let res = extract_asymptotic(&traj, pot, &checkpoints, cfg.checks.convergence)?;
    let checks = &cfg.checks;
    let mut out = Outcome::default();
    out.push(
        checks.enabled("mass_residual"),
        Check::at_most(
            "mass_residual",
            res.residuals.mass,
            checks.mass_residual,
            format!("| ||u+|| - ||u0|| | = {:.3e} <= {:.1e}", res.residuals.mass, checks.mass_residual),
        ),
    );
    out.push(
        checks.enabled("energy_residual"),
        Check::at_most(
            "energy_residual",
            res.residuals.energy_relative,
            checks.energy_residual,
            format!(
                "| ||grad u+||^2/2 - E(u0) | / |E(u0)| = {:.3e} <= {:.1e}",
                res.residuals.energy_relative, checks.energy_residual
            ),
        ),
    );
    let last = res.convergence_history.last().expect("nonempty");
    out.push(
        checks.enabled("convergence"),
        Check::at_most(
            "convergence",
            last.relative,
            checks.convergence,
            format!("final relative H1 increment {:.3e} <= {:.1e}", last.relative, checks.convergence),
        ),
    );
    out.push(
        checks.enabled("increments_decreasing"),
        Check::holds(
            "increments_decreasing",
            !res.diverging,
            format!(
                "H1 increments {:?}",
                res.convergence_history.iter().map(|i| format!("{:.3e}", i.absolute)).collect::<Vec<_>>()
            ),
        ),
    );
    out.push(
        checks.enabled("hartree_tail"),
        Check::holds(
            "hartree_tail",
            res.hartree_tail_decreasing,
            format!("P(u(t)) at checkpoints {:?}", res.hartree_tail.iter().map(|p| format!("{:.3e}", p.1)).collect::<Vec<_>>()),
        ),
    );
    trajectory_checks(cfg, &traj, &mut out);
    out.results = serde_json::to_value(&res)?;
    out.fields.push(("u_plus.hsf".into(), res.u_plus.clone()));
    for (k, t) in checkpoints.iter().enumerate() {
        out.fields.push((format!("checkpoint_{k:02}.hsf"), traj.nearest(*t).clone()));
    }
    out.diagnostics = traj.diagnostics().to_vec();
    Ok(out)
}

fn run_roundtrip(cfg: &ExperimentConfig, u0: &Field64, pot: &PotentialOnGrid64) -> Result<Outcome> {
    let rt = &cfg.roundtrip;
    let mut out = Outcome::default();
    let (_, _, alpha, a) = hypothesis_parameters(cfg);
    match hartree_core::check_h3(pot, alpha, a) {
        Ok(h3) if h3.pass => {}
        Ok(_) => out.notes.push("potential fails (H3); the completeness theory does not apply".into()),
        Err(e) => out.notes.push(format!("(H3) not evaluated: {e}")),
    }
    for note in &out.notes {
        eprintln!("warning: {note}");
    }
    let scfg = ScatteringConfig {
        dt: cfg.evolve.dt,
        min_horizon: rt.min_horizon,
        tolerance: cfg.checks.convergence,
        richardson: rt.richardson,
        direction: direction(rt.direction),
    };
    let rep = completeness_roundtrip(u0, pot, rt.horizon, &scfg)?;
    let checks = &cfg.checks;
    out.push(
        checks.enabled("roundtrip_error"),
        Check::at_most(
            "roundtrip_error",
            rep.relative_h1_error,
            checks.roundtrip_error,
            format!("relative H1 round-trip error {:.3e} <= {:.1e}", rep.relative_h1_error, checks.roundtrip_error),
        ),
    );
    out.push(
        checks.enabled("mass_residual"),
        Check::at_most(
            "mass_residual",
            rep.mass_residual,
            checks.mass_residual,
            format!("wave-operator isometry defect {:.3e} <= {:.1e}", rep.mass_residual, checks.mass_residual),
        ),
    );
    if let Some(decreasing) = rep.richardson_decreasing {
        out.push(
            checks.enabled("richardson_decreasing"),
            Check::holds(
                "richardson_decreasing",
                decreasing,
                format!(
                    "(S, 2S) discrepancies {:?}, phase-aligned {:?}",
                    rep.richardson_ladder.iter().map(|p| format!("S={}: {:.3e}", p.0, p.1)).collect::<Vec<_>>(),
                    rep.richardson_ladder_phase_fixed.iter().map(|p| format!("{:.3e}", p.1)).collect::<Vec<_>>()
                ),
            ),
        );
    }
    if let Some(budget) = rep.energy_budget {
        out.push(
            checks.enabled("energy_budget"),
            Check::at_most(
                "energy_budget",
                rep.energy_residual,
                budget,
                format!("energy transfer defect {:.3e} <= Richardson budget {budget:.3e}", rep.energy_residual),
            ),
        );
    }
    out.results = serde_json::to_value(&rep)?;
    let opts = diagnostics_options();
    out.diagnostics = vec![
        hartree_core::observables::diagnostics_row(&rep.u0, pot, &opts)?,
        hartree_core::observables::diagnostics_row(&rep.reconstructed, pot, &opts)?,
    ];
    out.fields = vec![
        ("u0.hsf".into(), rep.u0.clone()),
        ("u_plus.hsf".into(), rep.u_plus.clone()),
        ("reconstructed.hsf".into(), rep.reconstructed.clone()),
    ];
    Ok(out)
}

fn run_morawetz(cfg: &ExperimentConfig, u0: &Field64, pot: &PotentialOnGrid64) -> Result<Outcome> {
    let ev = &cfg.evolve;
    let mw = &cfg.morawetz;
    let t1 = mw.t1.unwrap_or(0.0);
    let t2 = mw.t2.unwrap_or(ev.horizon);
    if !(t2 <= ev.horizon) {
        return Err(HarnessError::Config(format!("morawetz.t2 = {t2} exceeds evolve.horizon = {}", ev.horizon)));
    }
    let ecfg = EvolveConfig64::new(ev.dt, 0.0, ev.horizon)
        .with_sample_stride(ev.stride)
        .with_diagnostics(Some(diagnostics_options()), ev.diagnostics_stride);
    let traj = evolve(u0, pot, &ecfg)?;
    let sigma = mw.sigma.unwrap_or_else(|| u0.grid().spacing());
    let (_, _, alpha, a) = hypothesis_parameters(cfg);
    let internal = mw.internal_norm.then_some((alpha, a));
    let tol = MorawetzTolerances {
        integrand: cfg.checks.morawetz_integrand,
        inequality: cfg.checks.morawetz_inequality,
        ..MorawetzTolerances::default()
    };
    let rep = morawetz_check(&traj, pot, t1, t2, sigma, internal, tol)?;
    let checks = &cfg.checks;
    let mut out = Outcome::default();
    out.push(
        checks.enabled("morawetz_integrand"),
        Check::holds(
            "morawetz_integrand",
            rep.negative_integrand_samples == 0,
            format!("min integrand {:.3e}, {} negative samples", rep.min_integrand, rep.negative_integrand_samples),
        ),
    );
    out.push(
        checks.enabled("morawetz_inequality"),
        Check::holds(
            "morawetz_inequality",
            rep.lhs_within_boundary && rep.boundary_within_bound,
            format!(
                "integral {:.4e} <= D(t2) - D(t1) = {:.4e} <= {:.4e} (tol {:.1e})",
                rep.lhs, rep.rhs_boundary, rep.rhs_bound, rep.tolerance
            ),
        ),
    );
    out.push(
        checks.enabled("morawetz_monotone"),
        Check::holds(
            "morawetz_monotone",
            rep.monotonicity_violations == 0,
            format!("{} decreases of D_sigma beyond tolerance", rep.monotonicity_violations),
        ),
    );
    trajectory_checks(cfg, &traj, &mut out);
    let decay = if ev.horizon >= 5.0 { decay_scan(&traj, 4.0).ok() } else { None };
    out.results = json!({ "morawetz": rep, "decay_l4": decay });
    out.fields = stored_fields(&traj, ev.write_fields);
    out.diagnostics = traj.diagnostics().to_vec();
    Ok(out)
}

fn check_potential(cfg: &ExperimentConfig, pot: &PotentialOnGrid64) -> Result<Outcome> {
    let (p1, p2, alpha, a) = hypothesis_parameters(cfg);
    let rep = check_assumptions(pot, p1, p2, alpha, a)?;
    let windows = theorem_windows(pot, a)?;
    let checks = &cfg.checks;
    let mut out = Outcome::default();
    out.push(
        checks.enabled("h1"),
        Check::holds(
            "h1",
            rep.h1.pass,
            format!("near L^{p2} norm {:.4e}, far L^{p1} norm {:.4e} (split a = {a})", rep.h1.near_norm, rep.h1.far_norm),
        ),
    );
    out.push(
        checks.enabled("h2"),
        Check::holds("h2", rep.h2.pass, format!("negative part admissible: {}", rep.h2.pass)),
    );
    let h3_ok = rep.h3.as_ref().is_some_and(|h| h.pass);
    let h3_detail = match &rep.h3 {
        Some(h) => format!("monotone {}, best A_alpha {:.4e} (alpha = {alpha})", h.monotone, h.best_a_alpha),
        None => "not evaluated".into(),
    };
    out.push(checks.enabled("h3"), Check::holds("h3", h3_ok, h3_detail));
    let names: Vec<String> = windows
        .iter()
        .map(|(t, ok)| format!("{}={ok}", serde_json::to_value(t).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()))
        .collect();
    out.notes = rep.notes.clone();
    out.notes.push(format!("theorem windows: {}", names.join(", ")));
    out.results = json!({ "assumptions": rep, "theorem_windows": windows });
    Ok(out)
}
