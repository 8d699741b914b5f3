//! Time evolution: the free group, the Strang-split Hartree flow and a Picard
//! iteration of the Duhamel equation.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::grid::GridSpec;
use crate::observables::{diagnostics_row, DiagnosticsOptions, DiagnosticsRow};
use crate::potential::PotentialOnGrid;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::spectral::{apply_free_phase, apply_table, free_phase_table, to_spectrum};

/// Time integrator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Strang,
    Picard,
}

/// Settings of one evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolveConfig<T: Real> {
    /// Step size, positive; the direction follows `t_end - t_start`.
    pub dt: T,
    pub t_start: T,
    pub t_end: T,
    /// Keep every `sample_stride`-th step as a snapshot (first and last always kept).
    pub sample_stride: usize,
    /// Evaluate diagnostics every `diagnostics_stride` steps (first and last always).
    pub diagnostics_stride: usize,
    pub scheme: Scheme,
    /// `None` disables diagnostics rows.
    pub diagnostics: Option<DiagnosticsOptions>,
    /// Picard sweeps when `scheme` is `Picard`.
    pub picard_iterations: usize,
}

impl<T: Real> EvolveConfig<T> {
    /// Strang evolution with full diagnostics at every step and every step stored.
    pub fn new(dt: T, t_start: T, t_end: T) -> Self {
        Self {
            dt,
            t_start,
            t_end,
            sample_stride: 1,
            diagnostics_stride: 1,
            scheme: Scheme::Strang,
            diagnostics: Some(DiagnosticsOptions::default()),
            picard_iterations: 8,
        }
    }

    pub fn with_sample_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn with_diagnostics(mut self, diagnostics: Option<DiagnosticsOptions>, stride: usize) -> Self {
        self.diagnostics = diagnostics;
        self.diagnostics_stride = stride;
        self
    }

    /// Only the final field is kept and no diagnostics are evaluated.
    pub fn endpoint_only(mut self) -> Self {
        self.sample_stride = usize::MAX;
        self.diagnostics = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return invalid(format!("time step dt = {} must be positive", self.dt));
        }
        if !self.t_start.is_finite() || !self.t_end.is_finite() {
            return invalid("evolution endpoints must be finite");
        }
        if self.sample_stride == 0 || self.diagnostics_stride == 0 {
            return invalid("strides must be >= 1");
        }
        if self.scheme == Scheme::Picard && self.picard_iterations == 0 {
            return invalid("Picard evolution needs at least one iteration");
        }
        Ok(())
    }

    /// Number of steps and the signed step that lands exactly on `t_end`.
    ///
    /// The step count is `ceil(|t_end - t_start| / dt)`, so the effective step
    /// never exceeds `dt`.
    pub fn steps(&self) -> Result<(usize, T)> {
        self.validate()?;
        let span = self.t_end - self.t_start;
        if span == T::zero() {
            return Ok((0, T::zero()));
        }
        let ratio = to_f64(span.abs() / self.dt);
        let steps = (ratio - 1e-9).ceil().max(1.0) as usize;
        Ok((steps, span / from_usize(steps)))
    }
}

/// Snapshots and diagnostics of one evolution.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    snapshots: Vec<Field<T>>,
    diagnostics: Vec<DiagnosticsRow>,
    steps: usize,
    step: T,
}

impl<T: Real> Trajectory<T> {
    /// Builds a trajectory from time-ordered snapshots on one grid.
    pub fn from_snapshots(snapshots: Vec<Field<T>>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Trajectory("no snapshots".into()));
        }
        let grid = snapshots[0].grid();
        let increasing = snapshots.windows(2).all(|w| w[1].time() > w[0].time());
        let decreasing = snapshots.windows(2).all(|w| w[1].time() < w[0].time());
        if !(increasing || decreasing) {
            return Err(Error::Trajectory("snapshot times must be strictly monotone".into()));
        }
        if snapshots.iter().any(|s| s.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { steps: snapshots.len() - 1, step: T::zero(), snapshots, diagnostics: Vec::new() })
    }

    pub fn snapshots(&self) -> &[Field<T>] {
        &self.snapshots
    }

    pub fn diagnostics(&self) -> &[DiagnosticsRow] {
        &self.diagnostics
    }

    pub fn times(&self) -> Vec<T> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    /// The field at the last stored time.
    pub fn last(&self) -> &Field<T> {
        self.snapshots.last().expect("trajectory holds at least one snapshot")
    }

    pub fn first(&self) -> &Field<T> {
        &self.snapshots[0]
    }

    pub fn into_last(mut self) -> Field<T> {
        self.snapshots.pop().expect("trajectory holds at least one snapshot")
    }

    /// Number of time steps taken.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Signed step used.
    pub fn step(&self) -> T {
        self.step
    }

    /// Snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: T) -> &Field<T> {
        self.snapshots
            .iter()
            .min_by(|a, b| {
                (a.time() - t).abs().partial_cmp(&(b.time() - t).abs()).expect("finite times")
            })
            .expect("nonempty")
    }
}

/// `U(t) f`: multiplies the spectrum by `exp(-i t |k|^2 / 2)`; the time stamp advances by `t`.
pub fn free_propagate<T: Real>(f: &Field<T>, t: T) -> Field<T> {
    let grid = f.grid();
    let mut spec = to_spectrum(f);
    apply_free_phase(grid, &mut spec, t);
    grid.inverse(&mut spec);
    Field::from_parts(grid.clone(), spec, f.time() + t)
}

fn check_pair<T: Real>(grid: &GridSpec<T>, pot: &PotentialOnGrid<T>) -> Result<()> {
    if grid != pot.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `u <- u exp(-i dt (V * |u|^2))` in place; `work` is grid-sized scratch.
fn nonlinear_phase_in_place<T: Real>(
    values: &mut [Complex<T>],
    pot: &PotentialOnGrid<T>,
    dt: T,
    work: &mut [Complex<T>],
) {
    if pot.is_zero() {
        return;
    }
    for (w, z) in work.iter_mut().zip(values.iter()) {
        *w = Complex::new(z.norm_sqr(), T::zero());
    }
    let grid = pot.grid();
    grid.forward(work);
    pot.apply_multiplier(work);
    grid.inverse(work);
    for (z, p) in values.iter_mut().zip(work.iter()) {
        let (s, c) = (dt * p.re).sin_cos();
        *z = *z * Complex::new(c, -s);
    }
}

/// Exact flow of `i u_t = u (V * |u|^2)` over `dt`; `|u|` is invariant along it.
pub fn nonlinear_phase_step<T: Real>(f: &Field<T>, pot: &PotentialOnGrid<T>, dt: T) -> Result<Field<T>> {
    check_pair(f.grid(), pot)?;
    let mut values = f.values().to_vec();
    let mut work = vec![Complex::new(T::zero(), T::zero()); values.len()];
    nonlinear_phase_in_place(&mut values, pot, dt, &mut work);
    Ok(Field::from_parts(f.grid().clone(), values, f.time() + dt))
}

/// Integrates with the configured scheme.
pub fn evolve<T: Real>(u0: &Field<T>, pot: &PotentialOnGrid<T>, cfg: &EvolveConfig<T>) -> Result<Trajectory<T>> {
    match cfg.scheme {
        Scheme::Strang => strang_evolve(u0, pot, cfg),
        Scheme::Picard => picard_evolve(u0, pot, cfg),
    }
}

struct Recorder<'a, T: Real> {
    pot: &'a PotentialOnGrid<T>,
    cfg: &'a EvolveConfig<T>,
    steps: usize,
    snapshots: Vec<Field<T>>,
    diagnostics: Vec<DiagnosticsRow>,
}

impl<'a, T: Real> Recorder<'a, T> {
    fn wants_snapshot(&self, k: usize) -> bool {
        k == 0 || k == self.steps || k.is_multiple_of(self.cfg.sample_stride)
    }

    fn wants_diagnostics(&self, k: usize) -> bool {
        self.cfg.diagnostics.is_some() && (k == 0 || k == self.steps || k.is_multiple_of(self.cfg.diagnostics_stride))
    }

    fn wants(&self, k: usize) -> bool {
        self.wants_snapshot(k) || self.wants_diagnostics(k)
    }

    fn record(&mut self, k: usize, field: Field<T>) -> Result<()> {
        if let Some(opts) = &self.cfg.diagnostics {
            if self.wants_diagnostics(k) {
                self.diagnostics.push(diagnostics_row(&field, self.pot, opts)?);
            }
        }
        if self.wants_snapshot(k) {
            self.snapshots.push(field);
        }
        Ok(())
    }
}

/// Strang splitting: half kinetic, full nonlinear phase, half kinetic.
///
/// Consecutive half kinetic steps are fused when no output is due in between.
/// Backward integration uses the same scheme with a negative step.
pub fn strang_evolve<T: Real>(u0: &Field<T>, pot: &PotentialOnGrid<T>, cfg: &EvolveConfig<T>) -> Result<Trajectory<T>> {
    check_pair(u0.grid(), pot)?;
    let (steps, step) = cfg.steps()?;
    let grid = u0.grid();
    let start = u0.clone().with_time(cfg.t_start);
    let mut rec = Recorder { pot, cfg, steps, snapshots: Vec::new(), diagnostics: Vec::new() };
    rec.record(0, start.clone())?;
    let half = free_phase_table(grid, step * lit(0.5));
    let full = free_phase_table(grid, step);
    let mut spec = to_spectrum(&start);
    let mut half_applied = false;
    let mut values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let mut work = values.clone();
    for k in 1..=steps {
        if !half_applied {
            apply_table(&mut spec, &half);
        }
        values.copy_from_slice(&spec);
        grid.inverse(&mut values);
        nonlinear_phase_in_place(&mut values, pot, step, &mut work);
        spec.copy_from_slice(&values);
        grid.forward(&mut spec);
        let t = cfg.t_start + from_usize::<T>(k) * step;
        let mass: T = spec.iter().map(|z| z.norm_sqr()).sum();
        if !mass.is_finite() {
            return Err(Error::NonFinite { quantity: "mass".into(), time: to_f64(t) });
        }
        if rec.wants(k) {
            apply_table(&mut spec, &half);
            half_applied = false;
            values.copy_from_slice(&spec);
            grid.inverse(&mut values);
            rec.record(k, Field::from_parts(grid.clone(), values.clone(), t))?;
        } else {
            apply_table(&mut spec, &full);
            half_applied = true;
        }
    }
    Ok(Trajectory { snapshots: rec.snapshots, diagnostics: rec.diagnostics, steps, step })
}

/// Result of a Picard iteration of the Duhamel equation.
#[derive(Clone, Debug)]
pub struct PicardOutcome<T: Real> {
    /// Final-time iterate.
    pub field: Field<T>,
    /// Iterates at every quadrature node (the last sweep).
    pub nodes: Vec<Field<T>>,
    /// `max over nodes ||u^(m) - u^(m-1)||_2` per sweep.
    pub differences: Vec<T>,
    /// Set when successive differences grow or become non-finite.
    pub diverged: bool,
}

/// Iterates `u = U(t - t0) u0 - i int_{t0}^t U(t - s) f(u(s)) ds` from
/// `U(t - t0) u0`, with the trapezoidal rule at spacing at most `dt_quad`.
pub fn picard_iterate<T: Real>(
    u0: &Field<T>,
    pot: &PotentialOnGrid<T>,
    interval: (T, T),
    n_iter: usize,
    dt_quad: T,
) -> Result<PicardOutcome<T>> {
    check_pair(u0.grid(), pot)?;
    if n_iter == 0 {
        return invalid("Picard iteration needs n_iter >= 1");
    }
    let cfg = EvolveConfig::new(dt_quad, interval.0, interval.1);
    let (steps, tau) = cfg.steps()?;
    let grid = u0.grid();
    let t0 = interval.0;
    let times: Vec<T> = (0..=steps).map(|k| t0 + from_usize::<T>(k) * tau).collect();
    let v0 = to_spectrum(u0);
    // Spectra of the current iterate at the nodes, starting from the free flow.
    let mut iterate: Vec<Vec<Complex<T>>> = times
        .iter()
        .map(|&t| {
            let mut s = v0.clone();
            apply_free_phase(grid, &mut s, t - t0);
            s
        })
        .collect();
    let norm_factor = grid.cell_volume() / from_usize::<T>(grid.len());
    let scale = (v0.iter().map(|z| z.norm_sqr()).sum::<T>() * norm_factor).sqrt();
    let mut differences = Vec::new();
    let mut diverged = false;
    let zero = Complex::new(T::zero(), T::zero());
    let half_tau = tau * lit(0.5);
    for _ in 0..n_iter {
        let mut cumulative = vec![zero; grid.len()];
        let mut previous_g: Option<Vec<Complex<T>>> = None;
        let mut diff = T::zero();
        for (k, &t) in times.iter().enumerate() {
            // g_k = U(t0 - t_k) f(u(t_k)) on the Fourier side, from the old iterate.
            let mut u = iterate[k].clone();
            grid.inverse(&mut u);
            if !pot.is_zero() {
                let rho: Vec<T> = u.iter().map(|z| z.norm_sqr()).collect();
                let phi = pot.convolve_real(&rho);
                for (z, p) in u.iter_mut().zip(phi) {
                    *z = *z * p;
                }
            } else {
                u.iter_mut().for_each(|z| *z = zero);
            }
            grid.forward(&mut u);
            apply_free_phase(grid, &mut u, t0 - t);
            if let Some(prev) = &previous_g {
                for ((c, a), b) in cumulative.iter_mut().zip(prev).zip(&u) {
                    *c = *c + (*a + *b) * half_tau;
                }
            }
            previous_g = Some(u);
            let mut next: Vec<Complex<T>> = v0
                .iter()
                .zip(&cumulative)
                .map(|(v, c)| v - Complex::new(-c.im, c.re))
                .collect();
            apply_free_phase(grid, &mut next, t - t0);
            let d: T = next.iter().zip(&iterate[k]).map(|(a, b)| (a - b).norm_sqr()).sum::<T>() * norm_factor;
            diff = diff.max(d.sqrt());
            iterate[k] = next;
        }
        if !diff.is_finite() {
            diverged = true;
            differences.push(diff);
            break;
        }
        differences.push(diff);
        let m = differences.len();
        if m >= 2 && differences[m - 1] > differences[m - 2] {
            diverged = true;
            break;
        }
        if diff <= lit::<T>(1e-15) * scale.max(T::min_positive_value()) {
            break;
        }
    }
    let nodes: Vec<Field<T>> = iterate
        .into_iter()
        .zip(&times)
        .map(|(mut s, &t)| {
            grid.inverse(&mut s);
            Field::from_parts(grid.clone(), s, t)
        })
        .collect();
    let field = nodes.last().expect("at least one node").clone();
    Ok(PicardOutcome { field, nodes, differences, diverged })
}

fn picard_evolve<T: Real>(u0: &Field<T>, pot: &PotentialOnGrid<T>, cfg: &EvolveConfig<T>) -> Result<Trajectory<T>> {
    let out = picard_iterate(u0, pot, (cfg.t_start, cfg.t_end), cfg.picard_iterations, cfg.dt)?;
    if out.diverged {
        return Err(Error::Trajectory(format!(
            "Picard iteration diverged (successive differences {:?})",
            out.differences.iter().map(|d| to_f64(*d)).collect::<Vec<_>>()
        )));
    }
    let steps = out.nodes.len() - 1;
    let step = if steps > 0 { (cfg.t_end - cfg.t_start) / from_usize(steps) } else { T::zero() };
    let mut rec = Recorder { pot, cfg, steps, snapshots: Vec::new(), diagnostics: Vec::new() };
    for (k, f) in out.nodes.into_iter().enumerate() {
        if rec.wants(k) {
            rec.record(k, f)?;
        }
    }
    Ok(Trajectory { snapshots: rec.snapshots, diagnostics: rec.diagnostics, steps, step })
}
