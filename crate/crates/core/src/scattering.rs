//! Interaction picture, asymptotic states, wave operators and round trips.
//!
//! `Omega_-` is not integrated separately: if `u` solves the equation then so
//! does `conj(u(-t))`, hence `Omega_- v = conj(Omega_+ conj(v))`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::norms::h1_norm;
use crate::observables::{boundary_mass_fraction, energy, hartree_term, kinetic_energy};
use crate::potential::PotentialOnGrid;
use crate::propagator::{free_propagate, strang_evolve, EvolveConfig, Trajectory};
use crate::scalar::{lit, to_f64, Real};

/// Relative H^1 increment below which an asymptotic state counts as converged.
pub const DEFAULT_CONVERGENCE_TOLERANCE: f64 = 1e-4;
/// Smallest horizon accepted by [`wave_operator`] by default.
pub const DEFAULT_MIN_HORIZON: f64 = 10.0;

/// Which end of the time axis the asymptotic state lives at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `t -> +infinity`, the operator `Omega_+`.
    #[default]
    Future,
    /// `t -> -infinity`, the operator `Omega_-`.
    Past,
}

/// Numerical settings of the scattering maps.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringConfig<T: Real> {
    /// Strang step.
    pub dt: T,
    /// Horizons below this are rejected.
    pub min_horizon: T,
    /// Relative H^1 increment that declares convergence.
    pub tolerance: f64,
    /// Also reconstruct from `2T` and report the discrepancy.
    pub richardson: bool,
    pub direction: Direction,
}

impl<T: Real> ScatteringConfig<T> {
    pub fn new(dt: T) -> Self {
        Self {
            dt,
            min_horizon: lit(DEFAULT_MIN_HORIZON),
            tolerance: DEFAULT_CONVERGENCE_TOLERANCE,
            richardson: true,
            direction: Direction::Future,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_min_horizon(mut self, min_horizon: T) -> Self {
        self.min_horizon = min_horizon;
        self
    }

    pub fn with_richardson(mut self, richardson: bool) -> Self {
        self.richardson = richardson;
        self
    }

    fn evolve_config(&self, t_start: T, t_end: T) -> EvolveConfig<T> {
        EvolveConfig::new(self.dt, t_start, t_end).endpoint_only()
    }
}

/// `U(-t) u(t)`; the time stamp is kept.
pub fn interaction_picture<T: Real>(u: &Field<T>) -> Field<T> {
    free_propagate(u, -u.time()).with_time(u.time())
}

/// `U(t) v`, the inverse of [`interaction_picture`]; the time stamp is kept.
pub fn from_interaction_picture<T: Real>(v: &Field<T>) -> Field<T> {
    free_propagate(v, v.time()).with_time(v.time())
}

/// `conj(u)` at time `-t`.
pub fn time_reflect<T: Real>(u: &Field<T>) -> Field<T> {
    u.conj().with_time(-u.time())
}

fn relative(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value / scale
    } else {
        value
    }
}

fn h1_distance<T: Real>(a: &Field<T>, b: &Field<T>) -> Result<f64> {
    Ok(to_f64(h1_norm(&a.sub(b)?)))
}

/// One Cauchy increment of the interaction-picture field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Increment {
    pub t_prev: f64,
    pub t: f64,
    /// `||v(t) - v(t_prev)||_{H^1}`.
    pub absolute: f64,
    /// The same divided by `||u_0||_{H^1}`.
    pub relative: f64,
}

/// Conservation defects of an asymptotic state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConservationResiduals {
    /// `| ||u_+||_2 - ||u_0||_2 |`.
    pub mass: f64,
    /// `| (1/2) ||grad u_+||_2^2 - E(u_0) |`.
    pub energy: f64,
    /// `energy / |E(u_0)|`.
    pub energy_relative: f64,
}

/// Candidate asymptotic state with its convergence evidence.
#[derive(Clone, Debug, Serialize)]
pub struct ScatterResult<T: Real> {
    #[serde(skip)]
    pub u_plus: Field<T>,
    pub checkpoints: Vec<f64>,
    pub convergence_history: Vec<Increment>,
    pub residuals: ConservationResiduals,
    /// `(t, P(u(t)))` at the checkpoints.
    pub hartree_tail: Vec<(f64, f64)>,
    pub hartree_tail_decreasing: bool,
    pub converged: bool,
    /// Set when an increment above tolerance exceeds its predecessor.
    pub diverging: bool,
    pub tolerance: f64,
}

fn snapshot_at<T: Real>(traj: &Trajectory<T>, t: f64) -> Result<&Field<T>> {
    let snap = traj.nearest(lit(t));
    let gap = (to_f64(snap.time()) - t).abs();
    if gap > 1e-9 * t.abs().max(1.0) {
        return Err(Error::Trajectory(format!(
            "no snapshot at checkpoint t = {t} (nearest is t = {})",
            to_f64(snap.time())
        )));
    }
    Ok(snap)
}

/// Follows `v(t) = U(-t) u(t)` along the checkpoints and takes the last one
/// as the asymptotic state.
///
/// Checkpoints must be at least three, strictly increasing in `|t|`, of one
/// sign, and stored in the trajectory. The reference data `u_0` is the first
/// snapshot.
pub fn extract_asymptotic<T: Real>(
    traj: &Trajectory<T>,
    pot: &PotentialOnGrid<T>,
    checkpoints: &[f64],
    tolerance: f64,
) -> Result<ScatterResult<T>> {
    if checkpoints.len() < 3 {
        return invalid(format!("need at least 3 checkpoints, got {}", checkpoints.len()));
    }
    let same_sign = checkpoints.iter().all(|t| *t >= 0.0) || checkpoints.iter().all(|t| *t <= 0.0);
    let increasing = checkpoints.windows(2).all(|w| w[1].abs() > w[0].abs());
    if !same_sign || !increasing || checkpoints.iter().any(|t| !t.is_finite()) {
        return invalid("checkpoints must be finite, of one sign and strictly increasing in |t|");
    }
    if !(tolerance > 0.0) {
        return invalid(format!("tolerance must be positive, got {tolerance}"));
    }
    let u0 = traj.first();
    let scale = to_f64(h1_norm(u0));
    let mut pictures = Vec::with_capacity(checkpoints.len());
    let mut hartree_tail = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        let snap = snapshot_at(traj, t)?;
        hartree_tail.push((t, to_f64(hartree_term(snap, pot)?)));
        pictures.push(interaction_picture(snap));
    }
    let mut history = Vec::with_capacity(checkpoints.len() - 1);
    for (k, pair) in pictures.windows(2).enumerate() {
        let absolute = h1_distance(&pair[1], &pair[0])?;
        history.push(Increment {
            t_prev: checkpoints[k],
            t: checkpoints[k + 1],
            absolute,
            relative: relative(absolute, scale),
        });
    }
    let last = history.last().expect("at least two increments");
    let converged = last.relative < tolerance;
    let diverging = history.windows(2).any(|w| w[1].absolute > w[0].absolute && w[1].relative >= tolerance);
    let hartree_tail_decreasing = hartree_tail.windows(2).all(|w| w[1].1.abs() <= w[0].1.abs());

    let u_plus = pictures.pop().expect("nonempty");
    let mass0 = to_f64(u0.mass()).sqrt();
    let mass_plus = to_f64(u_plus.mass()).sqrt();
    let e0 = to_f64(energy(u0, pot)?);
    let e_plus = to_f64(kinetic_energy(&u_plus));
    let energy_residual = (e_plus - e0).abs();
    Ok(ScatterResult {
        u_plus,
        checkpoints: checkpoints.to_vec(),
        convergence_history: history,
        residuals: ConservationResiduals {
            mass: (mass_plus - mass0).abs(),
            energy: energy_residual,
            energy_relative: relative(energy_residual, e0.abs()),
        },
        hartree_tail,
        hartree_tail_decreasing,
        converged,
        diverging,
        tolerance,
    })
}

fn check_horizon<T: Real>(horizon: T, cfg: &ScatteringConfig<T>) -> Result<()> {
    if !horizon.is_finite() || horizon < cfg.min_horizon {
        return invalid(format!("horizon T = {horizon} is below the minimum {}", cfg.min_horizon));
    }
    Ok(())
}

fn wave_operator_future<T: Real>(
    u_plus: &Field<T>,
    pot: &PotentialOnGrid<T>,
    horizon: T,
    cfg: &ScatteringConfig<T>,
) -> Result<Field<T>> {
    if !u_plus.is_finite() {
        return Err(Error::InvalidField("asymptotic state has non-finite samples".into()));
    }
    let data = free_propagate(&u_plus.clone().with_time(T::zero()), horizon);
    let traj = strang_evolve(&data, pot, &cfg.evolve_config(horizon, T::zero()))?;
    Ok(traj.into_last())
}

/// `Omega u_+` approximated by prescribing `U(T) u_+` at `t = T` and
/// integrating back to `t = 0` (`-T` and forward for the past direction).
pub fn wave_operator<T: Real>(
    u_plus: &Field<T>,
    pot: &PotentialOnGrid<T>,
    horizon: T,
    cfg: &ScatteringConfig<T>,
) -> Result<Field<T>> {
    check_horizon(horizon, cfg)?;
    match cfg.direction {
        Direction::Future => wave_operator_future(u_plus, pot, horizon, cfg),
        Direction::Past => {
            let w = wave_operator_future(&u_plus.conj(), pot, horizon, cfg)?;
            Ok(w.conj().with_time(T::zero()))
        }
    }
}

/// Forward evolution to `T` followed by the interaction picture at `T`.
fn asymptotic_at_horizon<T: Real>(
    u0: &Field<T>,
    pot: &PotentialOnGrid<T>,
    horizon: T,
    cfg: &ScatteringConfig<T>,
) -> Result<Field<T>> {
    let start = u0.clone().with_time(T::zero());
    let end = strang_evolve(&start, pot, &cfg.evolve_config(T::zero(), horizon))?.into_last();
    Ok(interaction_picture(&end).with_time(T::zero()))
}

/// `||a - e^{i theta} b||_{H^1}` with `theta` the `L^2`-optimal alignment.
fn phase_fixed_h1_distance<T: Real>(a: &Field<T>, b: &Field<T>) -> Result<f64> {
    let ip = b.inner(a)?;
    let rot = if ip.norm() > T::zero() { ip / Complex::new(ip.norm(), T::zero()) } else { Complex::new(T::one(), T::zero()) };
    h1_distance(a, &b.scale(rot))
}

/// Outcome of `u_0 -> u_+ -> Omega u_+`.
#[derive(Clone, Debug, Serialize)]
pub struct RoundTripReport<T: Real> {
    #[serde(skip)]
    pub u0: Field<T>,
    #[serde(skip)]
    pub u_plus: Field<T>,
    #[serde(skip)]
    pub reconstructed: Field<T>,
    pub direction: Direction,
    pub horizon: f64,
    pub dt: f64,
    /// `||u_0' - u_0||_{H^1} / ||u_0||_{H^1}`.
    pub relative_h1_error: f64,
    /// `||Omega_T u_+ - Omega_{2T} u_+||_{H^1} / ||u_0||_{H^1}` when requested.
    pub richardson_discrepancy: Option<f64>,
    /// `(S, discrepancy(S, 2S))` for `S = T/2, T` when requested.
    pub richardson_ladder: Vec<(f64, f64)>,
    /// The same ladder after aligning the global phase of the two
    /// reconstructions (`L^2`-optimal `e^{i theta}`).
    pub richardson_ladder_phase_fixed: Vec<(f64, f64)>,
    /// Whether the ladder strictly decreases.
    pub richardson_decreasing: Option<bool>,
    /// `(S, fraction of the mass of U(S) u_+ within 2h of the box faces)` for
    /// every horizon used; large values mean the free flow has wrapped around
    /// the torus and the horizon no longer approximates `t -> infinity`.
    pub free_boundary_mass: Vec<(f64, f64)>,
    /// `| ||u_0'||_2 - ||u_+||_2 | / ||u_+||_2`.
    pub mass_residual: f64,
    /// `| E(u_0') - (1/2) ||grad u_+||_2^2 | / ||u_0||_{H^1}^2`.
    pub energy_residual: f64,
    /// `| E(u_0) - (1/2) ||grad u_+||_2^2 | / ||u_0||_{H^1}^2`.
    pub asymptotic_energy_residual: f64,
    /// `2 * richardson + dt^2`, the allowance for the energy residuals.
    pub energy_budget: Option<f64>,
}

/// Extracts `u_+` from `u_0` at horizon `T`, rebuilds `u_0' = Omega u_+` and
/// compares. With `cfg.richardson` the reconstruction from `2T` is also run.
pub fn completeness_roundtrip<T: Real>(
    u0: &Field<T>,
    pot: &PotentialOnGrid<T>,
    horizon: T,
    cfg: &ScatteringConfig<T>,
) -> Result<RoundTripReport<T>> {
    check_horizon(horizon, cfg)?;
    if u0.grid() != pot.grid() {
        return Err(Error::GridMismatch);
    }
    if !u0.is_finite() {
        return Err(Error::InvalidField("initial data has non-finite samples".into()));
    }
    let u0 = u0.clone().with_time(T::zero());
    let u_plus = match cfg.direction {
        Direction::Future => asymptotic_at_horizon(&u0, pot, horizon, cfg)?,
        Direction::Past => asymptotic_at_horizon(&u0.conj(), pot, horizon, cfg)?.conj(),
    };
    let reconstructed = wave_operator(&u_plus, pot, horizon, cfg)?;
    let scale = to_f64(h1_norm(&u0));
    let mut ladder = Vec::new();
    let mut ladder_phase = Vec::new();
    if cfg.richardson {
        let half = horizon / lit(2.0);
        let near = wave_operator(&u_plus, pot, half, &cfg.clone().with_min_horizon(T::zero()))?;
        let far = wave_operator(&u_plus, pot, horizon + horizon, cfg)?;
        for (s, a, b) in [(half, &near, &reconstructed), (horizon, &reconstructed, &far)] {
            ladder.push((to_f64(s), relative(h1_distance(a, b)?, scale)));
            ladder_phase.push((to_f64(s), relative(phase_fixed_h1_distance(a, b)?, scale)));
        }
    }
    let mut horizons = vec![horizon];
    if cfg.richardson {
        horizons = vec![horizon / lit(2.0), horizon, horizon + horizon];
    }
    let width = lit::<T>(2.0) * u0.grid().spacing();
    let free_boundary_mass = horizons
        .iter()
        .map(|&s| (to_f64(s), to_f64(boundary_mass_fraction(&free_propagate(&u_plus, s), width))))
        .collect();
    let richardson_discrepancy = ladder.last().map(|p| p.1);
    let richardson_decreasing = (!ladder.is_empty()).then(|| ladder.windows(2).all(|w| w[1].1 < w[0].1));

    let scale2 = scale * scale;
    let plus_norm = to_f64(u_plus.mass()).sqrt();
    let rec_norm = to_f64(reconstructed.mass()).sqrt();
    let asymptotic_kinetic = to_f64(kinetic_energy(&u_plus));
    let e_rec = to_f64(energy(&reconstructed, pot)?);
    let e0 = to_f64(energy(&u0, pot)?);
    let dt = to_f64(cfg.dt);
    Ok(RoundTripReport {
        relative_h1_error: relative(h1_distance(&reconstructed, &u0)?, scale),
        richardson_discrepancy,
        richardson_ladder: ladder,
        richardson_ladder_phase_fixed: ladder_phase,
        richardson_decreasing,
        free_boundary_mass,
        mass_residual: relative((rec_norm - plus_norm).abs(), plus_norm),
        energy_residual: relative((e_rec - asymptotic_kinetic).abs(), scale2),
        asymptotic_energy_residual: relative((e0 - asymptotic_kinetic).abs(), scale2),
        energy_budget: richardson_discrepancy.map(|d| 2.0 * d + dt * dt),
        direction: cfg.direction,
        horizon: to_f64(horizon),
        dt,
        u0,
        u_plus,
        reconstructed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridSpec};
    use crate::potential::{sample_potential, PotentialSpec};
    use num_complex::Complex;

    fn packet(g: &GridSpec<f64>, amp: f64) -> Field<f64> {
        Field::from_fn(g, 0.0, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex::from_polar(amp * (-r2 / 2.0).exp(), 0.3 * x[0])
        })
    }

    fn l2(a: &Field<f64>, b: &Field<f64>) -> f64 {
        a.sub(b).unwrap().mass().sqrt()
    }

    #[test]
    fn interaction_picture_of_free_flow_is_constant() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let u = packet(&g, 1.0);
        assert!(l2(&interaction_picture(&u), &u) < 1e-14);
        for t in [0.5, 2.0, -1.5] {
            let ut = free_propagate(&u, t);
            let v = interaction_picture(&ut);
            assert_eq!(v.time(), t);
            assert!(l2(&v, &u) < 1e-11);
            assert!((v.mass() - ut.mass()).abs() < 1e-12);
            assert!(l2(&from_interaction_picture(&v), &ut) < 1e-11);
        }
    }

    #[test]
    fn free_wave_operator_is_identity() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let zero = PotentialOnGrid::zero(&g);
        let cfg = ScatteringConfig::new(0.05);
        let u = packet(&g, 1.0);
        for dir in [Direction::Future, Direction::Past] {
            let w = wave_operator(&u, &zero, 10.0, &cfg.clone().with_direction(dir)).unwrap();
            assert!(l2(&w, &u) < 1e-10);
        }
        let nothing = Field::zeros(&g, 0.0);
        let pot = sample_potential(&PotentialSpec::inverse_power(1.0, 2.5), &g).unwrap();
        assert_eq!(wave_operator(&nothing, &pot, 10.0, &cfg).unwrap().mass(), 0.0);
        assert!(wave_operator(&u, &pot, 5.0, &cfg).is_err());
    }

    #[test]
    fn past_operator_is_time_reflected_future_operator() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let pot = sample_potential(&PotentialSpec::inverse_power(1.0, 2.5), &g).unwrap();
        let cfg = ScatteringConfig::new(0.05).with_min_horizon(1.0);
        let u = packet(&g, 0.5);
        let past = wave_operator(&u, &pot, 1.0, &cfg.clone().with_direction(Direction::Past)).unwrap();
        let data = free_propagate(&u, -1.0);
        let cfg_back = EvolveConfig::new(0.05, -1.0, 0.0).endpoint_only();
        let direct = strang_evolve(&data, &pot, &cfg_back).unwrap().into_last();
        assert!(l2(&past, &direct) < 1e-12);
    }

    #[test]
    fn roundtrip_trivial_cases() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let zero = PotentialOnGrid::zero(&g);
        let cfg = ScatteringConfig::new(0.1).with_min_horizon(1.0);
        let rep = completeness_roundtrip(&packet(&g, 1.0), &zero, 2.0, &cfg).unwrap();
        assert!(rep.relative_h1_error < 1e-10);
        assert!(rep.richardson_discrepancy.unwrap() < 1e-10);
        let pot = sample_potential(&PotentialSpec::inverse_power(1.0, 2.5), &g).unwrap();
        let rep = completeness_roundtrip(&Field::zeros(&g, 0.0), &pot, 2.0, &cfg).unwrap();
        assert_eq!(rep.relative_h1_error, 0.0);
    }

    #[test]
    fn extraction_of_free_trajectory() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let zero = PotentialOnGrid::zero(&g);
        let u = packet(&g, 1.0);
        let cfg = EvolveConfig::new(0.1, 0.0, 4.0).with_sample_stride(10);
        let traj = strang_evolve(&u, &zero, &cfg).unwrap();
        let res = extract_asymptotic(&traj, &zero, &[1.0, 2.0, 4.0], 1e-4).unwrap();
        assert!(res.converged);
        assert!(res.convergence_history.iter().all(|i| i.absolute < 1e-10));
        assert!(l2(&res.u_plus, &u) < 1e-11);
        assert!(res.residuals.mass < 1e-12);
        assert!(res.residuals.energy < 1e-10);
        assert!(extract_asymptotic(&traj, &zero, &[1.0, 4.0], 1e-4).is_err());
        assert!(extract_asymptotic(&traj, &zero, &[1.0, 4.0, 2.0], 1e-4).is_err());
        assert!(extract_asymptotic(&traj, &zero, &[1.0, 1.5, 4.0], 1e-4).is_err());
    }

    #[test]
    fn gauge_equivariance() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let pot = sample_potential(&PotentialSpec::inverse_power(1.0, 2.5), &g).unwrap();
        let cfg = ScatteringConfig::new(0.05).with_min_horizon(1.0);
        let u = packet(&g, 0.8);
        let rot = Complex::from_polar(1.0, 0.7);
        let a = wave_operator(&u.scale(rot), &pot, 1.0, &cfg).unwrap();
        let b = wave_operator(&u, &pot, 1.0, &cfg).unwrap().scale(rot);
        assert!(l2(&a, &b) < 1e-12);
    }
}
