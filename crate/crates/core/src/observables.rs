//! Functionals of the solution: conserved quantities, the dilation quantity
//! and Morawetz integrand, the internal/external split, the propagation
//! estimate, internal cube norms, the window search and decay fits.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::grid::GridSpec;
use crate::norms::{cube_norm, lp_norm, snap_cube_edge};
use crate::potential::{check_h3, PotentialOnGrid};
use crate::propagator::Trajectory;
use crate::scalar::{lit, to_f64, Real};
use crate::spectral::{derivative_spectrum, gradient_from_spectrum, laplacian_quadratic_form, to_spectrum};

/// Kinetic energy `(1/2) ||grad u||_2^2`, evaluated on the Fourier side.
pub fn kinetic_energy<T: Real>(u: &Field<T>) -> T {
    lit::<T>(0.5) * laplacian_quadratic_form(u.grid(), &to_spectrum(u))
}

fn density_values<T: Real>(u: &Field<T>) -> Vec<T> {
    u.values().iter().map(|z| z.norm_sqr()).collect()
}

fn check_pair<T: Real>(u: &Field<T>, pot: &PotentialOnGrid<T>) -> Result<()> {
    if u.grid() != pot.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `P(u) = (1/2) int rho (V * rho)` with `rho = |u|^2`.
pub fn hartree_term<T: Real>(u: &Field<T>, pot: &PotentialOnGrid<T>) -> Result<T> {
    check_pair(u, pot)?;
    if pot.is_zero() {
        return Ok(T::zero());
    }
    let rho = density_values(u);
    let phi = pot.convolve_real(&rho);
    let acc: T = rho.iter().zip(&phi).map(|(a, b)| *a * *b).sum();
    Ok(lit::<T>(0.5) * acc * u.grid().cell_volume())
}

/// `E(u) = (1/2) ||grad u||_2^2 + P(u)`.
pub fn energy<T: Real>(u: &Field<T>, pot: &PotentialOnGrid<T>) -> Result<T> {
    Ok(kinetic_energy(u) + hartree_term(u, pot)?)
}

/// The vector field `x / (x^2 + sigma^2)^{1/2}`; for `sigma = 0`, `x/|x|` with
/// the origin cell set to zero.
fn dilation_weight<T: Real>(grid: &GridSpec<T>, sigma: T, flat: usize) -> [T; 3] {
    let x = grid.coordinates(flat);
    let r = grid.radius()[flat];
    let denom = (r * r + sigma * sigma).sqrt();
    if denom == T::zero() {
        return [T::zero(); 3];
    }
    [x[0] / denom, x[1] / denom, x[2] / denom]
}

/// `D_sigma(u) = Im <u, grad h . grad u>` with `h = (x^2 + sigma^2)^{1/2}`.
pub fn dilation_quantity<T: Real>(u: &Field<T>, sigma: T) -> Result<T> {
    if !(sigma >= T::zero()) {
        return invalid(format!("dilation regularization sigma = {sigma} must be >= 0"));
    }
    let grad = gradient_from_spectrum(u.grid(), &to_spectrum(u), u.time());
    Ok(dilation_from_gradient(u, &grad, sigma))
}

fn dilation_from_gradient<T: Real>(u: &Field<T>, grad: &[Field<T>], sigma: T) -> T {
    let grid = u.grid();
    let mut acc = T::zero();
    for (i, z) in u.values().iter().enumerate() {
        let w = dilation_weight(grid, sigma, i);
        let mut dir = Complex::new(T::zero(), T::zero());
        for (axis, g) in grad.iter().enumerate() {
            dir = dir + g.values()[i] * w[axis];
        }
        acc = acc + (z.conj() * dir).im;
    }
    acc * grid.cell_volume()
}

/// `-int rho grad h . (V * grad rho)` with `h = (x^2 + sigma^2)^{1/2}`;
/// `sigma = 0` gives the Morawetz integrand with `x/|x|`.
pub fn morawetz_integrand_sigma<T: Real>(u: &Field<T>, pot: &PotentialOnGrid<T>, sigma: T) -> Result<T> {
    check_pair(u, pot)?;
    if !(sigma >= T::zero()) {
        return invalid(format!("sigma = {sigma} must be >= 0"));
    }
    if pot.is_zero() {
        return Ok(T::zero());
    }
    let grid = u.grid();
    let rho = density_values(u);
    let mut rho_hat: Vec<Complex<T>> = rho.iter().map(|&r| Complex::new(r, T::zero())).collect();
    grid.forward(&mut rho_hat);
    pot.apply_multiplier(&mut rho_hat);
    // V * d_a rho for each axis; two real results share one inverse transform.
    let dim = grid.dim();
    let mut conv: Vec<Vec<T>> = Vec::with_capacity(dim);
    let mut axis = 0;
    while axis < dim {
        let a = derivative_spectrum(grid, &rho_hat, axis);
        if axis + 1 < dim {
            let b = derivative_spectrum(grid, &rho_hat, axis + 1);
            let mut packed: Vec<Complex<T>> =
                a.iter().zip(&b).map(|(x, y)| x + Complex::new(-y.im, y.re)).collect();
            grid.inverse(&mut packed);
            conv.push(packed.iter().map(|z| z.re).collect());
            conv.push(packed.iter().map(|z| z.im).collect());
            axis += 2;
        } else {
            let mut single = a;
            grid.inverse(&mut single);
            conv.push(single.iter().map(|z| z.re).collect());
            axis += 1;
        }
    }
    let mut acc = T::zero();
    for (i, r) in rho.iter().enumerate() {
        let w = dilation_weight(grid, sigma, i);
        let mut dot = T::zero();
        for (a, c) in conv.iter().enumerate() {
            dot = dot + w[a] * c[i];
        }
        acc = acc + *r * dot;
    }
    Ok(-acc * grid.cell_volume())
}

/// `-int rho x/|x| . (V * grad rho)` at fixed time.
pub fn morawetz_integrand<T: Real>(u: &Field<T>, pot: &PotentialOnGrid<T>) -> Result<T> {
    morawetz_integrand_sigma(u, pot, T::zero())
}

/// Trapezoidal rule over `(t, value)` samples.
fn trapezoid(samples: &[(f64, f64)]) -> f64 {
    samples.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

/// Outcome of the Morawetz check on `[t1, t2]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorawetzReport {
    pub t1: f64,
    pub t2: f64,
    pub sigma: f64,
    pub samples: usize,
    /// Time integral of `-int rho grad h . (V * grad rho)` with the same `sigma`.
    pub lhs: f64,
    /// Time integral of the `x/|x|` integrand.
    pub lhs_xhat: f64,
    /// `D_sigma(u(t2)) - D_sigma(u(t1))`.
    pub rhs_boundary: f64,
    /// `2 ||u||_2 sup_t ||grad u(t)||_2`.
    pub rhs_bound: f64,
    /// Smallest integrand value over the samples.
    pub min_integrand: f64,
    pub negative_integrand_samples: usize,
    /// Steps where `D_sigma` decreased by more than the tolerance.
    pub monotonicity_violations: usize,
    /// Left side of the internal-norm estimate, when requested.
    pub internal_bound_lhs: Option<f64>,
    /// Additive tolerance used in the inequalities.
    pub tolerance: f64,
    pub lhs_within_boundary: bool,
    pub boundary_within_bound: bool,
    pub pass: bool,
}

/// Tolerances of the Morawetz check, relative to `||u||_2 sup ||grad u||_2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MorawetzTolerances {
    /// Integrand sign, relative to the integrand scale.
    pub integrand: f64,
    /// Additive tolerance on the inequalities.
    pub inequality: f64,
    /// Relative allowance for the time quadrature.
    pub quadrature: f64,
    /// Per-step decrease of `D_sigma` tolerated.
    pub monotonicity: f64,
}

impl Default for MorawetzTolerances {
    fn default() -> Self {
        Self { integrand: 1e-8, inequality: 1e-6, quadrature: 1e-3, monotonicity: 1e-6 }
    }
}

/// Checks `lhs <= D_sigma(t2) - D_sigma(t1) <= 2 ||u||_2 sup ||grad u||_2`,
/// integrand positivity and monotonicity of `D_sigma` along the snapshots.
///
/// `internal` optionally requests the internal-norm integral with `(alpha, a)`.
pub fn morawetz_check<T: Real>(
    traj: &Trajectory<T>,
    pot: &PotentialOnGrid<T>,
    t1: T,
    t2: T,
    sigma: T,
    internal: Option<(f64, f64)>,
    tol: MorawetzTolerances,
) -> Result<MorawetzReport> {
    if !(t1 < t2) {
        return invalid(format!("Morawetz interval needs t1 < t2, got [{t1}, {t2}]"));
    }
    let snaps: Vec<&Field<T>> = traj.snapshots().iter().filter(|s| s.time() >= t1 && s.time() <= t2).collect();
    if snaps.len() < 8 {
        return Err(Error::Trajectory(format!(
            "{} snapshots in [{t1}, {t2}], at least 8 are needed",
            snaps.len()
        )));
    }
    let mut integrand = Vec::with_capacity(snaps.len());
    let mut integrand_xhat = Vec::with_capacity(snaps.len());
    let mut dilation = Vec::with_capacity(snaps.len());
    let mut grad_sup: f64 = 0.0;
    let mut mass_sup: f64 = 0.0;
    for s in &snaps {
        let t = to_f64(s.time());
        let spec = to_spectrum(s);
        let grad = gradient_from_spectrum(s.grid(), &spec, s.time());
        let grad_norm = to_f64(laplacian_quadratic_form(s.grid(), &spec)).sqrt();
        grad_sup = grad_sup.max(grad_norm);
        mass_sup = mass_sup.max(to_f64(s.mass()).sqrt());
        dilation.push((t, to_f64(dilation_from_gradient(s, &grad, sigma))));
        integrand.push((t, to_f64(morawetz_integrand_sigma(s, pot, sigma)?)));
        integrand_xhat.push((t, to_f64(morawetz_integrand(s, pot)?)));
    }
    let rhs_bound = 2.0 * mass_sup * grad_sup;
    let scale = (mass_sup * grad_sup).max(f64::MIN_POSITIVE);
    let lhs = trapezoid(&integrand);
    let lhs_xhat = trapezoid(&integrand_xhat);
    let rhs_boundary = dilation.last().expect("nonempty").1 - dilation[0].1;
    let integrand_scale = integrand.iter().map(|s| s.1.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let min_integrand = integrand.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let negative_integrand_samples = integrand
        .iter()
        .filter(|s| s.1 < -tol.integrand * integrand_scale)
        .count();
    let monotonicity_violations = dilation
        .windows(2)
        .filter(|w| w[1].1 < w[0].1 - tol.monotonicity * scale)
        .count();
    let tolerance = tol.inequality * scale;
    let lhs_within_boundary = lhs <= rhs_boundary + tolerance + tol.quadrature * lhs.abs();
    let boundary_within_bound = rhs_boundary <= rhs_bound + tolerance;
    let internal_bound_lhs = match internal {
        Some((alpha, a)) if t1 >= T::one() => Some(internal_norm_lhs(&snaps, alpha, a)?),
        _ => None,
    };
    Ok(MorawetzReport {
        t1: to_f64(t1),
        t2: to_f64(t2),
        sigma: to_f64(sigma),
        samples: snaps.len(),
        lhs,
        lhs_xhat,
        rhs_boundary,
        rhs_bound,
        min_integrand,
        negative_integrand_samples,
        monotonicity_violations,
        internal_bound_lhs,
        tolerance,
        lhs_within_boundary,
        boundary_within_bound,
        pass: lhs_within_boundary && boundary_within_bound && negative_integrand_samples == 0 && monotonicity_violations == 0,
    })
}

/// Smallest time accepted by [`split_field`]: `t log t >= 0` needs `t >= 1`.
pub const SPLIT_MIN_TIME: f64 = 1.0;

/// Fields `u_<` and `u_>` separated at `|x| = R`.
#[derive(Clone, Debug)]
pub struct SplitField<T: Real> {
    pub inner: Field<T>,
    pub outer: Field<T>,
    /// Radius actually used after clamping to `[h, L sqrt(n)]`.
    pub radius: T,
    /// Whether `t log t` was clamped.
    pub clamped: bool,
}

/// Splits `u` sharply at `R = t log t` clamped to `[h, L sqrt(n)]`.
///
/// Points with `|x| < R` go to `u_<`; when `R` reaches the box diagonal all of
/// `u` is internal.
pub fn split_field<T: Real>(u: &Field<T>, t: T) -> Result<SplitField<T>> {
    if !(t >= lit(SPLIT_MIN_TIME)) {
        return invalid(format!("split time t = {t} must be >= 1 so that t log t >= 0"));
    }
    let raw = t * t.ln();
    Ok(split_at_radius(u, raw))
}

/// Sharp split at radius `r`, clamped to `[h, L sqrt(n)]`.
pub fn split_at_radius<T: Real>(u: &Field<T>, r: T) -> SplitField<T> {
    let grid = u.grid();
    let lo = grid.spacing();
    let hi = grid.diagonal();
    let radius = r.max(lo).min(hi);
    let clamped = radius != r;
    let everything = radius >= hi;
    let zero = Complex::new(T::zero(), T::zero());
    let mut inner = Vec::with_capacity(u.values().len());
    let mut outer = Vec::with_capacity(u.values().len());
    for (z, &x) in u.values().iter().zip(grid.radius()) {
        if everything || x < radius {
            inner.push(*z);
            outer.push(zero);
        } else {
            inner.push(zero);
            outer.push(*z);
        }
    }
    SplitField {
        inner: Field::from_parts(grid.clone(), inner, u.time()),
        outer: Field::from_parts(grid.clone(), outer, u.time()),
        radius,
        clamped,
    }
}

/// One row of the propagation estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PropagationRow {
    pub t: f64,
    /// `int_{|x| >= R} |u(t)|^2`.
    pub lhs: f64,
    /// `int (1 ^ |x|/R) |u_0|^2 + |t - t_0| / R ||u||_2 sup_{[t_0, t]} ||grad u||_2`.
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropagationReport {
    pub radius: f64,
    /// `int (1 ^ |x|/R) |u_0|^2`.
    pub initial_weight: f64,
    pub rows: Vec<PropagationRow>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Evaluates both sides of the propagation estimate at every snapshot.
pub fn propagation_check<T: Real>(u0: &Field<T>, traj: &Trajectory<T>, radius: T) -> Result<PropagationReport> {
    if !(radius > T::zero()) {
        return invalid(format!("radius R = {radius} must be positive"));
    }
    let grid = u0.grid();
    let hn = to_f64(grid.cell_volume());
    let r = to_f64(radius);
    let initial_weight: f64 = u0
        .values()
        .iter()
        .zip(grid.radius())
        .map(|(z, &x)| to_f64(z.norm_sqr()) * (to_f64(x) / r).min(1.0))
        .sum::<f64>()
        * hn;
    let norm = to_f64(u0.mass()).sqrt();
    let t0 = to_f64(u0.time());
    let mut grad_sup: f64 = 0.0;
    let mut rows = Vec::new();
    let mut snaps: Vec<&Field<T>> = traj.snapshots().iter().collect();
    snaps.sort_by(|a, b| (to_f64(a.time()) - t0).abs().total_cmp(&(to_f64(b.time()) - t0).abs()));
    for s in snaps {
        if s.grid() != grid {
            return Err(Error::GridMismatch);
        }
        grad_sup = grad_sup.max((2.0 * to_f64(kinetic_energy(s))).sqrt());
        let t = to_f64(s.time());
        let lhs: f64 = s
            .values()
            .iter()
            .zip(grid.radius())
            .filter(|(_, &x)| x >= radius)
            .map(|(z, _)| to_f64(z.norm_sqr()))
            .sum::<f64>()
            * hn;
        let rhs = initial_weight + (t - t0).abs() / r * norm * grad_sup;
        rows.push(PropagationRow { t, lhs, rhs });
    }
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    let tolerance = 1e-8 * norm * norm;
    let pass = rows.iter().all(|row| row.lhs <= row.rhs + tolerance);
    Ok(PropagationReport { radius: r, initial_weight, rows, tolerance, pass })
}

/// Cube edge `a (2n)^{-1/2}` snapped down to a multiple of `h`.
pub fn internal_cube_edge<T: Real>(grid: &GridSpec<T>, a: f64) -> (f64, f64) {
    let requested = a / (2.0 * grid.dim() as f64).sqrt();
    let snapped = to_f64(snap_cube_edge(lit::<T>(requested), grid.spacing()));
    (requested, snapped)
}

/// `||u_<(t); l^{alpha+4}(L^2)||^{alpha+4}` with the internal cube edge.
pub fn internal_cube_power<T: Real>(u: &Field<T>, alpha: f64, a: f64) -> Result<f64> {
    let split = split_field(u, u.time())?;
    let m = alpha + 4.0;
    let (_, edge) = internal_cube_edge(u.grid(), a);
    Ok(to_f64(cube_norm(&split.inner, lit(m), lit(2.0), lit(edge))?).powf(m))
}

fn internal_norm_lhs<T: Real>(snaps: &[&Field<T>], alpha: f64, a: f64) -> Result<f64> {
    let samples: Vec<(f64, f64)> = snaps
        .iter()
        .map(|s| {
            let t = to_f64(s.time());
            internal_cube_power(s, alpha, a).map(|v| (t, v / (t * t.ln() + a)))
        })
        .collect::<Result<_>>()?;
    Ok(trapezoid(&samples))
}

/// The internal-norm integral and the shape of its bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InternalNormReport {
    pub alpha: f64,
    pub a: f64,
    pub t1: f64,
    pub t2: f64,
    pub requested_edge: f64,
    pub edge: f64,
    /// `int (t log t + a)^{-1} ||u_<; l^{alpha+4}(L^2)||^{alpha+4} dt`.
    pub lhs: f64,
    /// Measured `(A_alpha)` constant of the potential on `(0, a]`.
    pub a_alpha: f64,
    pub mass_norm: f64,
    pub energy: f64,
    /// `A_alpha^{-1} ||u||_2 sqrt(E) (sqrt(E) + ||u||_2)^alpha`.
    pub rhs_shape: f64,
    /// `lhs / rhs_shape`, the implied lower bound on the unknown constant.
    pub ratio: f64,
    /// Integral per unit time over each half of the interval.
    pub rate_first_half: f64,
    pub rate_second_half: f64,
}

/// The internal-norm integral over the snapshots with `t >= 1`.
pub fn internal_norm_integral<T: Real>(
    traj: &Trajectory<T>,
    pot: &PotentialOnGrid<T>,
    alpha: f64,
    a: f64,
) -> Result<InternalNormReport> {
    let snaps: Vec<&Field<T>> = traj
        .snapshots()
        .iter()
        .filter(|s| to_f64(s.time()) >= SPLIT_MIN_TIME)
        .collect();
    if snaps.len() < 2 {
        return Err(Error::Trajectory("internal-norm integral needs at least two snapshots with t >= 1".into()));
    }
    let samples: Vec<(f64, f64)> = snaps
        .iter()
        .map(|s| {
            let t = to_f64(s.time());
            internal_cube_power(s, alpha, a).map(|v| (t, v / (t * t.ln() + a)))
        })
        .collect::<Result<_>>()?;
    let lhs = trapezoid(&samples);
    let t1 = samples[0].0;
    let t2 = samples[samples.len() - 1].0;
    let mid = 0.5 * (t1 + t2);
    let first: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.0 <= mid).collect();
    let second: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.0 >= mid).collect();
    let rate = |part: &[(f64, f64)]| {
        if part.len() < 2 {
            f64::NAN
        } else {
            trapezoid(part) / (part[part.len() - 1].0 - part[0].0)
        }
    };
    let h3 = check_h3(pot, alpha, a)?;
    let u0 = snaps[0];
    let mass_norm = to_f64(u0.mass()).sqrt();
    let e = to_f64(energy(u0, pot)?);
    let se = e.max(0.0).sqrt();
    let rhs_shape = mass_norm * se * (se + mass_norm).powf(alpha) / h3.best_a_alpha;
    let (requested_edge, edge) = internal_cube_edge(u0.grid(), a);
    Ok(InternalNormReport {
        alpha,
        a,
        t1,
        t2,
        requested_edge,
        edge,
        lhs,
        a_alpha: h3.best_a_alpha,
        mass_norm,
        energy: e,
        rhs_shape,
        ratio: lhs / rhs_shape,
        rate_first_half: rate(&first),
        rate_second_half: rate(&second),
    })
}

/// Integral of a piecewise-linear series over `[lo, hi]`.
fn integrate_series(samples: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let value_at = |t: f64| -> f64 {
        let k = samples.partition_point(|s| s.0 < t);
        if k == 0 {
            return samples[0].1;
        }
        if k >= samples.len() {
            return samples[samples.len() - 1].1;
        }
        let (a, b) = (samples[k - 1], samples[k]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    };
    let mut pts = vec![(lo, value_at(lo))];
    pts.extend(samples.iter().copied().filter(|s| s.0 > lo && s.0 < hi));
    pts.push((hi, value_at(hi)));
    trapezoid(&pts)
}

/// One window `[t1 + (j-1) l, t1 + j l]` of the search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchWindow {
    pub start: f64,
    pub end: f64,
    /// `int ||u_<; l^{alpha+4}(L^2)||^{alpha+4} dt` over the window.
    pub integral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowSearchReport {
    pub epsilon: f64,
    pub length: f64,
    pub t1: f64,
    pub windows: Vec<SearchWindow>,
    /// End of the first window whose integral is at most `epsilon`.
    pub t2: Option<f64>,
    /// Measured left side of the internal-norm estimate over the trajectory,
    /// standing in for the nonconstructive `M`.
    pub measured_m: f64,
    /// `exp{(1 + log(t1 + l)) exp(M l / epsilon) - 1}` with the measured `M`.
    pub bound: f64,
}

/// Scans consecutive windows of length `length` from `t1` and returns the
/// first whose internal integral is at most `epsilon`.
pub fn window_search<T: Real>(
    traj: &Trajectory<T>,
    epsilon: f64,
    length: f64,
    alpha: f64,
    a: f64,
    t1: f64,
) -> Result<WindowSearchReport> {
    if !(epsilon > 0.0) || !(length > 0.0) {
        return invalid("window search needs epsilon > 0 and a positive window length");
    }
    if !(t1 >= SPLIT_MIN_TIME) {
        return invalid(format!("window search starts at t1 = {t1}, needs t1 >= 1"));
    }
    if length < a {
        return invalid(format!("window length {length} must be >= a = {a}"));
    }
    let snaps: Vec<&Field<T>> = traj
        .snapshots()
        .iter()
        .filter(|s| to_f64(s.time()) >= t1 - 1e-12)
        .collect();
    let t_end = snaps.last().map(|s| to_f64(s.time())).unwrap_or(t1);
    if snaps.len() < 2 || t_end - t1 < length * (1.0 - 1e-12) {
        return Err(Error::Trajectory(format!(
            "trajectory covers [{t1}, {t_end}], shorter than the window length {length}"
        )));
    }
    let powers: Vec<(f64, f64)> = snaps
        .iter()
        .map(|s| internal_cube_power(s, alpha, a).map(|v| (to_f64(s.time()), v)))
        .collect::<Result<_>>()?;
    let weighted: Vec<(f64, f64)> = powers.iter().map(|&(t, v)| (t, v / (t * t.ln() + a))).collect();
    let measured_m = trapezoid(&weighted);
    let mut windows = Vec::new();
    let mut t2 = None;
    let mut j = 1;
    loop {
        let start = t1 + (j - 1) as f64 * length;
        let end = t1 + j as f64 * length;
        if end > t_end * (1.0 + 1e-12) {
            break;
        }
        let integral = integrate_series(&powers, start, end);
        windows.push(SearchWindow { start, end, integral });
        if integral <= epsilon {
            t2 = Some(end);
            break;
        }
        j += 1;
    }
    let bound = ((1.0 + (t1 + length).ln()) * (measured_m * length / epsilon).exp() - 1.0).exp();
    Ok(WindowSearchReport { epsilon, length, t1, windows, t2, measured_m, bound })
}

/// Log-log decay fit of `||u(t)||_r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub r: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Fit window `[t_end / 2, t_end]`.
    pub window: (f64, f64),
    /// Least-squares slope of `log ||u||_r` against `log t` in the window.
    pub slope: f64,
    /// `-delta(r)`, the free decay exponent.
    pub free_slope: f64,
    /// Whether the norm is nonincreasing over the window.
    pub decreasing_in_window: bool,
}

/// Fits the decay of `||u(t)||_r` over the final dyadic window.
pub fn decay_scan<T: Real>(traj: &Trajectory<T>, r: f64) -> Result<DecayReport> {
    let dim = traj.snapshots().first().map(|s| s.grid().dim()).unwrap_or(3);
    let upper = if dim >= 3 { 2.0 * dim as f64 / (dim as f64 - 2.0) } else { f64::INFINITY };
    if !(r > 2.0 && r <= upper) {
        return invalid(format!("decay scan needs 2 < r <= 2* = {upper}, got r = {r}"));
    }
    let mut series: Vec<(f64, f64)> = traj
        .snapshots()
        .iter()
        .map(|s| lp_norm(s, lit(r)).map(|v| (to_f64(s.time()), to_f64(v))))
        .collect::<Result<_>>()?;
    series.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t_end = series.last().map(|s| s.0).unwrap_or(0.0);
    if t_end < 5.0 {
        return Err(Error::Trajectory(format!("decay scan needs a trajectory reaching t >= 5, got {t_end}")));
    }
    let window = (0.5 * t_end, t_end);
    let fit: Vec<(f64, f64)> = series
        .iter()
        .filter(|s| s.0 >= window.0 && s.1 > 0.0)
        .map(|s| (s.0.ln(), s.1.ln()))
        .collect();
    let slope = least_squares_slope(&fit);
    let in_window: Vec<f64> = series.iter().filter(|s| s.0 >= window.0).map(|s| s.1).collect();
    let decreasing_in_window = in_window.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    Ok(DecayReport {
        r,
        times: series.iter().map(|s| s.0).collect(),
        norms: series.iter().map(|s| s.1).collect(),
        window,
        slope,
        free_slope: -(dim as f64 / 2.0 - dim as f64 / r),
        decreasing_in_window,
    })
}

/// Slope of the least-squares line through `(x, y)` points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// What a diagnostics row evaluates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsOptions {
    /// Exponents `r` of the reported `||u||_r`.
    pub lp_exponents: Vec<f64>,
    /// Dilation regularization; `None` means one grid spacing.
    pub dilation_sigma: Option<f64>,
    /// Times below this use `R(t_min)` for the internal/external split.
    pub split_min_time: f64,
    /// `(alpha, a)` for the internal cube norm; `None` skips it.
    pub cube: Option<(f64, f64)>,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            lp_exponents: vec![4.0, 6.0],
            dilation_sigma: None,
            split_min_time: std::f64::consts::E,
            cube: None,
        }
    }
}

/// Per-step diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub hartree: f64,
    pub energy: f64,
    pub dilation: f64,
    /// `(r, ||u||_r)` for each configured exponent.
    pub lp_norms: Vec<(f64, f64)>,
    pub internal_mass: f64,
    pub external_mass: f64,
    /// `||u_<; l^{alpha+4}(L^2)||` when configured.
    pub internal_cube_norm: Option<f64>,
}

impl DiagnosticsRow {
    /// `||u||_r` for a configured exponent.
    pub fn lp(&self, r: f64) -> Option<f64> {
        self.lp_norms.iter().find(|(e, _)| *e == r).map(|(_, v)| *v)
    }
}

/// Evaluates one diagnostics row.
pub fn diagnostics_row<T: Real>(u: &Field<T>, pot: &PotentialOnGrid<T>, opts: &DiagnosticsOptions) -> Result<DiagnosticsRow> {
    check_pair(u, pot)?;
    let grid = u.grid();
    let t = to_f64(u.time());
    let spec = to_spectrum(u);
    let kinetic = 0.5 * to_f64(laplacian_quadratic_form(grid, &spec));
    let hartree = to_f64(hartree_term(u, pot)?);
    let grad = gradient_from_spectrum(grid, &spec, u.time());
    let sigma = opts.dilation_sigma.map(lit::<T>).unwrap_or_else(|| grid.spacing());
    let dilation = to_f64(dilation_from_gradient(u, &grad, sigma));
    let mut lp_norms = Vec::with_capacity(opts.lp_exponents.len());
    for &r in &opts.lp_exponents {
        lp_norms.push((r, to_f64(lp_norm(u, lit(r))?)));
    }
    let split_t = t.max(opts.split_min_time);
    let split = split_at_radius(u, lit::<T>(split_t * split_t.ln()));
    let internal_mass = to_f64(split.inner.mass());
    let external_mass = to_f64(split.outer.mass());
    let internal_cube_norm = match opts.cube {
        Some((alpha, a)) => {
            let (_, edge) = internal_cube_edge(grid, a);
            Some(to_f64(cube_norm(&split.inner, lit(alpha + 4.0), lit(2.0), lit(edge))?))
        }
        None => None,
    };
    let mass = to_f64(u.mass());
    let row = DiagnosticsRow {
        t,
        mass,
        kinetic,
        hartree,
        energy: kinetic + hartree,
        dilation,
        lp_norms,
        internal_mass,
        external_mass,
        internal_cube_norm,
    };
    if !row.energy.is_finite() || !row.mass.is_finite() || !row.dilation.is_finite() {
        return Err(Error::NonFinite { quantity: "diagnostics".into(), time: t });
    }
    Ok(row)
}

/// Mass fraction within `width` of the box faces, the wraparound monitor.
pub fn boundary_mass_fraction<T: Real>(u: &Field<T>, width: T) -> T {
    let grid = u.grid();
    let l = grid.half_length();
    let total = u.mass();
    if total == T::zero() {
        return T::zero();
    }
    let near: T = u
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let x = grid.coordinates(*i);
            (0..grid.dim()).any(|a| x[a].abs() >= l - width)
        })
        .map(|(_, z)| z.norm_sqr())
        .sum::<T>()
        * grid.cell_volume();
    near / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{sample_potential, PotentialSpec};

    fn gaussian(g: &GridSpec<f64>, amp: f64, width: f64, shift: [f64; 3], phase: impl Fn(&[f64]) -> f64) -> Field<f64> {
        Field::from_fn(g, 0.0, |x| {
            let r2: f64 = (0..3).map(|a| (x[a] - shift[a]).powi(2)).sum();
            Complex::from_polar(amp * (-r2 / (2.0 * width * width)).exp(), phase(x))
        })
    }

    #[test]
    fn zero_potential_and_zero_field() {
        let g = make_grid(3, 16, 6.0_f64).unwrap();
        let zero = sample_potential(&PotentialSpec::zero(), &g).unwrap();
        let u = gaussian(&g, 1.0, 1.0, [0.0; 3], |x| 0.3 * x[0]);
        assert_eq!(energy(&u, &zero).unwrap(), kinetic_energy(&u));
        assert_eq!(morawetz_integrand(&u, &zero).unwrap(), 0.0);
        let coulomb = sample_potential(&PotentialSpec::inverse_power(1.0, 1.0), &g).unwrap();
        let z = Field::zeros(&g, 0.0);
        assert_eq!(energy(&z, &coulomb).unwrap(), 0.0);
        assert_eq!(dilation_quantity(&z, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn kinetic_energy_of_gaussian() {
        // Oracle: for exp(-|x|^2/2) in 3-D, ||grad u||^2 = (3/2) pi^{3/2}.
        let g = make_grid(3, 32, 8.0_f64).unwrap();
        let u = gaussian(&g, 1.0, 1.0, [0.0; 3], |_| 0.0);
        let exact = 0.75 * std::f64::consts::PI.powf(1.5);
        assert!(((kinetic_energy(&u) - exact) / exact).abs() < 1e-8);
    }

    #[test]
    fn dilation_signs_and_bound() {
        let g = make_grid(3, 24, 8.0_f64).unwrap();
        let real = gaussian(&g, 1.0, 1.2, [0.3, 0.0, -0.2], |_| 0.0);
        assert!(dilation_quantity(&real, 0.5).unwrap().abs() < 1e-12);
        let outgoing = gaussian(&g, 1.0, 1.5, [0.0; 3], |x| 0.25 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
        for sigma in [0.0, 0.25, 1.0] {
            let d = dilation_quantity(&outgoing, sigma).unwrap();
            assert!(d > 0.0);
            let bound = outgoing.mass().sqrt() * (2.0 * kinetic_energy(&outgoing)).sqrt();
            assert!(d <= bound);
        }
    }

    #[test]
    fn outgoing_dilation_matches_direct_quadrature() {
        // u = e^{i|x|^2/2} g: Im(conj(u) xhat . grad u) = |x| g^2 pointwise.
        let g = make_grid(3, 32, 8.0_f64).unwrap();
        let u = gaussian(&g, 1.0, 1.0, [0.0; 3], |x| 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * 0.2);
        let d = dilation_quantity(&u, 0.0).unwrap();
        let direct: f64 = (0..g.len())
            .map(|i| {
                let r = g.radius()[i];
                0.2 * r * u.values()[i].norm_sqr()
            })
            .sum::<f64>()
            * g.cell_volume();
        assert!(((d - direct) / direct).abs() < 1e-6, "{d} vs {direct}");
    }

    #[test]
    fn morawetz_integrand_not_translation_invariant() {
        let g = make_grid(3, 16, 6.0_f64).unwrap();
        let pot = sample_potential(&PotentialSpec::inverse_power(1.0, 2.5), &g).unwrap();
        let centred = gaussian(&g, 1.0, 1.0, [0.0; 3], |_| 0.0);
        let shifted = gaussian(&g, 1.0, 1.0, [1.5, 0.0, 0.0], |_| 0.0);
        let a = morawetz_integrand(&centred, &pot).unwrap();
        let b = morawetz_integrand(&shifted, &pot).unwrap();
        assert!(a > 0.0 && b > 0.0);
        assert!((a - b).abs() > 1e-3 * a);
    }

    #[test]
    fn split_partitions_mass() {
        let g = make_grid(3, 16, 6.0_f64).unwrap();
        let u = gaussian(&g, 1.0, 2.0, [0.5, 0.0, 0.0], |x| x[1]);
        let s = split_field(&u, 2.5).unwrap();
        let total = s.inner.mass() + s.outer.mass();
        assert!((total - u.mass()).abs() <= 1e-14 * u.mass());
        let sum = s.inner.add(&s.outer).unwrap();
        assert_eq!(sum.values(), u.values());
        let all = split_field(&u, 100.0).unwrap();
        assert_eq!(all.outer.mass(), 0.0);
        let tiny = split_field(&u, 1.0).unwrap();
        assert!(tiny.clamped);
        let support: Vec<usize> = (0..g.len()).filter(|&i| tiny.inner.values()[i].norm() > 0.0).collect();
        assert_eq!(support, vec![g.origin_index()]);
        assert!(split_field(&u, 0.5).is_err());
    }

    #[test]
    fn series_integration_and_slope() {
        let s: Vec<(f64, f64)> = (0..=10).map(|k| (k as f64, 2.0 * k as f64)).collect();
        assert!((integrate_series(&s, 2.5, 7.5) - (7.5f64.powi(2) - 2.5f64.powi(2))).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = (1..10).map(|k| ((k as f64).ln(), -1.5 * (k as f64).ln() + 0.3)).collect();
        assert!((least_squares_slope(&pts) + 1.5).abs() < 1e-12);
    }
}
