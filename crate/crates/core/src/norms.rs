//! Lebesgue, Sobolev, space-time and cube-decomposed norms, plus the exponent
//! bookkeeping `delta(r) = n/2 - n/r`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::field::Field;
use crate::propagator::Trajectory;
use crate::scalar::{from_usize, lit, Real};
use crate::spectral::spectral_gradient;

fn lp_of_moduli<T: Real>(moduli: impl Iterator<Item = T> + Clone, r: T, weight: T) -> T {
    let max = moduli.clone().fold(T::zero(), T::max);
    if max == T::zero() {
        return T::zero();
    }
    if r.is_infinite() {
        return max;
    }
    let sum: T = moduli.map(|m| (m / max).powf(r)).sum();
    max * (sum * weight).powf(T::one() / r)
}

/// `||f||_r` by Riemann sum with weight `h^n`; `r = inf` is the max modulus.
pub fn lp_norm<T: Real>(f: &Field<T>, r: T) -> Result<T> {
    if !(r >= T::one()) {
        return invalid(format!("L^r norm needs r >= 1, got {r}"));
    }
    Ok(lp_of_moduli(
        f.values().iter().map(|z| z.norm()),
        r,
        f.grid().cell_volume(),
    ))
}

/// `||grad f||_r`, the `L^r` norm of the Euclidean length of the spectral gradient.
pub fn gradient_lp_norm<T: Real>(f: &Field<T>, r: T) -> Result<T> {
    if !(r >= T::one()) {
        return invalid(format!("L^r norm needs r >= 1, got {r}"));
    }
    let grad = spectral_gradient(f);
    let lengths: Vec<T> = (0..f.grid().len())
        .map(|i| grad.iter().map(|c| c.values()[i].norm_sqr()).sum::<T>().sqrt())
        .collect();
    Ok(lp_of_moduli(lengths.iter().copied(), r, f.grid().cell_volume()))
}

/// `||f; H^1_r|| = ||f||_r + ||grad f||_r`.
pub fn h1r_norm<T: Real>(f: &Field<T>, r: T) -> Result<T> {
    Ok(lp_norm(f, r)? + gradient_lp_norm(f, r)?)
}

/// `||f; H^1|| = ||f||_2 + ||grad f||_2`.
pub fn h1_norm<T: Real>(f: &Field<T>) -> T {
    h1r_norm(f, lit(2.0)).expect("r = 2 is valid")
}

/// `||u; L^q(I, L^r)||` over the trajectory snapshots inside `interval`,
/// trapezoidal in time. `q = inf` is the sup over samples.
pub fn spacetime_norm<T: Real>(traj: &Trajectory<T>, q: T, r: T, interval: (T, T)) -> Result<T> {
    if !(q >= T::one()) {
        return invalid(format!("time exponent q must be >= 1, got {q}"));
    }
    let (lo, hi) = if interval.0 <= interval.1 { interval } else { (interval.1, interval.0) };
    let mut samples: Vec<(T, T)> = traj
        .snapshots()
        .iter()
        .filter(|s| s.time() >= lo && s.time() <= hi)
        .map(|s| lp_norm(s, r).map(|v| (s.time(), v)))
        .collect::<Result<_>>()?;
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
    if samples.is_empty() {
        return Ok(T::zero());
    }
    if q.is_infinite() {
        return Ok(samples.iter().map(|s| s.1).fold(T::zero(), T::max));
    }
    let integral = samples
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1.powf(q) + w[1].1.powf(q)) * lit(0.5))
        .sum::<T>();
    Ok(integral.powf(T::one() / q))
}

/// `||f; l^m(L^r)||` over the partition into cubes of edge `edge` centred at
/// `i * edge`, `i` in `Z^n`. The edge must be an integer multiple of `h`.
pub fn cube_norm<T: Real>(f: &Field<T>, m: T, r: T, edge: T) -> Result<T> {
    if !(m >= T::one()) || !(r >= T::one()) {
        return invalid(format!("cube norm needs m, r >= 1, got m = {m}, r = {r}"));
    }
    let grid = f.grid();
    let h = grid.spacing();
    let ratio = edge / h;
    let cells = ratio.round();
    if !(cells >= T::one()) || (ratio - cells).abs() > lit::<T>(1e-9) * ratio {
        return invalid(format!("cube edge {edge} is not a positive multiple of the spacing {h}"));
    }
    let cells = cells.to_i64().expect("cube width fits in i64");
    let n = grid.points_per_axis() as i64;
    let dim = grid.dim();
    // Axis index i has coordinate (i - N/2) h; its cube is floor(x/edge + 1/2).
    let cube_of = |i: usize| -> i64 { (2 * (i as i64 - n / 2) + cells).div_euclid(2 * cells) };

    let mut per_cube: HashMap<[i64; 3], Vec<T>> = HashMap::new();
    for (flat, z) in f.values().iter().enumerate() {
        let idx = grid.multi_index(flat);
        let mut key = [0i64; 3];
        for axis in 0..dim {
            key[axis] = cube_of(idx[axis]);
        }
        per_cube.entry(key).or_default().push(z.norm());
    }
    let weight = grid.cell_volume();
    let mut keys: Vec<_> = per_cube.keys().copied().collect();
    keys.sort_unstable();
    let local: Vec<T> = keys
        .iter()
        .map(|k| lp_of_moduli(per_cube[k].iter().copied(), r, weight))
        .collect();
    Ok(lp_of_moduli(local.iter().copied(), m, T::one()))
}

/// Largest integer multiple of the spacing not exceeding `edge` (at least one cell).
pub fn snap_cube_edge<T: Real>(edge: T, spacing: T) -> T {
    let cells = (edge / spacing).floor().max(T::one());
    cells * spacing
}

/// Exponent record for `L^r` in dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SobolevExponents<T: Real> {
    pub dim: usize,
    pub r: T,
    /// `delta(r) = n/2 - n/r`.
    pub delta: T,
    /// Hoelder conjugate `r'` with `1/r + 1/r' = 1`.
    pub conjugate: T,
}

/// Builds the exponent record for `r` in `[2, inf]`.
pub fn exponents<T: Real>(dim: usize, r: T) -> Result<SobolevExponents<T>> {
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    if !(r >= lit(2.0)) {
        return invalid(format!("exponent r = {r} outside [2, inf]"));
    }
    Ok(SobolevExponents {
        dim,
        r,
        delta: delta(dim, r),
        conjugate: conjugate(r),
    })
}

/// `delta(r) = n/2 - n/r`.
pub fn delta<T: Real>(dim: usize, r: T) -> T {
    let n: T = from_usize(dim);
    n / lit(2.0) - n / r
}

/// Hoelder conjugate of `r` (`1 <-> inf`).
pub fn conjugate<T: Real>(r: T) -> T {
    if r.is_infinite() {
        T::one()
    } else if r == T::one() {
        T::infinity()
    } else {
        r / (r - T::one())
    }
}

/// Sobolev exponent `2* = 2n/(n-2)`, defined for `n >= 3`.
pub fn two_star<T: Real>(dim: usize) -> Result<T> {
    if dim < 3 {
        return invalid(format!("2* = 2n/(n-2) is only defined for n >= 3, got n = {dim}"));
    }
    let n: T = from_usize(dim);
    Ok(lit::<T>(2.0) * n / (n - lit(2.0)))
}

/// `r_0 = 2n/(n-1)`, the exponent with `delta(r_0) = 1/2`.
pub fn r_zero<T: Real>(dim: usize) -> Result<T> {
    if dim < 2 {
        return invalid("r_0 = 2n/(n-1) needs n >= 2");
    }
    let n: T = from_usize(dim);
    Ok(lit::<T>(2.0) * n / (n - T::one()))
}

impl<T: Real> SobolevExponents<T> {
    pub fn two_star(&self) -> Result<T> {
        two_star(self.dim)
    }

    /// Admissibility of `(q, r)`: `0 <= 2/q = delta(r) < 1`.
    pub fn admissible(&self, q: T) -> bool {
        let lhs = lit::<T>(2.0) / q;
        let tol = lit::<T>(1e-12);
        lhs >= T::zero() && (lhs - self.delta).abs() <= tol && self.delta < T::one()
    }

    /// The time exponent `q = 2/delta(r)` pairing with `r`, if admissible.
    pub fn admissible_time_exponent(&self) -> Option<T> {
        if self.delta < T::one() {
            Some(lit::<T>(2.0) / self.delta)
        } else {
            None
        }
    }
}
