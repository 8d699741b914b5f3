//! Checks of the integrability hypotheses (H1), (H2) and the repulsivity
//! hypothesis (H3) with condition (A_alpha).

use std::collections::BTreeMap;

use serde::Serialize;

use super::radial::{radial_lp_norm, RadialNorm};
use super::sampled::PotentialOnGrid;
use crate::error::{invalid, Error, Result};
use crate::scalar::{to_f64, Real};

/// Exponent offset used for strict inequalities when picking the most
/// favourable exponents of a window.
const STRICT_MARGIN: f64 = 1e-3;

/// Grid quadrature of `||V chi||_p` over the samples selected by `keep`.
fn grid_norm<T: Real>(pot: &PotentialOnGrid<T>, p: f64, keep: impl Fn(f64) -> bool, value: impl Fn(f64) -> f64) -> f64 {
    let grid = pot.grid();
    let weight = to_f64(grid.cell_volume());
    let mut sup: f64 = 0.0;
    let mut acc = 0.0;
    for (v, r) in pot.samples().iter().zip(grid.radius()) {
        if !keep(to_f64(*r)) {
            continue;
        }
        let m = value(to_f64(*v)).abs();
        sup = sup.max(m);
        if p.is_finite() && m > 0.0 {
            acc += m.powf(p);
        }
    }
    if p.is_infinite() {
        sup
    } else {
        (acc * weight).powf(1.0 / p)
    }
}

/// Near/far norms of `V chi(|x| <= a)` and `V chi(|x| > a)` on all of `R^n`
/// (radial reference quadrature) when the potential has an analytic spec.
fn reference_norms<T: Real>(
    pot: &PotentialOnGrid<T>,
    p_near: f64,
    p_far: f64,
    a: f64,
    value: impl Fn(f64) -> f64,
) -> Option<(RadialNorm, RadialNorm)> {
    let spec = pot.spec()?;
    let dim = pot.grid().dim();
    let bps = spec.breakpoints();
    let v = |r: f64| value(spec.profile(r));
    Some((
        radial_lp_norm(&v, dim, p_near, 0.0, a, &bps),
        radial_lp_norm(&v, dim, p_far, a, f64::INFINITY, &bps),
    ))
}

/// Exponent windows named after the results that require them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Local Cauchy problem in `H^1`, subcritical: `1 v n/4 <= p2 <= p1 <= inf`, `p2 > n/4`.
    Cauchy,
    /// Wave operators: additionally `p1 <= n/2`.
    WaveOperators,
    /// Asymptotic completeness: `1 v n/4 < p2 <= p1 < n/2`.
    Completeness,
}

impl Theorem {
    pub const ALL: [Theorem; 3] = [Theorem::Cauchy, Theorem::WaveOperators, Theorem::Completeness];

    /// Whether `(p1, p2)` lies in the exponent window of this result.
    pub fn admits(self, dim: usize, p1: f64, p2: f64) -> bool {
        let n = dim as f64;
        let floor = 1f64.max(n / 4.0);
        let base = floor <= p2 && p2 <= p1;
        match self {
            Theorem::Cauchy => base && p2 > n / 4.0,
            Theorem::WaveOperators => base && p2 > n / 4.0 && p1 <= n / 2.0,
            Theorem::Completeness => base && p2 > floor && p1 < n / 2.0,
        }
    }

    /// The most favourable exponents of the window: smallest `p2` (best for a
    /// local singularity) and largest `p1` (best for decay at infinity).
    pub fn extreme_exponents(self, dim: usize) -> (f64, f64) {
        let n = dim as f64;
        let p2 = 1f64.max(n / 4.0) + STRICT_MARGIN;
        let p1 = match self {
            Theorem::Cauchy => f64::INFINITY,
            Theorem::WaveOperators => n / 2.0,
            Theorem::Completeness => n / 2.0 - STRICT_MARGIN,
        };
        (p1, p2)
    }
}

/// Which exponent conditions of the theory hold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentWindows {
    /// `p2 > n/4` (subcritical local theory).
    pub p2_above_quarter_dim: bool,
    /// `p1 <= n/2` (wave operators).
    pub p1_at_most_half_dim: bool,
    /// `p1 < n/2` (completeness).
    pub p1_below_half_dim: bool,
    /// `p1 < n` (intermediate decay lemma).
    pub p1_below_dim: bool,
}

/// Outcome of the (H1) check `V in L^{p1} + L^{p2}` with the split at radius `a`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct H1Report {
    pub p1: f64,
    pub p2: f64,
    pub a: f64,
    /// `||V chi(|x| <= a)||_{p2}`, infinite when divergent.
    pub near_norm: f64,
    /// `||V chi(|x| > a)||_{p1}`, infinite when divergent.
    pub far_norm: f64,
    /// Same norms by grid quadrature over the periodic box.
    pub grid_near_norm: f64,
    pub grid_far_norm: f64,
    pub near_divergent: bool,
    pub far_divergent: bool,
    pub windows: ExponentWindows,
    /// Results whose exponent window holds with finite norms.
    pub theorems: BTreeMap<Theorem, bool>,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Checks (H1) for the pair `(p1, p2)` with the split radius `a`.
pub fn check_h1<T: Real>(pot: &PotentialOnGrid<T>, p1: f64, p2: f64, a: f64) -> Result<H1Report> {
    if !(p2 >= 1.0) || !(p1 >= 1.0) {
        return invalid(format!("(H1) exponents must be >= 1, got p1 = {p1}, p2 = {p2}"));
    }
    if p2 > p1 {
        return invalid(format!("(H1) needs p2 <= p1, got p1 = {p1}, p2 = {p2}"));
    }
    if !(a > 0.0) {
        return invalid(format!("split radius a = {a} must be positive"));
    }
    let dim = pot.grid().dim();
    let n = dim as f64;
    let mut notes = Vec::new();
    let grid_near_norm = grid_norm(pot, p2, |r| r <= a, |v| v);
    let grid_far_norm = grid_norm(pot, p1, |r| r > a, |v| v);
    let (near, far) = match reference_norms(pot, p2, p1, a, |v| v) {
        Some(pair) => pair,
        None => {
            notes.push("no analytic profile: divergence cannot be detected, grid norms reported".into());
            (
                RadialNorm { value: grid_near_norm, divergent: false },
                RadialNorm { value: grid_far_norm, divergent: false },
            )
        }
    };
    if !within_theory(dim) {
        notes.push(format!("dimension {dim} is below the n >= 3 setting of the theory"));
    }
    let finite = near.is_finite() && far.is_finite();
    let windows = ExponentWindows {
        p2_above_quarter_dim: p2 > n / 4.0,
        p1_at_most_half_dim: p1 <= n / 2.0,
        p1_below_half_dim: p1 < n / 2.0,
        p1_below_dim: p1 < n,
    };
    let theorems = Theorem::ALL
        .iter()
        .map(|t| (*t, finite && t.admits(dim, p1, p2)))
        .collect();
    let pass = finite && 1f64.max(n / 4.0) <= p2 && p2 <= p1;
    Ok(H1Report {
        p1,
        p2,
        a,
        near_norm: near.effective(),
        far_norm: far.effective(),
        grid_near_norm,
        grid_far_norm,
        near_divergent: near.divergent,
        far_divergent: far.divergent,
        windows,
        theorems,
        pass,
        notes,
    })
}

fn within_theory(dim: usize) -> bool {
    dim >= 3
}

/// For each result, whether some exponent pair of its window satisfies (H1).
///
/// Uses the most favourable exponents of each window, which is exact for
/// potentials whose near and far parts are ordered in `L^p` like power laws.
pub fn theorem_windows<T: Real>(pot: &PotentialOnGrid<T>, a: f64) -> Result<BTreeMap<Theorem, bool>> {
    let dim = pot.grid().dim();
    let mut out = BTreeMap::new();
    for t in Theorem::ALL {
        let (p1, p2) = t.extreme_exponents(dim);
        let ok = if p2 > p1 { false } else { check_h1(pot, p1, p2, a)?.theorems[&t] };
        out.insert(t, ok);
    }
    Ok(out)
}

/// Outcome of the (H2) check `V_- in L^{n/2} + L^inf`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct H2Report {
    pub a: f64,
    /// Whether `V >= 0`, so that `V_- = 0`.
    pub nonnegative: bool,
    /// `||V_- chi(|x| <= a)||_{n/2}`, infinite when divergent.
    pub near_norm: f64,
    /// `||V_- chi(|x| > a)||_inf`.
    pub far_sup: f64,
    pub grid_near_norm: f64,
    pub grid_far_sup: f64,
    pub pass: bool,
}

/// Checks (H2) with the negative part split at radius `a`.
pub fn check_h2<T: Real>(pot: &PotentialOnGrid<T>, a: f64) -> Result<H2Report> {
    if !(a > 0.0) {
        return invalid(format!("split radius a = {a} must be positive"));
    }
    let dim = pot.grid().dim();
    let p = dim as f64 / 2.0;
    let negative = |v: f64| (-v).max(0.0);
    let grid_near_norm = grid_norm(pot, p, |r| r <= a, negative);
    let grid_far_sup = grid_norm(pot, f64::INFINITY, |r| r > a, negative);
    let reference = reference_norms(pot, p, f64::INFINITY, a, negative);
    let (near, far) = reference.unwrap_or((
        RadialNorm { value: grid_near_norm, divergent: false },
        RadialNorm { value: grid_far_sup, divergent: false },
    ));
    let nonnegative = near.value == 0.0 && far.value == 0.0 && grid_near_norm == 0.0 && grid_far_sup == 0.0;
    let pass = nonnegative || (near.is_finite() && far.is_finite());
    Ok(H2Report {
        a,
        nonnegative,
        near_norm: near.effective(),
        far_sup: far.effective(),
        grid_near_norm,
        grid_far_sup,
        pass,
    })
}

/// Outcome of the (H3) check: radial, nonincreasing, and (A_alpha) on `(0, a]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct H3Report {
    pub alpha: f64,
    pub a: f64,
    pub monotone: bool,
    /// Largest increase `v(r2) - v(r1)` found with `r1 < r2`.
    pub max_increase: f64,
    /// Infimum over sampled pairs `0 < r1 < r2 <= a` of
    /// `alpha (v(r1) - v(r2)) / (r2^alpha - r1^alpha)`, clamped at zero.
    pub best_a_alpha: f64,
    pub radii_checked: usize,
    pub pass: bool,
}

/// Points of the dense radial scan used when an analytic profile is available.
const LOG_SCAN: usize = 400;
const LINEAR_SCAN: usize = 200;
/// Smallest scanned radius as a fraction of `a`.
const SCAN_DEPTH: f64 = 1e-3;

/// Checks (H3) for exponent `alpha >= 2` and radius `a`.
///
/// The radial profile is read from the grid samples (grouped by radius,
/// origin excluded) and, when the potential has an analytic spec, from a
/// dense logarithmic scan of `(a 1e-3, a]` plus a linear scan up to the box
/// diagonal. The infimum over all pairs equals the infimum over adjacent
/// radii, since a ratio of summed increments is bounded below by the smallest
/// ratio.
pub fn check_h3<T: Real>(pot: &PotentialOnGrid<T>, alpha: f64, a: f64) -> Result<H3Report> {
    if !(alpha >= 2.0) {
        return invalid(format!("(A_alpha) is checked for alpha >= 2, got {alpha}"));
    }
    if !(a > 0.0) {
        return invalid(format!("radius a = {a} must be positive"));
    }
    let grid = pot.grid();
    let h = to_f64(grid.spacing());
    let scale = pot.samples().iter().fold(0.0_f64, |m, v| m.max(to_f64(*v).abs()));
    let tol = 1e-12 * scale.max(1.0);

    let mut groups: BTreeMap<i64, (f64, f64, f64)> = BTreeMap::new();
    for (v, r) in pot.samples().iter().zip(grid.radius()) {
        let r = to_f64(*r);
        if r == 0.0 {
            continue;
        }
        let key = (r * r / (h * h)).round() as i64;
        let v = to_f64(*v);
        let e = groups.entry(key).or_insert((r, v, v));
        e.1 = e.1.min(v);
        e.2 = e.2.max(v);
    }
    for (r, lo, hi) in groups.values() {
        if hi - lo > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!(
                "potential samples are not radial: spread {} at radius {r}",
                hi - lo
            )));
        }
    }
    let mut profile: Vec<(f64, f64)> = groups.values().map(|(r, lo, _)| (*r, *lo)).collect();
    if let Some(spec) = pot.spec() {
        let diag = to_f64(grid.diagonal());
        for k in 0..=LOG_SCAN {
            let r = a * SCAN_DEPTH.powf(1.0 - k as f64 / LOG_SCAN as f64);
            profile.push((r, spec.profile(r)));
        }
        for k in 0..=LINEAR_SCAN {
            let r = 0.5 * a + 0.5 * a * k as f64 / LINEAR_SCAN as f64;
            profile.push((r, spec.profile(r)));
            let r = a + (diag - a).max(0.0) * k as f64 / LINEAR_SCAN as f64;
            profile.push((r, spec.profile(r)));
        }
    }
    profile.retain(|(r, v)| *r > 0.0 && v.is_finite());
    profile.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite radii"));
    profile.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-13 * y.0);

    let mut max_increase: f64 = 0.0;
    let mut best = f64::INFINITY;
    for w in profile.windows(2) {
        let ((r1, v1), (r2, v2)) = (w[0], w[1]);
        max_increase = max_increase.max(v2 - v1);
        if r2 <= a * (1.0 + 1e-12) {
            let ratio = alpha * (v1 - v2) / (r2.powf(alpha) - r1.powf(alpha));
            best = best.min(ratio);
        }
    }
    if !best.is_finite() {
        best = 0.0;
    }
    let monotone = max_increase <= tol;
    let best_a_alpha = best.max(0.0);
    let pass = monotone && best_a_alpha > 1e-12 * scale.max(1.0) / a.powf(alpha);
    Ok(H3Report {
        alpha,
        a,
        monotone,
        max_increase,
        best_a_alpha,
        radii_checked: profile.len(),
        pass,
    })
}

/// Combined record of the three hypothesis checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub h1: H1Report,
    pub h2: H2Report,
    pub h3: Option<H3Report>,
    pub windows: BTreeMap<Theorem, bool>,
    pub notes: Vec<String>,
}

/// Runs (H1), (H2), (H3) and the theorem-window search together.
pub fn check_assumptions<T: Real>(
    pot: &PotentialOnGrid<T>,
    p1: f64,
    p2: f64,
    alpha: f64,
    a: f64,
) -> Result<AssumptionReport> {
    let h1 = check_h1(pot, p1, p2, a)?;
    let h2 = check_h2(pot, a)?;
    let mut notes = h1.notes.clone();
    let h3 = match check_h3(pot, alpha, a) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("(H3) not evaluated: {e}"));
            None
        }
    };
    let windows = theorem_windows(pot, a)?;
    Ok(AssumptionReport { h1, h2, h3, windows, notes })
}
