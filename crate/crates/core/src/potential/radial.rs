//! One-dimensional radial integrals `|S^{n-1}| int |v(r)|^p r^{n-1} dr` with
//! divergence detection at the origin and at infinity.

use serde::Serialize;

use crate::quadrature::{gauss_legendre, unit_sphere_area};

/// Levels of dyadic shells used towards `0` and towards infinity.
const DYADIC_LEVELS: usize = 80;
/// Relative growth from one extra shell above which an integral is declared divergent.
const DIVERGENCE_GROWTH: f64 = 0.05;

/// Value of a radial norm and whether the refinement test flagged divergence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialNorm {
    pub value: f64,
    pub divergent: bool,
}

impl RadialNorm {
    /// The norm, or `+inf` when divergent.
    pub fn effective(&self) -> f64 {
        if self.divergent {
            f64::INFINITY
        } else {
            self.value
        }
    }

    pub fn is_finite(&self) -> bool {
        !self.divergent && self.value.is_finite()
    }
}

struct Shell {
    integral: f64,
    sup: f64,
}

fn shell(v: &dyn Fn(f64) -> f64, dim: usize, p: f64, lo: f64, hi: f64, nodes: &(Vec<f64>, Vec<f64>)) -> Shell {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut integral = 0.0;
    let mut sup: f64 = 0.0;
    for (t, w) in nodes.0.iter().zip(&nodes.1) {
        let r = mid + half * t;
        let m = v(r).abs();
        sup = sup.max(m);
        if p.is_finite() {
            integral += w * m.powf(p) * r.powi(dim as i32 - 1);
        }
    }
    Shell { integral: integral * half, sup }
}

/// `||V chi(lo <= |x| <= hi)||_p` for `V(x) = v(|x|)` in dimension `dim`.
///
/// `hi` may be infinite and `lo` may be zero. `breakpoints` lists radii where
/// `v` may jump or kink; panels are aligned with them. A norm is declared
/// divergent when extending the range by one dyadic shell towards `0` or
/// infinity grows it by more than 5%.
pub fn radial_lp_norm(
    v: &dyn Fn(f64) -> f64,
    dim: usize,
    p: f64,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
) -> RadialNorm {
    assert!(p > 0.0, "exponent must be positive");
    assert!(lo >= 0.0 && hi > lo, "radial range must be increasing");
    let nodes = gauss_legendre(16);
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi && b.is_finite())
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());

    // Inner anchor: first point beyond which panels are regular.
    let inner = if lo > 0.0 {
        lo
    } else {
        cuts.first().copied().unwrap_or(if hi.is_finite() { hi } else { 1.0 })
    };
    let outer = if hi.is_finite() { hi } else { cuts.last().copied().unwrap_or(inner).max(inner) };

    let mut integral = 0.0;
    let mut sup: f64 = 0.0;
    let mut divergent = false;

    let accumulate = |s: &Shell, integral: &mut f64, sup: &mut f64| {
        *integral += s.integral;
        *sup = sup.max(s.sup);
    };

    // Regular panels between inner and outer, subdivided at the breakpoints.
    let mut edges = vec![inner];
    edges.extend(cuts.iter().copied().filter(|c| *c > inner && *c < outer));
    edges.push(outer);
    for w in edges.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let panels = 16;
        let width = (w[1] - w[0]) / panels as f64;
        for k in 0..panels {
            let a = w[0] + k as f64 * width;
            let s = shell(v, dim, p, a, a + width, &nodes);
            accumulate(&s, &mut integral, &mut sup);
        }
    }

    let growth_check = |level_shells: &mut dyn Iterator<Item = Shell>, integral: &mut f64, sup: &mut f64| -> bool {
        let mut last_integral = 0.0;
        let mut last_sup_gain = 0.0;
        for s in level_shells {
            let before_sup = *sup;
            accumulate(&s, integral, sup);
            last_integral = s.integral;
            last_sup_gain = (*sup - before_sup).max(0.0);
        }
        if p.is_finite() {
            last_integral > DIVERGENCE_GROWTH * (*integral - last_integral).max(f64::MIN_POSITIVE)
        } else {
            last_sup_gain > DIVERGENCE_GROWTH * (*sup - last_sup_gain).max(f64::MIN_POSITIVE)
        }
    };

    if lo == 0.0 {
        let mut shells = (0..DYADIC_LEVELS).map(|k| {
            let hi_k = inner * 0.5f64.powi(k as i32);
            shell(v, dim, p, 0.5 * hi_k, hi_k, &nodes)
        });
        divergent |= growth_check(&mut shells, &mut integral, &mut sup);
    }
    if hi.is_infinite() {
        let mut shells = (0..DYADIC_LEVELS).map(|k| {
            let lo_k = outer * 2f64.powi(k as i32);
            shell(v, dim, p, lo_k, 2.0 * lo_k, &nodes)
        });
        divergent |= growth_check(&mut shells, &mut integral, &mut sup);
    }

    let value = if p.is_infinite() {
        sup
    } else {
        (unit_sphere_area(dim) * integral).powf(1.0 / p)
    };
    RadialNorm { value, divergent: divergent || !value.is_finite() }
}
