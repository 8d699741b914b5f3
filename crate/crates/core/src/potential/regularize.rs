//! The angular regularization `V_j(x) = int V(x - |x| z / j) phi(z) dz`.

use std::sync::Arc;

use super::radial::{radial_lp_norm, RadialNorm};
use super::sampled::{sample_potential, PotentialOnGrid};
use super::spec::{BallRule, PotentialKind, PotentialSpec};
use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::scalar::Real;

/// Gauss points per variable of the ball quadrature.
pub const DEFAULT_REGULARIZATION_ORDER: usize = 8;

/// The analytic description of `V_j` in dimension `dim`.
pub fn regularized_spec(spec: &PotentialSpec, j: f64, dim: usize, order: usize) -> Result<PotentialSpec> {
    if !(j >= 2.0) {
        return invalid(format!("regularization index j = {j} must be >= 2"));
    }
    spec.validate(dim)?;
    let rule = BallRule::new(dim, order)?;
    Ok(PotentialSpec {
        kind: PotentialKind::Regularized { base: Box::new(spec.clone()), j, rule: Arc::new(rule) },
        cutoff: None,
    })
}

/// `V_j` sampled on `grid`.
pub fn regularize<T: Real>(
    spec: &PotentialSpec,
    j: f64,
    grid: &GridSpec<T>,
    order: usize,
) -> Result<PotentialOnGrid<T>> {
    let reg = regularized_spec(spec, j, grid.dim(), order)?;
    sample_potential(&reg, grid)
}

/// `||V||_p` over `R^n` by radial quadrature.
pub fn spec_lp_norm(spec: &PotentialSpec, dim: usize, p: f64) -> RadialNorm {
    radial_lp_norm(&|r| spec.profile(r), dim, p, 0.0, f64::INFINITY, &spec.breakpoints())
}

/// `||V - W||_p` over `R^n` by radial quadrature.
pub fn spec_lp_distance(v: &PotentialSpec, w: &PotentialSpec, dim: usize, p: f64) -> RadialNorm {
    let mut bps = v.breakpoints();
    bps.extend(w.breakpoints());
    radial_lp_norm(&|r| v.profile(r) - w.profile(r), dim, p, 0.0, f64::INFINITY, &bps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::hypotheses::check_h3;

    #[test]
    fn constant_is_preserved() {
        let g = make_grid(3, 8, 2.0_f64).unwrap();
        let pot = regularize(&PotentialSpec::radial("c", |_| 1.75), 3.0, &g, 8).unwrap();
        assert!(pot.samples().iter().all(|v| (v - 1.75).abs() < 1e-13));
    }

    #[test]
    fn rejects_small_j() {
        let g = make_grid(3, 8, 2.0_f64).unwrap();
        assert!(regularize(&PotentialSpec::inverse_power(1.0, 2.5), 1.5, &g, 8).is_err());
    }

    #[test]
    fn l1_bound_and_convergence() {
        let base = PotentialSpec::inverse_power(1.0, 2.5).with_cutoff(1.0);
        let norm = spec_lp_norm(&base, 3, 1.0);
        assert!((norm.value - 8.0 * std::f64::consts::PI).abs() < 1e-6);
        let mut last = f64::INFINITY;
        for j in [2.0, 4.0, 8.0] {
            let reg = regularized_spec(&base, j, 3, 8).unwrap();
            let nj = spec_lp_norm(&reg, 3, 1.0);
            assert!(nj.value <= norm.value / (1.0 - 1.0 / j) * (1.0 + 1e-9), "j = {j}");
            let d = spec_lp_distance(&reg, &base, 3, 1.0).value;
            assert!(d < last, "j = {j}: {d} !< {last}");
            last = d;
        }
    }

    #[test]
    fn monotone_and_degraded_constant() {
        let (gamma, alpha, a) = (2.5, 2.0, 1.0);
        let g = make_grid(3, 16, 4.0_f64).unwrap();
        let base = sample_potential(&PotentialSpec::inverse_power(1.0, gamma), &g).unwrap();
        let a_base = check_h3(&base, alpha, a).unwrap().best_a_alpha;
        for j in [2.0, 4.0, 8.0] {
            let reg = regularize(&PotentialSpec::inverse_power(1.0, gamma), j, &g, 8).unwrap();
            let aj = a / (1.0 + 1.0 / j);
            let r = check_h3(&reg, alpha, aj).unwrap();
            assert!(r.monotone);
            assert!(r.best_a_alpha >= a_base * (1.0 - 1.0 / j).powf(alpha) * (1.0 - 1e-9), "j = {j}");
        }
    }
}
