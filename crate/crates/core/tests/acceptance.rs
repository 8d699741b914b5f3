//! Acceptance suite: one test per criterion, each printing a single
//! `PASS`/`FAIL` line before asserting. Desk scale is n = 3, 48^3, L = 16,
//! dt = 5e-3. Run with `cargo test -p hartree-core --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::time::Instant;

use hartree_core::potential::{check_h3, regularized_spec, spec_lp_distance, spec_lp_norm, theorem_windows, Theorem};
use hartree_core::scattering::ScatteringConfig;
use hartree_core::*;
use num_complex::Complex;

const N: usize = 48;
const L: f64 = 16.0;
const DT: f64 = 5e-3;

fn verdict(id: u32, name: &str, pass: bool, detail: &str, started: Instant) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} [{id:02}] {name}: {detail} ({:.1}s)", started.elapsed().as_secs_f64());
    pass
}

fn desk_grid() -> GridSpec64 {
    make_grid(3, N, L).unwrap()
}

fn power(gamma: f64, grid: &GridSpec64) -> PotentialOnGrid64 {
    sample_potential(&PotentialSpec::inverse_power(1.0, gamma), grid).unwrap()
}

/// Centered Gaussian of width `width` scaled to `L^2` norm `norm`.
fn gaussian(grid: &GridSpec64, width: f64, norm: f64) -> Field64 {
    let f = Field::from_fn(grid, 0.0, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex::new((-r2 / (2.0 * width * width)).exp(), 0.0)
    });
    let m = f.mass().sqrt();
    f.scale(Complex::new(norm / m, 0.0))
}

fn l2_distance(a: &Field64, b: &Field64) -> f64 {
    a.sub(b).unwrap().mass().sqrt()
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn criterion_01_conservation() {
    let started = Instant::now();
    let grid = desk_grid();
    let pot = power(2.5, &grid);
    let u0 = gaussian(&grid, 1.0, 1.0);
    let mut worst_mass: f64 = 0.0;
    let mut drifts = Vec::new();
    for (dt, stride) in [(1e-2, 10), (5e-3, 20), (2.5e-3, 40)] {
        let cfg = EvolveConfig64::new(dt, 0.0, 1.0)
            .with_sample_stride(usize::MAX)
            .with_diagnostics(Some(DiagnosticsOptions::default()), stride);
        let traj = evolve(&u0, &pot, &cfg).unwrap();
        let rows = traj.diagnostics();
        assert_eq!(rows.len(), 11);
        let (m0, e0) = (rows[0].mass, rows[0].energy);
        for r in rows {
            worst_mass = worst_mass.max(((r.mass - m0) / m0).abs());
        }
        let drift = rows.iter().map(|r| ((r.energy - e0) / e0).abs()).fold(0.0, f64::max);
        drifts.push((dt, drift));
    }
    let fit: Vec<(f64, f64)> = drifts.iter().map(|(dt, d)| (dt.ln(), d.ln())).collect();
    let order = slope(&fit);
    let pairwise: Vec<f64> = drifts.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
    let pass = worst_mass < 1e-11 && (1.8..=2.2).contains(&order);
    let detail = format!(
        "mass drift {worst_mass:.2e} (< 1e-11); energy drifts {:?}, fitted order {order:.3} (pairwise {:.3}, {:.3}) in [1.8, 2.2]",
        drifts.iter().map(|d| format!("{:.2e}", d.1)).collect::<Vec<_>>(),
        pairwise[0],
        pairwise[1]
    );
    assert!(verdict(1, "conservation", pass, &detail, started));
}

/// Exact free evolution of `exp(-x^2 / 2)` on the periodic line of period `2 L`.
fn periodic_free_gaussian(x: f64, t: f64, half_length: f64) -> Complex<f64> {
    let s = Complex::new(1.0, t);
    let mut acc = Complex::new(0.0, 0.0);
    for m in -3..=3 {
        let y = x + 2.0 * half_length * m as f64;
        acc += (-(y * y) / (s * 2.0)).exp();
    }
    acc / s.sqrt()
}

#[test]
fn criterion_02_free_propagator_oracle() {
    let started = Instant::now();
    let half = 24.0;
    let grid = make_grid(3, 96, half).unwrap();
    let u0 = Field::from_fn(&grid, 0.0, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex::new((-r2 / 2.0).exp(), 0.0)
    });
    let mut worst: f64 = 0.0;
    let mut snaps = Vec::new();
    for k in 0..=10 {
        let t = 0.5 * k as f64;
        let u = free_propagate(&u0, t);
        let peak = periodic_free_gaussian(0.0, t, half).norm().powi(3);
        let axis: Vec<Complex<f64>> =
            grid.axis_coordinates().iter().map(|&x| periodic_free_gaussian(x, t, half)).collect();
        let n = grid.points_per_axis();
        for (flat, z) in u.values().iter().enumerate() {
            let [i, j, l] = grid.multi_index(flat);
            let exact = axis[i] * axis[j] * axis[l];
            worst = worst.max((z - exact).norm() / peak);
        }
        assert_eq!(u.values().len(), n * n * n);
        snaps.push(u);
    }
    let traj = Trajectory64::from_snapshots(snaps).unwrap();
    let decay = decay_scan(&traj, 6.0).unwrap();
    let rel = (decay.slope - decay.free_slope).abs() / decay.free_slope.abs();
    let pass = worst < 1e-7 && rel <= 0.1;
    let detail = format!(
        "max pointwise relative error {worst:.2e} (< 1e-7) for t <= 5; L^6 slope {:.4} vs {:.1} over [{}, {}] ({:.1}% off, <= 10%)",
        decay.slope,
        decay.free_slope,
        decay.window.0,
        decay.window.1,
        100.0 * rel
    );
    assert!(verdict(2, "free propagator oracle", pass, &detail, started));
}

#[test]
fn criterion_03_morawetz() {
    let started = Instant::now();
    let grid = desk_grid();
    let u0 = gaussian(&grid, 1.0, 1.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for gamma in [2.2, 2.5, 2.8] {
        let pot = power(gamma, &grid);
        let cfg = EvolveConfig64::new(DT, 0.0, 2.0).with_sample_stride(10).with_diagnostics(None, 1);
        let traj = evolve(&u0, &pot, &cfg).unwrap();
        let rep = morawetz_check(&traj, &pot, 0.0, 2.0, grid.spacing(), None, Default::default()).unwrap();
        let xhat: Vec<f64> = traj.snapshots().iter().map(|s| morawetz_integrand(s, &pot).unwrap()).collect();
        let xhat_scale = xhat.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let xhat_negative = xhat.iter().filter(|v| **v < -1e-8 * xhat_scale).count();
        let ok = rep.pass && xhat_negative == 0;
        pass &= ok;
        parts.push(format!(
            "gamma {gamma}: min integrand {:.2e} ({} negative, x/|x| form {} negative), {:.4e} <= {:.4e} <= {:.4e}, {} D decreases",
            rep.min_integrand,
            rep.negative_integrand_samples,
            xhat_negative,
            rep.lhs,
            rep.rhs_boundary,
            rep.rhs_bound,
            rep.monotonicity_violations
        ));
    }
    assert!(verdict(3, "Morawetz", pass, &parts.join("; "), started));
}

/// Periodic displacement index of `i - j` in the sample array.
fn wrap(i: usize, j: usize, n: usize) -> usize {
    (i + n + n / 2 - j) % n
}

/// Spectral derivative matrix on `n` periodic points of spacing `h`, with the
/// Nyquist mode dropped.
fn derivative_matrix(n: usize, h: f64) -> Vec<f64> {
    let period = n as f64 * h;
    let mut d = vec![0.0; n * n];
    for m in 0..n {
        for p in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                if j == n / 2 {
                    continue;
                }
                let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * 2.0 * PI / period;
                // i k exp(i k (m - p) h), real part of the symmetric sum.
                acc += -k * (k * (m as f64 - p as f64) * h).sin();
            }
            d[m * n + p] = acc / n as f64;
        }
    }
    d
}

#[test]
fn criterion_04_small_grid_oracles() {
    let started = Instant::now();
    let n = 12;
    let grid = make_grid(3, n, 3.0).unwrap();
    let h = grid.spacing();
    let dv = h * h * h;
    let pot = power(2.5, &grid);
    let u = Field::from_fn(&grid, 0.0, |x| {
        let r2 = (x[0] - 0.3).powi(2) + x[1].powi(2) + (x[2] + 0.2).powi(2);
        Complex::from_polar((-r2 / 1.5).exp(), 0.4 * x[0] - 0.2 * x[2])
    });
    let rho: Vec<f64> = u.values().iter().map(|z| z.norm_sqr()).collect();
    let v = pot.samples();
    let idx = |a: [usize; 3]| (a[0] * n + a[1]) * n + a[2];
    let len = grid.len();

    // Convolution and Hartree energy by direct double sums.
    let conv: Vec<f64> = (0..len)
        .map(|i| {
            let a = grid.multi_index(i);
            let acc: f64 = rho
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    let b = grid.multi_index(j);
                    v[idx([wrap(a[0], b[0], n), wrap(a[1], b[1], n), wrap(a[2], b[2], n)])] * r
                })
                .sum();
            acc * dv
        })
        .collect();
    let rho_field = Field::from_real_fn(&grid, 0.0, |x| {
        let r2 = (x[0] - 0.3).powi(2) + x[1].powi(2) + (x[2] + 0.2).powi(2);
        (-2.0 * r2 / 1.5).exp()
    });
    let fast = convolve_density(&pot, &rho_field).unwrap();
    let conv_scale = conv.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let conv_err = fast.values().iter().zip(&conv).map(|(f, c)| (f.re - c).abs()).fold(0.0, f64::max) / conv_scale;
    let p_brute = 0.5 * rho.iter().zip(&conv).map(|(r, c)| r * c).sum::<f64>() * dv;
    let p_err = ((hartree_term(&u, &pot).unwrap() - p_brute) / p_brute).abs();

    // Symmetrized Morawetz double sum with the spectral derivative of V.
    let dmat = derivative_matrix(n, h);
    let mut grad_v = vec![[0.0; 3]; len];
    for (flat, g) in grad_v.iter_mut().enumerate() {
        let a = grid.multi_index(flat);
        for axis in 0..3 {
            let mut acc = 0.0;
            for p in 0..n {
                let mut b = a;
                b[axis] = p;
                acc += dmat[a[axis] * n + p] * v[idx(b)];
            }
            g[axis] = acc;
        }
    }
    let weight = |flat: usize| {
        let x = grid.coordinates(flat);
        let r = grid.radius()[flat];
        if r == 0.0 {
            [0.0; 3]
        } else {
            [x[0] / r, x[1] / r, x[2] / r]
        }
    };
    let mut sym = 0.0;
    for i in 0..len {
        let a = grid.multi_index(i);
        let wi = weight(i);
        for j in 0..len {
            let b = grid.multi_index(j);
            let wj = weight(j);
            let g = grad_v[idx([wrap(a[0], b[0], n), wrap(a[1], b[1], n), wrap(a[2], b[2], n)])];
            let dot: f64 = (0..3).map(|k| (wi[k] - wj[k]) * g[k]).sum();
            sym += rho[i] * rho[j] * dot;
        }
    }
    let sym = -0.5 * sym * dv * dv;
    let fast_m = morawetz_integrand(&u, &pot).unwrap();
    let m_err = ((fast_m - sym) / sym).abs();
    let pass = conv_err < 1e-6 && p_err < 1e-6 && m_err < 1e-6;
    let detail = format!(
        "12^3 relative errors: convolution {conv_err:.2e}, Hartree energy {p_err:.2e}, symmetrized Morawetz sum {m_err:.2e} (all < 1e-6)"
    );
    assert!(verdict(4, "small-grid oracles", pass, &detail, started));
}

#[test]
fn criterion_05_regularization() {
    let started = Instant::now();
    let base = PotentialSpec::inverse_power(1.0, 2.5).with_cutoff(1.0);
    let norm = spec_lp_norm(&base, 3, 1.0).value;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut last = f64::INFINITY;
    for j in [2.0, 4.0, 8.0] {
        let reg = regularized_spec(&base, j, 3, potential::DEFAULT_REGULARIZATION_ORDER).unwrap();
        let nj = spec_lp_norm(&reg, 3, 1.0).value;
        let bound = norm / (1.0 - 1.0 / j);
        let d = spec_lp_distance(&reg, &base, 3, 1.0).value;
        pass &= nj <= bound * (1.0 + 1e-9) && d < last;
        parts.push(format!("j={j}: ||V_j||_1 {nj:.4} <= {bound:.4}, ||V_j - V||_1 {d:.4}"));
        last = d;
    }
    let (gamma, alpha, a) = (2.5, 2.0, 1.0);
    let grid = make_grid(3, 16, 4.0).unwrap();
    let a_base = check_h3(&power(gamma, &grid), alpha, a).unwrap().best_a_alpha;
    for j in [2.0, 4.0, 8.0] {
        let reg = potential::regularize(
            &PotentialSpec::inverse_power(1.0, gamma),
            j,
            &grid,
            potential::DEFAULT_REGULARIZATION_ORDER,
        )
        .unwrap();
        let r = check_h3(&reg, alpha, a / (1.0 + 1.0 / j)).unwrap();
        let degraded = a_base * (1.0 - 1.0 / j).powf(alpha);
        pass &= r.monotone && r.best_a_alpha >= degraded * (1.0 - 1e-9);
        parts.push(format!("j={j}: monotone {}, A_alpha,j {:.4} >= {degraded:.4}", r.monotone, r.best_a_alpha));
    }
    assert!(verdict(5, "regularization", pass, &parts.join("; "), started));
}

#[test]
fn criterion_06_hypothesis_windows() {
    let started = Instant::now();
    let grid = make_grid(3, 32, 8.0).unwrap();
    let mut pass = true;
    let mut rows = Vec::new();
    for gamma in [1.5, 1.9, 2.1, 2.5, 2.9] {
        let w = theorem_windows(&power(gamma, &grid), 1.0).unwrap();
        let full = gamma > 2.0 && gamma < 3.0;
        pass &= w[&Theorem::Cauchy] == (gamma < 3.0)
            && w[&Theorem::WaveOperators] == full
            && w[&Theorem::Completeness] == full;
        rows.push(format!(
            "gamma {gamma}: cauchy {} wave {} complete {}",
            w[&Theorem::Cauchy],
            w[&Theorem::WaveOperators],
            w[&Theorem::Completeness]
        ));
    }
    let detail = format!(
        "{}; scattering theory for 2 < gamma < 3, local theory for gamma < 3 (wave operators need p1 <= n/2, hence gamma > 2)",
        rows.join("; ")
    );
    assert!(verdict(6, "hypothesis windows", pass, &detail, started));
}

#[test]
fn criterion_07_scattering_round_trip() {
    let started = Instant::now();
    let grid = desk_grid();
    let pot = power(2.5, &grid);
    let u0 = gaussian(&grid, 1.0, 0.5);
    let cfg = ScatteringConfig::new(DT);
    let rep = completeness_roundtrip(&u0, &pot, 20.0, &cfg).unwrap();
    let budget = rep.energy_budget.unwrap();
    let decreasing = rep.richardson_decreasing.unwrap();
    let pass = rep.relative_h1_error < 1e-3 && decreasing && rep.mass_residual < 1e-10 && rep.energy_residual <= budget;
    let detail = format!(
        "T=20: H1 error {:.2e} (< 1e-3); Richardson (S,2S) {:?} decreasing {decreasing} (phase-aligned {:?}); mass residual {:.2e} (< 1e-10); energy residual {:.2e} <= budget {budget:.2e}; free-flow boundary mass {:?}",
        rep.relative_h1_error,
        rep.richardson_ladder.iter().map(|p| format!("S={}: {:.3e}", p.0, p.1)).collect::<Vec<_>>(),
        rep.richardson_ladder_phase_fixed.iter().map(|p| format!("{:.3e}", p.1)).collect::<Vec<_>>(),
        rep.mass_residual,
        rep.energy_residual,
        rep.free_boundary_mass.iter().map(|p| format!("S={}: {:.1e}", p.0, p.1)).collect::<Vec<_>>()
    );
    assert!(verdict(7, "scattering round trip", pass, &detail, started));
}

#[test]
fn criterion_08_picard_vs_strang() {
    let started = Instant::now();
    let grid = desk_grid();
    let pot = power(2.5, &grid);
    let u0 = gaussian(&grid, 1.0, 0.1);
    let picard = picard_iterate(&u0, &pot, (0.0, 0.1), 6, 2.5e-3).unwrap();
    let strang = strang_evolve(&u0, &pot, &EvolveConfig64::new(DT, 0.0, 0.1).endpoint_only()).unwrap().into_last();
    let d = l2_distance(&picard.field, &strang);
    let pass = d < 1e-5 && !picard.diverged;
    let detail = format!("||Picard - Strang||_2 at t = 0.1: {d:.2e} (< 1e-5), Picard sweeps converged {}", !picard.diverged);
    assert!(verdict(8, "Picard vs Strang", pass, &detail, started));
}

#[test]
fn criterion_09_time_reversibility() {
    let started = Instant::now();
    let grid = desk_grid();
    let pot = power(2.5, &grid);
    let u0 = gaussian(&grid, 1.0, 1.0);
    let fwd = strang_evolve(&u0, &pot, &EvolveConfig64::new(DT, 0.0, 1.0).endpoint_only()).unwrap().into_last();
    let back = strang_evolve(&fwd, &pot, &EvolveConfig64::new(DT, 1.0, 0.0).endpoint_only()).unwrap().into_last();
    let d = l2_distance(&back, &u0);
    let pass = d < 1e-9 && back.time() == 0.0;
    assert!(verdict(9, "time reversibility", pass, &format!("||u(0) - u0||_2 after [0,1] and back: {d:.2e} (< 1e-9)"), started));
}

#[test]
fn criterion_10_window_search() {
    let started = Instant::now();
    let grid = desk_grid();
    let pot = power(2.5, &grid);
    let u0 = gaussian(&grid, 1.0, 1.0);
    let horizon = 6.0;
    let cfg = EvolveConfig64::new(DT, 0.0, horizon).with_sample_stride(20).with_diagnostics(None, 1);
    let traj = evolve(&u0, &pot, &cfg).unwrap();
    let (alpha, a, length, t1) = (2.0, 1.0, 1.0, 1.0);
    let all = window_search(&traj, f64::MIN_POSITIVE, length, alpha, a, t1).unwrap();
    let steady = all.windows.last().unwrap().integral;
    let epsilon = 2.0 * steady;
    let rep = window_search(&traj, epsilon, length, alpha, a, t1).unwrap();
    let t2 = rep.t2;
    let first = rep.windows.split_last().is_some_and(|(hit, before)| {
        hit.integral <= epsilon && before.iter().all(|w| w.integral > epsilon)
    });
    let pass = t2.is_some_and(|t| t <= horizon) && first;
    let detail = format!(
        "window integrals {:?}; epsilon {epsilon:.3e}; t2 {t2:?} (<= {horizon}), first qualifying {first}; reported bound {:.3e} with measured M {:.3e}",
        all.windows.iter().map(|w| format!("{:.3e}", w.integral)).collect::<Vec<_>>(),
        rep.bound,
        rep.measured_m
    );
    assert!(verdict(10, "window search", pass, &detail, started));
}
