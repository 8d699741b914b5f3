//! Pseudospectral laboratory for the Hartree equation
//! `i u_t = -(1/2) Lap u + u (V * |u|^2)` on a periodic box.
//!
//! Everything numerical is generic over the scalar type through [`Real`];
//! the aliases at the crate root fix it to `f64`.

// Validation uses `!(x > 0.0)` so that NaN is rejected with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod norms;
pub mod observables;
pub mod potential;
pub mod propagator;
pub mod quadrature;
pub mod scalar;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::{make_grid, GridSpec};
pub use norms::{cube_norm, exponents, gradient_lp_norm, h1_norm, lp_norm, spacetime_norm, SobolevExponents};
pub use observables::{
    decay_scan, dilation_quantity, energy, hartree_term, internal_norm_integral, kinetic_energy, morawetz_check,
    morawetz_integrand, propagation_check, split_field, window_search, DiagnosticsOptions, DiagnosticsRow,
    MorawetzReport,
};
pub use potential::{
    check_h1, check_h2, check_h3, convolve_density, regularize, sample_potential, AssumptionReport,
    PotentialOnGrid, PotentialSpec,
};
pub use propagator::{
    evolve, free_propagate, nonlinear_phase_step, picard_iterate, strang_evolve, EvolveConfig, Scheme, Trajectory,
};
pub use scalar::Real;
pub use scattering::{
    completeness_roundtrip, extract_asymptotic, interaction_picture, wave_operator, Direction, RoundTripReport,
    ScatterResult,
};
pub use spectral::spectral_gradient;

/// Double-precision grid.
pub type GridSpec64 = GridSpec<f64>;
/// Double-precision field.
pub type Field64 = Field<f64>;
/// Double-precision sampled potential.
pub type PotentialOnGrid64 = PotentialOnGrid<f64>;
/// Double-precision trajectory.
pub type Trajectory64 = Trajectory<f64>;
/// Double-precision evolution settings.
pub type EvolveConfig64 = EvolveConfig<f64>;
/// Double-precision exponent record.
pub type SobolevExponents64 = SobolevExponents<f64>;
/// Double-precision scattering result.
pub type ScatterResult64 = ScatterResult<f64>;
/// Double-precision round-trip report.
pub type RoundTripReport64 = RoundTripReport<f64>;
