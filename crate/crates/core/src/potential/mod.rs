//! Interaction potentials: analytic descriptions, grid sampling, convolution,
//! hypothesis checks and the angular regularization.

pub mod hypotheses;
pub mod radial;
pub mod regularize;
pub mod sampled;
pub mod spec;

pub use hypotheses::{
    check_assumptions, check_h1, check_h2, check_h3, theorem_windows, AssumptionReport, ExponentWindows, H1Report,
    H2Report, H3Report, Theorem,
};
pub use radial::{radial_lp_norm, RadialNorm};
pub use regularize::{regularize, regularized_spec, spec_lp_distance, spec_lp_norm, DEFAULT_REGULARIZATION_ORDER};
pub use sampled::{convolve_density, sample_potential, OriginPolicy, PotentialOnGrid};
pub use spec::{BallNode, BallRule, PotentialKind, PotentialSpec, RadialFn};
