//! Experiment configuration: a TOML document with an explicit schema version.
//! Unknown keys are rejected so a misspelled threshold cannot pass silently.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// The only schema this build understands.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Evolve,
    Scatter,
    Roundtrip,
    Morawetz,
    Sweep,
    CheckPotential,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Evolve => "evolve",
            Self::Scatter => "scatter",
            Self::Roundtrip => "roundtrip",
            Self::Morawetz => "morawetz",
            Self::Sweep => "sweep",
            Self::CheckPotential => "check-potential",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Must agree with the subcommand when present.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub grid: GridBlock,
    #[serde(default)]
    pub potential: PotentialBlock,
    #[serde(default)]
    pub initial: InitialBlock,
    #[serde(default)]
    pub evolve: EvolveBlock,
    #[serde(default)]
    pub scatter: ScatterBlock,
    #[serde(default)]
    pub roundtrip: RoundTripBlock,
    #[serde(default)]
    pub morawetz: MorawetzBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub checks: ChecksBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub points: usize,
    pub half_length: f64,
}

fn default_dim() -> usize {
    3
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialShape {
    #[default]
    Zero,
    InversePower,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    #[serde(default)]
    pub kind: PotentialShape,
    /// `C` in `C |x|^-gamma`.
    #[serde(default)]
    pub strength: Option<f64>,
    /// `gamma` in `C |x|^-gamma`.
    #[serde(default)]
    pub exponent: Option<f64>,
    /// Two-column `radius value` table for the tabulated kind.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// `V = 0` beyond this radius.
    #[serde(default)]
    pub cutoff: Option<f64>,
    /// Replace `V` by its angular regularization `V_j`.
    #[serde(default)]
    pub regularize_j: Option<f64>,
    #[serde(default)]
    pub hypotheses: HypothesisBlock,
}

impl Default for PotentialBlock {
    fn default() -> Self {
        Self {
            kind: PotentialShape::Zero,
            strength: None,
            exponent: None,
            path: None,
            cutoff: None,
            regularize_j: None,
            hypotheses: HypothesisBlock::default(),
        }
    }
}

/// Exponents and constants of (H1) and (H3); unset exponents default to the
/// extreme exponents of the completeness window.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisBlock {
    #[serde(default)]
    pub p1: Option<f64>,
    #[serde(default)]
    pub p2: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub a: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Gaussian,
    RandomBandLimited,
    FromFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    #[serde(default)]
    pub kind: InitialKind,
    /// Peak value (gaussian) or target `L^2` norm (random).
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub velocity: Option<Vec<f64>>,
    /// Rescale a gaussian to this `L^2` norm.
    #[serde(default)]
    pub norm: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Largest `|k|` kept by the random kind.
    #[serde(default)]
    pub band: Option<f64>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl Default for InitialBlock {
    fn default() -> Self {
        Self {
            kind: InitialKind::Gaussian,
            amplitude: Some(1.0),
            width: Some(1.0),
            center: None,
            velocity: None,
            norm: None,
            seed: None,
            band: None,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveBlock {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Steps between stored snapshots.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Steps between diagnostics rows.
    #[serde(default = "one")]
    pub diagnostics_stride: usize,
    /// Write every stored snapshot under `fields/`.
    #[serde(default = "yes")]
    pub write_fields: bool,
}

fn default_dt() -> f64 {
    5e-3
}
fn default_horizon() -> f64 {
    1.0
}
fn default_stride() -> usize {
    100
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}

impl Default for EvolveBlock {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            horizon: default_horizon(),
            stride: default_stride(),
            diagnostics_stride: 1,
            write_fields: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionName {
    #[default]
    Future,
    Past,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterBlock {
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<f64>,
    #[serde(default)]
    pub direction: DirectionName,
}

fn default_checkpoints() -> Vec<f64> {
    vec![5.0, 10.0, 20.0, 40.0]
}

impl Default for ScatterBlock {
    fn default() -> Self {
        Self { checkpoints: default_checkpoints(), direction: DirectionName::Future }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundTripBlock {
    #[serde(default = "default_roundtrip_horizon")]
    pub horizon: f64,
    #[serde(default = "default_min_horizon")]
    pub min_horizon: f64,
    #[serde(default = "yes")]
    pub richardson: bool,
    #[serde(default)]
    pub direction: DirectionName,
}

fn default_roundtrip_horizon() -> f64 {
    20.0
}
fn default_min_horizon() -> f64 {
    10.0
}

impl Default for RoundTripBlock {
    fn default() -> Self {
        Self {
            horizon: default_roundtrip_horizon(),
            min_horizon: default_min_horizon(),
            richardson: true,
            direction: DirectionName::Future,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorawetzBlock {
    /// Interval start; defaults to 0.
    #[serde(default)]
    pub t1: Option<f64>,
    /// Interval end; defaults to the evolve horizon.
    #[serde(default)]
    pub t2: Option<f64>,
    /// Weight regularization; defaults to one grid spacing.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Also integrate the internal cube norm with the (H3) constants.
    #[serde(default)]
    pub internal_norm: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Experiment run at every point.
    pub base: ExperimentKind,
    #[serde(default)]
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub strength: Vec<f64>,
    #[serde(default)]
    pub amplitude: Vec<f64>,
}

/// PASS/FAIL thresholds. Defaults are the documented budgets; listing a
/// check name under `disabled` removes it from the summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksBlock {
    #[serde(default)]
    pub disabled: Vec<String>,
    /// Relative mass drift along a trajectory.
    #[serde(default = "mass_drift")]
    pub mass_drift: f64,
    /// Relative energy drift along a trajectory.
    #[serde(default = "energy_drift")]
    pub energy_drift: f64,
    /// Fraction of mass within two cells of the box faces.
    #[serde(default = "boundary_mass")]
    pub boundary_mass: f64,
    /// `| ||u_+||_2 - ||u_0||_2 |` and the wave-operator isometry defect.
    #[serde(default = "mass_residual")]
    pub mass_residual: f64,
    /// Relative energy defect of the asymptotic state.
    #[serde(default = "energy_residual")]
    pub energy_residual: f64,
    /// Relative H^1 Cauchy increment declaring convergence.
    #[serde(default = "convergence")]
    pub convergence: f64,
    /// Relative H^1 round-trip error.
    #[serde(default = "roundtrip_error")]
    pub roundtrip_error: f64,
    /// Morawetz integrand sign tolerance, relative to its scale.
    #[serde(default = "morawetz_integrand")]
    pub morawetz_integrand: f64,
    /// Additive Morawetz inequality tolerance, relative to `||u|| sup ||grad u||`.
    #[serde(default = "morawetz_inequality")]
    pub morawetz_inequality: f64,
}

fn mass_drift() -> f64 {
    1e-11
}
fn energy_drift() -> f64 {
    1e-3
}
fn boundary_mass() -> f64 {
    1e-6
}
fn mass_residual() -> f64 {
    1e-10
}
fn energy_residual() -> f64 {
    1e-3
}
fn convergence() -> f64 {
    1e-4
}
fn roundtrip_error() -> f64 {
    1e-3
}
fn morawetz_integrand() -> f64 {
    1e-8
}
fn morawetz_inequality() -> f64 {
    1e-6
}

impl Default for ChecksBlock {
    fn default() -> Self {
        Self {
            disabled: Vec::new(),
            mass_drift: mass_drift(),
            energy_drift: energy_drift(),
            boundary_mass: boundary_mass(),
            mass_residual: mass_residual(),
            energy_residual: energy_residual(),
            convergence: convergence(),
            roundtrip_error: roundtrip_error(),
            morawetz_integrand: morawetz_integrand(),
            morawetz_inequality: morawetz_inequality(),
        }
    }
}

impl ChecksBlock {
    pub fn enabled(&self, name: &str) -> bool {
        !self.disabled.iter().any(|d| d == name)
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document. `origin` names it in errors.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg = Self::read(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a config file without validating it, so command-line
    /// overrides can complete it first.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative data paths relative to the config file.
    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.potential.path, &mut self.initial.path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(HarnessError::Config(format!("{field}: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return bad(
                "schema_version",
                &format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            );
        }
        if !(1..=3).contains(&self.grid.dim) {
            return bad("grid.dim", "must be 1, 2 or 3");
        }
        if self.grid.points < 8 || !self.grid.points.is_multiple_of(2) {
            return bad("grid.points", "must be even and at least 8");
        }
        if !(self.grid.half_length > 0.0) {
            return bad("grid.half_length", "must be positive");
        }
        let pot = &self.potential;
        match pot.kind {
            PotentialShape::Zero => {}
            PotentialShape::InversePower => {
                if !pot.exponent.is_some_and(|g| g > 0.0) {
                    return bad("potential.exponent", "inverse_power needs a positive exponent");
                }
                if pot.strength.is_some_and(|c| !c.is_finite()) {
                    return bad("potential.strength", "must be finite");
                }
            }
            PotentialShape::Tabulated => {
                if pot.path.is_none() {
                    return bad("potential.path", "tabulated potential needs a path");
                }
            }
        }
        if pot.cutoff.is_some_and(|c| !(c > 0.0)) {
            return bad("potential.cutoff", "must be positive");
        }
        if pot.regularize_j.is_some_and(|j| !(j >= 2.0)) {
            return bad("potential.regularize_j", "must be >= 2");
        }
        let hyp = &pot.hypotheses;
        for (name, v) in [("p1", hyp.p1), ("p2", hyp.p2)] {
            if v.is_some_and(|p| !(p >= 1.0)) {
                return bad(&format!("potential.hypotheses.{name}"), "must be >= 1");
            }
        }
        if hyp.alpha.is_some_and(|a| !(a >= 2.0)) {
            return bad("potential.hypotheses.alpha", "must be >= 2");
        }
        if hyp.a.is_some_and(|a| !(a > 0.0)) {
            return bad("potential.hypotheses.a", "must be positive");
        }
        let init = &self.initial;
        let vec_ok = |v: &Option<Vec<f64>>| v.as_ref().is_none_or(|v| v.len() == self.grid.dim);
        match init.kind {
            InitialKind::Gaussian => {
                if init.width.is_some_and(|w| !(w > 0.0)) {
                    return bad("initial.width", "must be positive");
                }
                if !vec_ok(&init.center) {
                    return bad("initial.center", "needs one entry per dimension");
                }
                if !vec_ok(&init.velocity) {
                    return bad("initial.velocity", "needs one entry per dimension");
                }
            }
            InitialKind::RandomBandLimited => {
                if init.seed.is_none() {
                    return bad("initial.seed", "random data needs a seed");
                }
                if !init.band.is_some_and(|b| b > 0.0) {
                    return bad("initial.band", "random data needs a positive band");
                }
            }
            InitialKind::FromFile => {
                if init.path.is_none() {
                    return bad("initial.path", "from_file needs a path");
                }
            }
        }
        if init.amplitude.is_some_and(|a| !(a >= 0.0)) {
            return bad("initial.amplitude", "must be nonnegative");
        }
        if init.norm.is_some_and(|a| !(a >= 0.0)) {
            return bad("initial.norm", "must be nonnegative");
        }
        let ev = &self.evolve;
        if !(ev.dt > 0.0) {
            return bad("evolve.dt", "must be positive");
        }
        if !(ev.horizon > 0.0) {
            return bad("evolve.horizon", "must be positive");
        }
        if ev.stride == 0 || ev.diagnostics_stride == 0 {
            return bad("evolve.stride", "strides must be >= 1");
        }
        let cps = &self.scatter.checkpoints;
        if cps.len() < 3 || cps.windows(2).any(|w| !(w[1] > w[0])) || cps.iter().any(|t| !(*t > 0.0)) {
            return bad("scatter.checkpoints", "need at least 3 positive, strictly increasing times");
        }
        if !(self.roundtrip.horizon > 0.0) || !(self.roundtrip.min_horizon >= 0.0) {
            return bad("roundtrip.horizon", "must be positive");
        }
        if let Some(sw) = &self.sweep {
            if sw.base == ExperimentKind::Sweep {
                return bad("sweep.base", "a sweep cannot nest sweeps");
            }
            if sw.gamma.is_empty() && sw.strength.is_empty() && sw.amplitude.is_empty() {
                return bad("sweep", "at least one axis must be listed");
            }
            if (!sw.gamma.is_empty() || !sw.strength.is_empty()) && pot.kind != PotentialShape::InversePower {
                return bad("sweep", "gamma and strength axes need an inverse_power potential");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema_version = 1\n[grid]\npoints = 16\nhalf_length = 4.0\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL, "test").unwrap();
        assert_eq!(cfg.grid.dim, 3);
        assert_eq!(cfg.potential.kind, PotentialShape::Zero);
        assert_eq!(cfg.checks.mass_drift, 1e-11);
        assert_eq!(cfg.scatter.checkpoints, vec![5.0, 10.0, 20.0, 40.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}[checks]\nmass_drfit = 1.0\n");
        let err = ExperimentConfig::from_toml(&text, "test").unwrap_err().to_string();
        assert!(err.contains("mass_drfit"), "{err}");
    }

    #[test]
    fn wrong_schema_version() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(ExperimentConfig::from_toml(&text, "test").is_err());
    }

    #[test]
    fn random_data_needs_seed() {
        let text = format!("{MINIMAL}[initial]\nkind = \"random_band_limited\"\nband = 2.0\n");
        let err = ExperimentConfig::from_toml(&text, "test").unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn inverse_power_needs_exponent() {
        let text = format!("{MINIMAL}[potential]\nkind = \"inverse_power\"\n");
        assert!(ExperimentConfig::from_toml(&text, "test").is_err());
    }
}
