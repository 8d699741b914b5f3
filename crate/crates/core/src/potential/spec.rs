//! Radial potential descriptions and their exact cell averages.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::quadrature::{gauss_legendre, gauss_legendre_on};

/// Shared radial profile `r -> v(r)`.
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Shape of a radial potential `V(x) = v(|x|)`.
#[derive(Clone)]
pub enum PotentialKind {
    /// `V = 0`.
    Zero,
    /// `V(x) = strength * |x|^-exponent`.
    InversePower { strength: f64, exponent: f64 },
    /// Linear interpolation of `(radius, value)` samples; constant beyond both ends.
    TabulatedRadial { radii: Vec<f64>, values: Vec<f64> },
    /// Arbitrary radial profile.
    Radial { label: String, profile: RadialFn },
    /// Angular regularization `V_j(x) = int V(x - |x| z / j) phi(z) dz` of `base`.
    Regularized { base: Box<PotentialSpec>, j: f64, rule: Arc<BallRule> },
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::InversePower { strength, exponent } => {
                write!(f, "InversePower {{ strength: {strength}, exponent: {exponent} }}")
            }
            Self::TabulatedRadial { radii, .. } => write!(f, "TabulatedRadial({} samples)", radii.len()),
            Self::Radial { label, .. } => write!(f, "Radial({label})"),
            Self::Regularized { base, j, .. } => write!(f, "Regularized {{ j: {j}, base: {base:?} }}"),
        }
    }
}

/// A radial potential plus an optional outer truncation `V chi(|x| <= cutoff)`.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub cutoff: Option<f64>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self { kind: PotentialKind::Zero, cutoff: None }
    }

    pub fn inverse_power(strength: f64, exponent: f64) -> Self {
        Self { kind: PotentialKind::InversePower { strength, exponent }, cutoff: None }
    }

    pub fn tabulated(radii: Vec<f64>, values: Vec<f64>) -> Self {
        Self { kind: PotentialKind::TabulatedRadial { radii, values }, cutoff: None }
    }

    pub fn radial(label: impl Into<String>, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: PotentialKind::Radial { label: label.into(), profile: Arc::new(profile) },
            cutoff: None,
        }
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// Checks the parameters against dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(c) = self.cutoff {
            if !(c > 0.0) {
                return invalid(format!("cutoff radius {c} must be positive"));
            }
        }
        match &self.kind {
            PotentialKind::Zero | PotentialKind::Radial { .. } => Ok(()),
            PotentialKind::InversePower { strength, exponent } => {
                if !(*strength > 0.0) || !strength.is_finite() {
                    return invalid(format!("inverse-power strength {strength} must be positive"));
                }
                if !(*exponent > 0.0) || *exponent >= dim as f64 {
                    return invalid(format!(
                        "inverse-power exponent {exponent} must satisfy 0 < gamma < n = {dim} \
                         (origin cell average diverges otherwise)"
                    ));
                }
                Ok(())
            }
            PotentialKind::TabulatedRadial { radii, values } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return invalid("tabulated potential needs matching, nonempty radius and value columns");
                }
                if radii.iter().any(|r| !(*r >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
                    return invalid("tabulated potential has negative radii or non-finite values");
                }
                if radii.windows(2).any(|w| w[1] <= w[0]) {
                    return invalid("tabulated radii must be strictly increasing");
                }
                Ok(())
            }
            PotentialKind::Regularized { base, j, .. } => {
                if !(*j >= 2.0) {
                    return invalid(format!("regularization index j = {j} must be >= 2"));
                }
                base.validate(dim)
            }
        }
    }

    /// Radial profile `v(r)` including the cutoff; `r = 0` may be infinite.
    pub fn profile(&self, r: f64) -> f64 {
        if let Some(c) = self.cutoff {
            if r > c {
                return 0.0;
            }
        }
        self.untruncated(r)
    }

    fn untruncated(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::InversePower { strength, exponent } => strength * r.powf(-exponent),
            PotentialKind::TabulatedRadial { radii, values } => interpolate(radii, values, r),
            PotentialKind::Radial { profile, .. } => profile(r),
            PotentialKind::Regularized { base, j, rule } => {
                rule.nodes.iter().map(|q| q.weight * base.profile(r * q.stretch(*j))).sum()
            }
        }
    }

    /// Radii where the profile may jump or kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.cutoff.into_iter().collect();
        match &self.kind {
            PotentialKind::TabulatedRadial { radii, .. } => out.extend(radii.iter().copied().filter(|r| *r > 0.0)),
            PotentialKind::Regularized { base, j, rule } => {
                let inner = base.breakpoints();
                for q in &rule.nodes {
                    let s = q.stretch(*j);
                    if s > 0.0 {
                        out.extend(inner.iter().map(|b| b / s));
                    }
                }
            }
            _ => {}
        }
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        out.dedup();
        out
    }

    /// Average of `V` over the cube `[-h/2, h/2]^n`.
    pub fn cell_average(&self, dim: usize, h: f64) -> f64 {
        let half_diag = 0.5 * h * (dim as f64).sqrt();
        let cutoff_inside = self.cutoff.is_some_and(|c| c < half_diag);
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::InversePower { strength, exponent } if !cutoff_inside => {
                strength * h.powf(-exponent) * unit_cell_power_integral(dim, *exponent)
            }
            PotentialKind::Regularized { base, j, rule } if !cutoff_inside => rule
                .nodes
                .iter()
                .map(|q| q.weight * base.cell_average(dim, h * q.stretch(*j)))
                .sum(),
            _ => generic_cell_average(|r| self.profile(r), dim, h),
        }
    }
}

fn interpolate(radii: &[f64], values: &[f64], r: f64) -> f64 {
    if r <= radii[0] {
        return values[0];
    }
    let last = radii.len() - 1;
    if r >= radii[last] {
        return values[last];
    }
    let k = radii.partition_point(|&x| x <= r);
    let (r0, r1) = (radii[k - 1], radii[k]);
    let t = (r - r0) / (r1 - r0);
    values[k - 1] * (1.0 - t) + values[k] * t
}

/// `int_{[-1/2,1/2]^n} |y|^-gamma dy`.
///
/// Integrating radially inside the cone over each face leaves
/// `n/(n-gamma) int_{[-1/2,1/2]^{n-1}} (1/4 + |a|^2)^{-gamma/2} da`, a smooth integrand.
pub fn unit_cell_power_integral(dim: usize, gamma: f64) -> f64 {
    let n = dim as f64;
    n / (n - gamma) * face_integral(dim, |y2| y2.powf(-0.5 * gamma))
}

/// `int_{[-1/2,1/2]^{n-1}} g(1/4 + |a|^2) da` by tensor Gauss-Legendre.
fn face_integral(dim: usize, g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre_on(24, 0.0, 0.5);
    match dim {
        1 => g(0.25),
        2 => 2.0 * x.iter().zip(&w).map(|(a, wa)| wa * g(0.25 + a * a)).sum::<f64>(),
        3 => {
            let mut acc = 0.0;
            for (a, wa) in x.iter().zip(&w) {
                for (b, wb) in x.iter().zip(&w) {
                    acc += wa * wb * g(0.25 + a * a + b * b);
                }
            }
            4.0 * acc
        }
        _ => unreachable!("dimension checked by the grid"),
    }
}

/// Cell average of a radial profile that may have an integrable singularity at 0.
///
/// Uses the cone decomposition `avg = n int_face int_0^1 v(h s |y|) s^{n-1} ds da`
/// with the `s` integral split on dyadic shells and a geometric tail estimate.
pub fn generic_cell_average(v: impl Fn(f64) -> f64, dim: usize, h: f64) -> f64 {
    let (t, w) = gauss_legendre(8);
    let n = dim as f64;
    let radial = |scale: f64| -> f64 {
        let mut total = 0.0;
        let mut prev = f64::NAN;
        let mut last = 0.0;
        for level in 0..60 {
            let hi = 0.5f64.powi(level);
            let lo = 0.5 * hi;
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            let shell: f64 = t
                .iter()
                .zip(&w)
                .map(|(x, wt)| {
                    let s = mid + half * x;
                    wt * v(scale * s) * s.powf(n - 1.0)
                })
                .sum::<f64>()
                * half;
            total += shell;
            prev = last;
            last = shell;
            if level > 4 && shell.abs() <= 1e-17 * total.abs() {
                return total;
            }
        }
        let ratio = last / prev;
        if ratio.is_finite() && ratio > 0.0 && ratio < 1.0 {
            total += last * ratio / (1.0 - ratio);
        }
        total
    };
    n * face_integral(dim, |y2| radial(h * y2.sqrt()))
}

/// One node of the reduced ball quadrature: radius `rho`, cosine `c` of the
/// angle to a fixed axis, normalized weight.
#[derive(Clone, Copy, Debug)]
pub struct BallNode {
    pub rho: f64,
    pub cosine: f64,
    pub weight: f64,
}

impl BallNode {
    /// `|e - z/j|` for a unit vector `e` and `z` at this node.
    pub fn stretch(&self, j: f64) -> f64 {
        (1.0 - 2.0 * self.rho * self.cosine / j + self.rho * self.rho / (j * j)).max(0.0).sqrt()
    }
}

/// Product Gauss rule for `int_{|z|<1} F(|z|, z.e) phi(z) dz` with the bump
/// `phi(z) ~ exp(-1/(1-|z|^2))`, weights normalized to unit mass.
#[derive(Clone, Debug)]
pub struct BallRule {
    pub dim: usize,
    pub order: usize,
    pub nodes: Vec<BallNode>,
}

/// Unnormalized mollifier bump as a function of `|z|`.
pub fn bump(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - rho * rho)).exp()
    }
}

impl BallRule {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return invalid(format!("ball rule dimension {dim} not in 1..=3"));
        }
        if order < 2 {
            return invalid("ball quadrature order must be >= 2");
        }
        let (rho, wr) = gauss_legendre_on(order, 0.0, 1.0);
        let angular: Vec<(f64, f64)> = match dim {
            1 => vec![(1.0, 1.0), (-1.0, 1.0)],
            2 => {
                let (theta, wt) = gauss_legendre_on(order, 0.0, std::f64::consts::PI);
                theta.iter().zip(&wt).map(|(t, w)| (t.cos(), *w)).collect()
            }
            _ => {
                let (c, wc) = gauss_legendre(order);
                c.into_iter().zip(wc).collect()
            }
        };
        let mut nodes = Vec::with_capacity(order * angular.len());
        for (r, w) in rho.iter().zip(&wr) {
            let radial = w * bump(*r) * r.powi(dim as i32 - 1);
            for &(c, wc) in &angular {
                nodes.push(BallNode { rho: *r, cosine: c, weight: radial * wc });
            }
        }
        let total: f64 = nodes.iter().map(|q| q.weight).sum();
        for q in &mut nodes {
            q.weight /= total;
        }
        Ok(Self { dim, order, nodes })
    }
}
