use num_complex::Complex;
use serde::Serialize;

use super::spec::PotentialSpec;
use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::grid::GridSpec;
use crate::scalar::{lit, to_f64, Real};

/// How the origin sample was produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum OriginPolicy {
    /// Average of `V` over the origin cell.
    CellAverage { value: f64 },
    /// Samples supplied directly by the caller.
    Supplied,
}

/// A potential sampled on a grid together with its convolution multiplier.
///
/// `samples` use the grid layout (origin at index `N/2` per axis). The
/// multiplier is the DFT of the samples re-centred at index 0, times `h^n`, so
/// that `IDFT(multiplier * DFT(rho))` is the periodic Riemann-sum convolution
/// `sum_j V(x_i - x_j) rho_j h^n`.
#[derive(Clone, Debug)]
pub struct PotentialOnGrid<T: Real> {
    grid: GridSpec<T>,
    spec: Option<PotentialSpec>,
    samples: Vec<T>,
    multiplier: Vec<Complex<T>>,
    origin: OriginPolicy,
    zero: bool,
}

/// Samples `spec` on `grid` at the minimal-image distance `|x|`; the origin
/// cell holds the cell average.
pub fn sample_potential<T: Real>(spec: &PotentialSpec, grid: &GridSpec<T>) -> Result<PotentialOnGrid<T>> {
    spec.validate(grid.dim())?;
    let origin = grid.origin_index();
    let h = to_f64(grid.spacing());
    let origin_value = spec.cell_average(grid.dim(), h);
    if !origin_value.is_finite() {
        return invalid("origin cell average of the potential is not finite");
    }
    let samples: Vec<T> = grid
        .radius()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if i == origin {
                lit(origin_value)
            } else {
                lit(spec.profile(to_f64(r)))
            }
        })
        .collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return invalid("potential samples are not finite");
    }
    let mut pot = PotentialOnGrid::from_samples(grid, samples)?;
    pot.spec = Some(spec.clone());
    pot.origin = OriginPolicy::CellAverage { value: origin_value };
    Ok(pot)
}

impl<T: Real> PotentialOnGrid<T> {
    /// Wraps caller-supplied samples in grid layout.
    pub fn from_samples(grid: &GridSpec<T>, samples: Vec<T>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} potential samples for a grid of {}",
                samples.len(),
                grid.len()
            )));
        }
        let mut centred = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        let n = grid.points_per_axis();
        let dim = grid.dim();
        for (i, &v) in samples.iter().enumerate() {
            let idx = grid.multi_index(i);
            let mut m = 0;
            for &k in &idx[..dim] {
                m = m * n + (k + n / 2) % n;
            }
            centred[m] = Complex::new(v, T::zero());
        }
        grid.forward(&mut centred);
        let samples_zero = samples.iter().all(|v| *v == T::zero());
        let hn = grid.cell_volume();
        for z in &mut centred {
            *z = *z * hn;
        }
        Ok(Self {
            grid: grid.clone(),
            spec: None,
            samples,
            multiplier: centred,
            origin: OriginPolicy::Supplied,
            zero: samples_zero,
        })
    }

    /// The kernel `1/h^n` at the origin, zero elsewhere: convolution is the identity.
    pub fn discrete_delta(grid: &GridSpec<T>) -> Self {
        let mut samples = vec![T::zero(); grid.len()];
        samples[grid.origin_index()] = T::one() / grid.cell_volume();
        Self::from_samples(grid, samples).expect("length matches grid")
    }

    pub fn zero(grid: &GridSpec<T>) -> Self {
        let mut pot = Self::from_samples(grid, vec![T::zero(); grid.len()]).expect("length matches grid");
        pot.spec = Some(PotentialSpec::zero());
        pot
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn spec(&self) -> Option<&PotentialSpec> {
        self.spec.as_ref()
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn multiplier(&self) -> &[Complex<T>] {
        &self.multiplier
    }

    pub fn origin_policy(&self) -> OriginPolicy {
        self.origin
    }

    /// Whether every sample is zero (the free flow).
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    fn check_grid(&self, grid: &GridSpec<T>) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Multiplies a spectrum by the convolution multiplier in place.
    pub(crate) fn apply_multiplier(&self, spectrum: &mut [Complex<T>]) {
        for (z, m) in spectrum.iter_mut().zip(&self.multiplier) {
            *z = *z * m;
        }
    }

    /// `V * g` for complex `g` (complex-linear).
    pub(crate) fn convolve_values(&self, values: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut data = values.to_vec();
        self.grid.forward(&mut data);
        self.apply_multiplier(&mut data);
        self.grid.inverse(&mut data);
        data
    }

    /// `V * rho` for real densities.
    pub(crate) fn convolve_real(&self, rho: &[T]) -> Vec<T> {
        let data: Vec<Complex<T>> = rho.iter().map(|&r| Complex::new(r, T::zero())).collect();
        self.convolve_values(&data).into_iter().map(|z| z.re).collect()
    }
}

/// `V * rho` on the grid. The density should be real and nonnegative; signed
/// densities are accepted (the operation is linear) but imaginary input is not.
pub fn convolve_density<T: Real>(pot: &PotentialOnGrid<T>, rho: &Field<T>) -> Result<Field<T>> {
    pot.check_grid(rho.grid())?;
    let scale = rho.values().iter().map(|z| z.re.abs()).fold(T::zero(), T::max);
    let imag = rho.values().iter().map(|z| z.im.abs()).fold(T::zero(), T::max);
    if imag > lit::<T>(1e-10) * scale.max(T::min_positive_value()) {
        return invalid("density has a non-negligible imaginary part");
    }
    let out = pot.convolve_values(rho.values());
    let out_scale = out.iter().map(|z| z.re.abs()).fold(T::zero(), T::max);
    let residue = out.iter().map(|z| z.im.abs()).fold(T::zero(), T::max);
    debug_assert!(
        residue <= lit::<T>(1e-10) * out_scale.max(T::min_positive_value()) || out_scale == T::zero(),
        "imaginary residue {residue} in real convolution"
    );
    let values = out.into_iter().map(|z| Complex::new(z.re, T::zero())).collect();
    Ok(Field::from_parts(rho.grid().clone(), values, rho.time()))
}
