//! Complex samples on a grid with an attached time stamp.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::Real;

/// Complex wavefunction sampled on a [`GridSpec`] at time `time`.
#[derive(Clone, Debug)]
pub struct Field<T: Real> {
    grid: GridSpec<T>,
    values: Vec<Complex<T>>,
    time: T,
}

impl<T: Real> Field<T> {
    /// Wraps samples, checking length and finiteness.
    pub fn new(grid: GridSpec<T>, values: Vec<Complex<T>>, time: T) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} samples for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite sample at index {i}")));
        }
        if !time.is_finite() {
            return Err(Error::InvalidField("non-finite time".into()));
        }
        Ok(Self { grid, values, time })
    }

    /// Unchecked constructor for internal hot paths.
    pub(crate) fn from_parts(grid: GridSpec<T>, values: Vec<Complex<T>>, time: T) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, time }
    }

    pub fn zeros(grid: &GridSpec<T>, time: T) -> Self {
        Self::from_parts(grid.clone(), vec![Complex::new(T::zero(), T::zero()); grid.len()], time)
    }

    /// Samples `f(x)` at every grid point; `x` has `grid.dim()` meaningful entries.
    pub fn from_fn(grid: &GridSpec<T>, time: T, mut f: impl FnMut(&[T]) -> Complex<T>) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.coordinates(i);
                f(&x[..dim])
            })
            .collect();
        Self::from_parts(grid.clone(), values, time)
    }

    /// Real samples `f(x)` (imaginary part zero).
    pub fn from_real_fn(grid: &GridSpec<T>, time: T, mut f: impl FnMut(&[T]) -> T) -> Self {
        Self::from_fn(grid, time, |x| Complex::new(f(x), T::zero()))
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn with_time(mut self, time: T) -> Self {
        self.time = time;
        self
    }

    pub fn set_time(&mut self, time: T) {
        self.time = time;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub(crate) fn check_same_grid(&self, other: &Field<T>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Pointwise density `|u|^2` as a real-valued field.
    pub fn density(&self) -> Field<T> {
        let values = self
            .values
            .iter()
            .map(|z| Complex::new(z.norm_sqr(), T::zero()))
            .collect();
        Self::from_parts(self.grid.clone(), values, self.time)
    }

    /// Real parts of the samples.
    pub fn real_parts(&self) -> Vec<T> {
        self.values.iter().map(|z| z.re).collect()
    }

    /// `self - other`, keeping `self`'s time stamp.
    pub fn sub(&self, other: &Field<T>) -> Result<Field<T>> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self::from_parts(self.grid.clone(), values, self.time))
    }

    /// `self + other`, keeping `self`'s time stamp.
    pub fn add(&self, other: &Field<T>) -> Result<Field<T>> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self::from_parts(self.grid.clone(), values, self.time))
    }

    /// Multiplies every sample by `c`.
    pub fn scale(&self, c: Complex<T>) -> Field<T> {
        let values = self.values.iter().map(|z| z * c).collect();
        Self::from_parts(self.grid.clone(), values, self.time)
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Field<T> {
        let values = self.values.iter().map(|z| z.conj()).collect();
        Self::from_parts(self.grid.clone(), values, self.time)
    }

    /// `L^2` inner product `<self, other> = sum conj(self) other h^n`.
    pub fn inner(&self, other: &Field<T>) -> Result<Complex<T>> {
        self.check_same_grid(other)?;
        let mut acc = Complex::new(T::zero(), T::zero());
        for (a, b) in self.values.iter().zip(&other.values) {
            acc = acc + a.conj() * b;
        }
        Ok(acc * self.grid.cell_volume())
    }

    /// Squared `L^2` norm (the mass).
    pub fn mass(&self) -> T {
        self.values.iter().map(|z| z.norm_sqr()).sum::<T>() * self.grid.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn new_validates_length_and_finiteness() {
        let g = make_grid(1, 8, 1.0_f64).unwrap();
        assert!(Field::new(g.clone(), vec![Complex::new(0.0, 0.0); 7], 0.0).is_err());
        let mut v = vec![Complex::new(0.0, 0.0); 8];
        v[3] = Complex::new(f64::NAN, 0.0);
        assert!(Field::new(g.clone(), v, 0.0).is_err());
        assert!(Field::new(g, vec![Complex::new(1.0, 0.0); 8], 0.5).is_ok());
    }

    #[test]
    fn mass_of_constant_is_box_volume() {
        let g = make_grid(2, 8, 2.0_f64).unwrap();
        let f = Field::from_real_fn(&g, 0.0, |_| 1.0);
        assert!((f.mass() - 16.0).abs() < 1e-12);
        assert!((f.inner(&f).unwrap().re - 16.0).abs() < 1e-12);
    }
}
