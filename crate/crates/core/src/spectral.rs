//! Fourier-side calculus: gradients and multipliers.

use num_complex::Complex;

use crate::field::Field;
use crate::grid::GridSpec;
use crate::scalar::{lit, Real};

/// Forward DFT of the field samples.
pub fn to_spectrum<T: Real>(f: &Field<T>) -> Vec<Complex<T>> {
    let mut data = f.values().to_vec();
    f.grid().forward(&mut data);
    data
}

/// Inverse DFT back to a field stamped with `time`.
pub fn from_spectrum<T: Real>(grid: &GridSpec<T>, mut spectrum: Vec<Complex<T>>, time: T) -> Field<T> {
    grid.inverse(&mut spectrum);
    Field::from_parts(grid.clone(), spectrum, time)
}

/// Multiplies a spectrum by `i k_axis`, zeroing the Nyquist mode of that axis.
pub(crate) fn derivative_spectrum<T: Real>(
    grid: &GridSpec<T>,
    spectrum: &[Complex<T>],
    axis: usize,
) -> Vec<Complex<T>> {
    let n = grid.points_per_axis();
    let stride = n.pow((grid.dim() - 1 - axis) as u32);
    let k = grid.wavenumbers();
    let nyquist = n / 2;
    spectrum
        .iter()
        .enumerate()
        .map(|(flat, z)| {
            let j = (flat / stride) % n;
            if j == nyquist {
                Complex::new(T::zero(), T::zero())
            } else {
                Complex::new(-z.im * k[j], z.re * k[j])
            }
        })
        .collect()
}

/// Gradient components from a precomputed spectrum.
pub(crate) fn gradient_from_spectrum<T: Real>(
    grid: &GridSpec<T>,
    spectrum: &[Complex<T>],
    time: T,
) -> Vec<Field<T>> {
    (0..grid.dim())
        .map(|axis| from_spectrum(grid, derivative_spectrum(grid, spectrum, axis), time))
        .collect()
}

/// Spectral gradient `(d_1 f, .., d_n f)`; the Nyquist coefficient of each
/// derivative is set to zero so real fields have real gradients.
pub fn spectral_gradient<T: Real>(f: &Field<T>) -> Vec<Field<T>> {
    gradient_from_spectrum(f.grid(), &to_spectrum(f), f.time())
}

/// `sum_k |k|^2 |f_k|^2 h^n / N^n`, i.e. `||grad f||_2^2` for the Laplacian
/// symbol used by the propagator (Nyquist modes included).
pub(crate) fn laplacian_quadratic_form<T: Real>(grid: &GridSpec<T>, spectrum: &[Complex<T>]) -> T {
    let acc: T = spectrum
        .iter()
        .zip(grid.k_squared())
        .map(|(z, &k2)| z.norm_sqr() * k2)
        .sum();
    acc * grid.cell_volume() / crate::scalar::from_usize::<T>(grid.len())
}

/// `||f||_2^2` evaluated on the Fourier side via Parseval.
pub fn spectral_mass<T: Real>(f: &Field<T>) -> T {
    let spec = to_spectrum(f);
    let acc: T = spec.iter().map(|z| z.norm_sqr()).sum();
    acc * f.grid().cell_volume() / crate::scalar::from_usize::<T>(f.grid().len())
}

/// The multiplier `exp(-i t |k|^2 / 2)` over the spectral array.
pub(crate) fn free_phase_table<T: Real>(grid: &GridSpec<T>, t: T) -> Vec<Complex<T>> {
    let half_t = t * lit::<T>(0.5);
    grid.k_squared()
        .iter()
        .map(|&k2| {
            let (s, c) = (half_t * k2).sin_cos();
            Complex::new(c, -s)
        })
        .collect()
}

/// Pointwise product with a precomputed multiplier.
pub(crate) fn apply_table<T: Real>(spectrum: &mut [Complex<T>], table: &[Complex<T>]) {
    for (z, m) in spectrum.iter_mut().zip(table) {
        *z = *z * m;
    }
}

/// Multiplies a spectrum pointwise by `exp(-i t |k|^2 / 2)`.
pub(crate) fn apply_free_phase<T: Real>(grid: &GridSpec<T>, spectrum: &mut [Complex<T>], t: T) {
    let half_t = t * lit::<T>(0.5);
    for (z, &k2) in spectrum.iter_mut().zip(grid.k_squared()) {
        let (s, c) = (half_t * k2).sin_cos();
        *z = *z * Complex::new(c, -s);
    }
}
