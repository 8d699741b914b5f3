//! Periodic box discretization and the multidimensional DFT.
//!
//! Samples are stored row-major with the last axis fastest. Physical
//! coordinates along each axis are `x_i = -L + i h`, `i = 0..N`, so the origin
//! sits at index `N/2`. Spectral arrays use the natural DFT layout: along each
//! axis the frequencies are ordered `0, 1, .., N/2-1, -N/2, .., -1` and the
//! wavenumber of index `j` is `pi j / L`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

/// Direction of a DFT pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

struct Cache<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// Wavenumbers of one axis in DFT order.
    k_axis: Vec<T>,
    /// Coordinates of one axis.
    x_axis: Vec<T>,
    /// `|k|^2` over the full spectral array (Nyquist modes included).
    k_squared: Vec<T>,
    /// `|x|` over the full physical array.
    radius: Vec<T>,
}

/// Uniform periodic grid on `[-L, L)^n`.
///
/// Cloning is cheap: FFT plans and coordinate tables are shared.
#[derive(Clone)]
pub struct GridSpec<T: Real> {
    dim: usize,
    points: usize,
    half_length: T,
    cache: Arc<Cache<T>>,
}

impl<T: Real> fmt::Debug for GridSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("dim", &self.dim)
            .field("points", &self.points)
            .field("half_length", &self.half_length)
            .finish()
    }
}

impl<T: Real> PartialEq for GridSpec<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.points == other.points
            && self.half_length == other.half_length
    }
}

/// Builds a grid with `points` samples per axis on `[-half_length, half_length)^dim`.
pub fn make_grid<T: Real>(dim: usize, points: usize, half_length: T) -> Result<GridSpec<T>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
    }
    if !points.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!("points per axis {points} is odd")));
    }
    if points < 8 {
        return Err(Error::InvalidGrid(format!("points per axis {points} < 8")));
    }
    if !(half_length > T::zero()) || !half_length.is_finite() {
        return Err(Error::InvalidGrid(format!("half length {half_length} not positive")));
    }

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(points);
    let inverse = planner.plan_fft_inverse(points);

    let spacing = lit::<T>(2.0) * half_length / from_usize(points);
    let dk = T::PI() / half_length;
    let half = points / 2;
    let k_axis: Vec<T> = (0..points)
        .map(|j| {
            if j < half {
                from_usize::<T>(j) * dk
            } else {
                -(from_usize::<T>(points - j) * dk)
            }
        })
        .collect();
    let x_axis: Vec<T> = (0..points)
        .map(|i| -half_length + from_usize::<T>(i) * spacing)
        .collect();

    let total = points.pow(dim as u32);
    let mut k_squared = vec![T::zero(); total];
    let mut radius = vec![T::zero(); total];
    let mut idx = [0usize; 3];
    for flat in 0..total {
        unravel(flat, dim, points, &mut idx);
        let mut k2 = T::zero();
        let mut r2 = T::zero();
        for &i in &idx[..dim] {
            k2 = k2 + k_axis[i] * k_axis[i];
            r2 = r2 + x_axis[i] * x_axis[i];
        }
        k_squared[flat] = k2;
        radius[flat] = r2.sqrt();
    }

    Ok(GridSpec {
        dim,
        points,
        half_length,
        cache: Arc::new(Cache {
            forward,
            inverse,
            k_axis,
            x_axis,
            k_squared,
            radius,
        }),
    })
}

#[inline]
pub(crate) fn unravel(mut flat: usize, dim: usize, points: usize, idx: &mut [usize; 3]) {
    for axis in (0..dim).rev() {
        idx[axis] = flat % points;
        flat /= points;
    }
}

impl<T: Real> GridSpec<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn half_length(&self) -> T {
        self.half_length
    }

    /// Grid spacing `h = 2L/N`.
    pub fn spacing(&self) -> T {
        lit::<T>(2.0) * self.half_length / from_usize(self.points)
    }

    /// Quadrature weight `h^n` of one cell.
    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of samples `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Box volume `(2L)^n`.
    pub fn volume(&self) -> T {
        (lit::<T>(2.0) * self.half_length).powi(self.dim as i32)
    }

    /// Distance from the origin to the farthest grid point, `L sqrt(n)`.
    pub fn diagonal(&self) -> T {
        self.half_length * from_usize::<T>(self.dim).sqrt()
    }

    /// Whether the configuration lies inside the `n >= 3` range the scattering theory covers.
    pub fn within_theory_dimension(&self) -> bool {
        self.dim >= 3
    }

    /// Wavenumbers of one axis in DFT order.
    pub fn wavenumbers(&self) -> &[T] {
        &self.cache.k_axis
    }

    /// Coordinates of one axis.
    pub fn axis_coordinates(&self) -> &[T] {
        &self.cache.x_axis
    }

    /// `|k|^2` on the full spectral array.
    pub fn k_squared(&self) -> &[T] {
        &self.cache.k_squared
    }

    /// `|x|` on the full physical array.
    pub fn radius(&self) -> &[T] {
        &self.cache.radius
    }

    /// Flat index of the grid point at the origin.
    pub fn origin_index(&self) -> usize {
        let half = self.points / 2;
        (0..self.dim).fold(0, |acc, _| acc * self.points + half)
    }

    /// Multi-index of a flat index (unused trailing entries are zero).
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        unravel(flat, self.dim, self.points, &mut idx);
        idx
    }

    /// Physical coordinates of a flat index (unused trailing entries are zero).
    pub fn coordinates(&self, flat: usize) -> [T; 3] {
        let idx = self.multi_index(flat);
        let mut x = [T::zero(); 3];
        for axis in 0..self.dim {
            x[axis] = self.cache.x_axis[idx[axis]];
        }
        x
    }

    /// Wave vector of a flat spectral index (unused trailing entries are zero).
    pub fn wavevector(&self, flat: usize) -> [T; 3] {
        let idx = self.multi_index(flat);
        let mut k = [T::zero(); 3];
        for axis in 0..self.dim {
            k[axis] = self.cache.k_axis[idx[axis]];
        }
        k
    }

    /// Whether the spectral index is a Nyquist mode along `axis`.
    pub fn is_nyquist(&self, flat: usize, axis: usize) -> bool {
        self.multi_index(flat)[axis] == self.points / 2
    }

    /// In-place forward DFT (unnormalized).
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, Direction::Forward);
    }

    /// In-place inverse DFT including the `1/N^n` normalization.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, Direction::Inverse);
        let scale = T::one() / from_usize::<T>(self.len());
        for z in data.iter_mut() {
            *z = *z * scale;
        }
    }

    fn transform(&self, data: &mut [Complex<T>], direction: Direction) {
        assert_eq!(data.len(), self.len(), "array length does not match grid");
        let fft = match direction {
            Direction::Forward => &self.cache.forward,
            Direction::Inverse => &self.cache.inverse,
        };
        let n = self.points;
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        // Last axis is contiguous.
        fft.process_with_scratch(data, &mut scratch);
        if self.dim == 1 {
            return;
        }
        // Strided axes: gather TILE columns into contiguous lines, transform, scatter back.
        const TILE: usize = 16;
        let mut tile = vec![Complex::new(T::zero(), T::zero()); TILE * n];
        for axis in 0..self.dim - 1 {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            for block in data.chunks_exact_mut(n * stride) {
                for c0 in (0..stride).step_by(TILE) {
                    let width = TILE.min(stride - c0);
                    for i in 0..n {
                        let row = &block[i * stride + c0..i * stride + c0 + width];
                        for (w, &z) in row.iter().enumerate() {
                            tile[w * n + i] = z;
                        }
                    }
                    fft.process_with_scratch(&mut tile[..width * n], &mut scratch);
                    for i in 0..n {
                        let row = &mut block[i * stride + c0..i * stride + c0 + width];
                        for (w, z) in row.iter_mut().enumerate() {
                            *z = tile[w * n + i];
                        }
                    }
                }
            }
        }
    }
}
