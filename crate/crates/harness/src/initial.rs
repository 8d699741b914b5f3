//! Deterministic initial data.

use hartree_core::io::load_field;
use hartree_core::spectral::from_spectrum;
use hartree_core::{Field64, GridSpec64};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{InitialBlock, InitialKind};
use crate::error::{HarnessError, Result};

fn fail<V>(msg: impl Into<String>) -> Result<V> {
    Err(HarnessError::InitialData(msg.into()))
}

/// Builds the initial field described by `block` on `grid` at `t = 0`.
///
/// - gaussian: `amplitude exp(-|x-c|^2 / (2 w^2)) exp(i v.x)`, optionally
///   rescaled to `norm`;
/// - random_band_limited: seeded complex Gaussian Fourier coefficients on
///   `|k| <= band`, scaled to `L^2` norm `amplitude`;
/// - from_file: a field file on the same grid.
pub fn generate_initial_data(block: &InitialBlock, grid: &GridSpec64) -> Result<Field64> {
    let dim = grid.dim();
    let field = match block.kind {
        InitialKind::Gaussian => {
            let amp = block.amplitude.unwrap_or(1.0);
            let width = block.width.unwrap_or(1.0);
            let center = block.center.clone().unwrap_or_else(|| vec![0.0; dim]);
            let velocity = block.velocity.clone().unwrap_or_else(|| vec![0.0; dim]);
            let f = Field64::from_fn(grid, 0.0, |x| {
                let mut r2 = 0.0;
                let mut phase = 0.0;
                for a in 0..dim {
                    r2 += (x[a] - center[a]).powi(2);
                    phase += velocity[a] * x[a];
                }
                Complex::from_polar(amp * (-r2 / (2.0 * width * width)).exp(), phase)
            });
            match block.norm {
                Some(target) => normalized(f, target)?,
                None => f,
            }
        }
        InitialKind::RandomBandLimited => {
            let seed = match block.seed {
                Some(s) => s,
                None => return fail("random data needs a seed"),
            };
            let band = block.band.unwrap_or(0.0);
            let nyquist = std::f64::consts::PI / grid.spacing();
            if !(band > 0.0) || band > nyquist {
                return fail(format!("band {band} outside (0, {nyquist}] (Nyquist)"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spectrum: Vec<Complex<f64>> = grid
                .k_squared()
                .iter()
                .map(|&k2| {
                    if k2 <= band * band {
                        Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                    } else {
                        Complex::new(0.0, 0.0)
                    }
                })
                .collect();
            let f = from_spectrum(grid, spectrum, 0.0);
            normalized(f, block.amplitude.unwrap_or(1.0))?
        }
        InitialKind::FromFile => {
            let path = match &block.path {
                Some(p) => p,
                None => return fail("from_file needs a path"),
            };
            let f: Field64 = load_field(path)?;
            if f.grid() != grid {
                return fail(format!("{} holds a field on {:?}, config asks for {:?}", path.display(), f.grid(), grid));
            }
            f.with_time(0.0)
        }
    };
    if !field.is_finite() {
        return fail("initial data has non-finite samples");
    }
    Ok(field)
}

fn normalized(f: Field64, target: f64) -> Result<Field64> {
    if target == 0.0 {
        return Ok(Field64::zeros(f.grid(), f.time()));
    }
    let norm = f.mass().sqrt();
    if norm == 0.0 {
        return fail("cannot rescale a zero field to a positive norm");
    }
    Ok(f.scale(Complex::new(target / norm, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hartree_core::make_grid;

    fn random(seed: u64, band: f64, amplitude: f64) -> InitialBlock {
        InitialBlock {
            kind: InitialKind::RandomBandLimited,
            seed: Some(seed),
            band: Some(band),
            amplitude: Some(amplitude),
            ..InitialBlock::default()
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let g = make_grid(3, 8, 2.0).unwrap();
        let block = InitialBlock { amplitude: Some(0.0), ..InitialBlock::default() };
        assert_eq!(generate_initial_data(&block, &g).unwrap().mass(), 0.0);
        assert_eq!(generate_initial_data(&random(1, 2.0, 0.0), &g).unwrap().mass(), 0.0);
    }

    #[test]
    fn seeded_data_is_bit_identical() {
        let g = make_grid(3, 16, 4.0).unwrap();
        let a = generate_initial_data(&random(7, 3.0, 1.0), &g).unwrap();
        let b = generate_initial_data(&random(7, 3.0, 1.0), &g).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x == y));
        let c = generate_initial_data(&random(8, 3.0, 1.0), &g).unwrap();
        assert!(a.values().iter().zip(c.values()).any(|(x, y)| x != y));
    }

    #[test]
    fn requested_norm_is_achieved() {
        let g = make_grid(3, 16, 4.0).unwrap();
        let f = generate_initial_data(&random(3, 2.5, 1.0), &g).unwrap();
        assert!((f.mass().sqrt() - 1.0).abs() < 1e-12);
        let block = InitialBlock { norm: Some(0.5), ..InitialBlock::default() };
        let f = generate_initial_data(&block, &g).unwrap();
        assert!((f.mass().sqrt() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn band_above_nyquist_is_an_error() {
        let g = make_grid(3, 16, 4.0).unwrap();
        let nyquist = std::f64::consts::PI / g.spacing();
        assert!(generate_initial_data(&random(1, nyquist * 1.01, 1.0), &g).is_err());
        assert!(generate_initial_data(&random(1, nyquist, 1.0), &g).is_ok());
    }

    #[test]
    fn random_data_is_band_limited() {
        let g = make_grid(3, 16, 4.0).unwrap();
        let f = generate_initial_data(&random(5, 2.0, 1.0), &g).unwrap();
        let spec = hartree_core::spectral::to_spectrum(&f);
        for (z, k2) in spec.iter().zip(g.k_squared()) {
            if *k2 > 4.0 + 1e-12 {
                assert!(z.norm() < 1e-10);
            }
        }
    }
}
