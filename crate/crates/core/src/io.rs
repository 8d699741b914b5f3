//! Field files, diagnostics tables and tabulated potentials.
//!
//! A field file starts with the magic `HSF1`, then `n` and `N` as
//! little-endian `u64`, then `L` and the time stamp as little-endian `f64`,
//! then `N^n` samples as `(re, im)` pairs of little-endian `f64`, row-major
//! with the last axis fastest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::make_grid;
use crate::observables::DiagnosticsRow;
use crate::potential::PotentialSpec;
use crate::scalar::{lit, to_f64, Real};

/// Leading bytes of a field file.
pub const FIELD_MAGIC: &[u8; 4] = b"HSF1";

/// Writes `field` in the binary field format.
pub fn write_field<T: Real, W: Write>(mut out: W, field: &Field<T>) -> Result<()> {
    let grid = field.grid();
    out.write_all(FIELD_MAGIC)?;
    out.write_all(&(grid.dim() as u64).to_le_bytes())?;
    out.write_all(&(grid.points_per_axis() as u64).to_le_bytes())?;
    out.write_all(&to_f64(grid.half_length()).to_le_bytes())?;
    out.write_all(&to_f64(field.time()).to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for z in field.values() {
        buf.extend_from_slice(&to_f64(z.re).to_le_bytes());
        buf.extend_from_slice(&to_f64(z.im).to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

fn read_8<R: Read>(input: &mut R, what: &str) -> Result<[u8; 8]> {
    let mut b = [0u8; 8];
    input
        .read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header ({what}): {e}")))?;
    Ok(b)
}

/// Reads a field written by [`write_field`]; the grid is rebuilt from the header.
pub fn read_field<T: Real, R: Read>(mut input: R) -> Result<Field<T>> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|e| Error::Format(format!("missing magic: {e}")))?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let dim = u64::from_le_bytes(read_8(&mut input, "n")?);
    let points = u64::from_le_bytes(read_8(&mut input, "N")?);
    let half_length = f64::from_le_bytes(read_8(&mut input, "L")?);
    let time = f64::from_le_bytes(read_8(&mut input, "time")?);
    if !(1..=3).contains(&dim) || points == 0 || points > 1 << 16 {
        return Err(Error::Format(format!("implausible header n = {dim}, N = {points}")));
    }
    if !time.is_finite() {
        return Err(Error::Format(format!("non-finite time stamp {time}")));
    }
    let grid = make_grid::<T>(dim as usize, points as usize, lit(half_length))?;
    let mut bytes = vec![0u8; 16 * grid.len()];
    input
        .read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("expected {} samples: {e}", grid.len())))?;
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after the samples".into()));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex::new(lit(re), lit(im))
        })
        .collect();
    Field::new(grid, values, lit(time))
}

pub fn save_field<T: Real>(path: impl AsRef<Path>, field: &Field<T>) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), field)
}

pub fn load_field<T: Real>(path: impl AsRef<Path>) -> Result<Field<T>> {
    read_field(BufReader::new(File::open(path)?))
}

/// Header of the diagnostics table for the given `L^r` exponents.
pub fn diagnostics_header(lp_exponents: &[f64], with_cube: bool) -> String {
    let mut cols: Vec<String> = ["t", "mass", "kinetic", "hartree", "energy", "dilation"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(lp_exponents.iter().map(|r| format!("lp{r}")));
    cols.push("internal_mass".into());
    cols.push("external_mass".into());
    if with_cube {
        cols.push("internal_cube_norm".into());
    }
    cols.join(",")
}

/// Writes diagnostics rows as CSV. All rows must share the exponent list.
/// The `internal_cube_norm` column appears only when every row carries it.
pub fn write_diagnostics_csv<W: Write>(mut out: W, rows: &[DiagnosticsRow]) -> Result<()> {
    let exps: Vec<f64> = rows.first().map(|r| r.lp_norms.iter().map(|p| p.0).collect()).unwrap_or_else(|| vec![4.0, 6.0]);
    let with_cube = !rows.is_empty() && rows.iter().all(|r| r.internal_cube_norm.is_some());
    writeln!(out, "{}", diagnostics_header(&exps, with_cube))?;
    for row in rows {
        let these: Vec<f64> = row.lp_norms.iter().map(|p| p.0).collect();
        if these != exps {
            return Err(Error::InvalidArgument("diagnostics rows disagree on L^r exponents".into()));
        }
        let mut line = format!(
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            row.t, row.mass, row.kinetic, row.hartree, row.energy, row.dilation
        );
        for (_, v) in &row.lp_norms {
            line.push_str(&format!(",{v:e}"));
        }
        line.push_str(&format!(",{:e},{:e}", row.internal_mass, row.external_mass));
        if with_cube {
            line.push_str(&format!(",{:e}", row.internal_cube_norm.expect("checked above")));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a two-column `radius value` table (whitespace or comma separated,
/// `#` comments) into a tabulated radial potential.
pub fn read_tabulated_potential<R: BufRead>(input: R) -> Result<PotentialSpec> {
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let cols: Vec<&str> = body.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if cols.len() != 2 {
            return Err(Error::Format(format!("line {}: expected two columns, found {}", lineno + 1, cols.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {s:?}: {e}", lineno + 1)))
        };
        radii.push(parse(cols[0])?);
        values.push(parse(cols[1])?);
    }
    let spec = PotentialSpec::tabulated(radii, values);
    spec.validate(3)?;
    Ok(spec)
}

pub fn load_tabulated_potential(path: impl AsRef<Path>) -> Result<PotentialSpec> {
    read_tabulated_potential(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_roundtrip_is_bit_exact() {
        let g = make_grid(3, 8, 2.5_f64).unwrap();
        let f = Field::from_fn(&g, 1.25, |x| Complex::new(x[0].sin(), x[1] * x[2]));
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 4 + 32 + 16 * 512);
        assert_eq!(&buf[..4], b"HSF1");
        let g2: Field<f64> = read_field(&buf[..]).unwrap();
        assert_eq!(g2.time(), 1.25);
        assert_eq!(g2.grid(), f.grid());
        assert!(g2.values().iter().zip(f.values()).all(|(a, b)| a == b));
    }

    #[test]
    fn field_reader_rejects_damage() {
        let g = make_grid(2, 8, 1.0_f64).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &Field::zeros(&g, 0.0)).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_field::<f64, _>(&bad[..]).is_err());
        assert!(read_field::<f64, _>(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_field::<f64, _>(&long[..]).is_err());
    }

    #[test]
    fn csv_layout() {
        let row = DiagnosticsRow {
            t: 0.5,
            mass: 1.0,
            kinetic: 0.25,
            hartree: 0.125,
            energy: 0.375,
            dilation: -0.5,
            lp_norms: vec![(4.0, 0.7), (6.0, 0.6)],
            internal_mass: 0.9,
            external_mass: 0.1,
            internal_cube_norm: None,
        };
        let mut out = Vec::new();
        write_diagnostics_csv(&mut out, &[row.clone(), row]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,mass,kinetic,hartree,energy,dilation,lp4,lp6,internal_mass,external_mass");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').count(), 10);
        assert_eq!(lines[1].split(',').next().unwrap().parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn tabulated_reader() {
        let text = "# r v\n0.5 2.0\n1.0, 1.0\n\n2.0 0.0 # tail\n";
        let spec = read_tabulated_potential(text.as_bytes()).unwrap();
        assert!((spec.profile(0.75) - 1.5).abs() < 1e-15);
        assert!(read_tabulated_potential("1.0 2.0 3.0\n".as_bytes()).is_err());
        assert!(read_tabulated_potential("1.0 abc\n".as_bytes()).is_err());
    }
}
