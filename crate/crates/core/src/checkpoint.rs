//! Binary spectral checkpoints.
//!
//! Layout (all little-endian): magic `b"SQGF"`, format version `u32`, `n`
//! as `u32`, box length `f64`, then `n * n` pairs `(re, im)` of `f64` in the
//! row-major storage order of [`Grid`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Result, SqgError};
use crate::field::SpectralField;
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"SQGF";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_field<W: Write>(mut w: W, f: &SpectralField) -> Result<()> {
    let g = f.grid();
    let n = u32::try_from(g.n()).map_err(|_| SqgError::Checkpoint("grid too large".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&g.box_len().to_le_bytes())?;
    for c in f.coeffs() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| SqgError::Checkpoint("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(SqgError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(SqgError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let n = read_u32(&mut r)? as usize;
    let box_len = read_f64(&mut r)?;
    let grid = Grid::new(n, box_len).map_err(|e| SqgError::Checkpoint(e.to_string()))?;
    let mut coeffs = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        coeffs.push(Complex64::new(re, im));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(SqgError::Checkpoint("trailing bytes after payload".into()));
    }
    SpectralField::from_coeffs(grid, coeffs)
}

pub fn save(path: impl AsRef<Path>, f: &SpectralField) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), f)
}

pub fn load(path: impl AsRef<Path>) -> Result<SpectralField> {
    read_field(BufReader::new(File::open(path)?))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| SqgError::Checkpoint("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| SqgError::Checkpoint("truncated payload".into()))?;
    Ok(f64::from_le_bytes(b))
}
