//! Binary checkpoint of an [`MreState`].
//!
//! Layout (little-endian): magic `MRE1`, `u32` dim, `u32` n for each axis,
//! `f64` γ, `f64` t, then for each component of B its complex coefficients
//! as `(re, im)` `f64` pairs in row-major FFT order.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::dynamics::MreState;
use crate::error::{MreError, Result};
use crate::field::{SpectralScalar, SpectralVector};
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"MRE1";

pub fn encode(state: &MreState) -> Vec<u8> {
    let grid = state.b.grid();
    let dim = grid.dim();
    let mut out = Vec::with_capacity(4 + 4 * (dim + 1) + 16 + 16 * dim * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for &n in grid.shape() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&state.gamma.to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    for comp in state.b.comps() {
        for c in comp.coeffs() {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| MreError::Format("checkpoint truncated".into()))?;
        self.pos = end;
        Ok(chunk.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Decodes a checkpoint. The state's step counter restarts at zero.
pub fn decode(bytes: &[u8]) -> Result<MreState> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>()? != MAGIC {
        return Err(MreError::Format("bad magic bytes".into()));
    }
    let dim = r.u32()? as usize;
    if dim != 2 && dim != 3 {
        return Err(MreError::Format(format!("unsupported dimension {dim}")));
    }
    let mut shape = Vec::with_capacity(dim);
    for _ in 0..dim {
        shape.push(r.u32()? as usize);
    }
    let grid = Grid::new(&shape).map_err(|e| MreError::Format(e.to_string()))?;
    let gamma = r.f64()?;
    let t = r.f64()?;
    let expected = r.pos + 16 * dim * grid.len();
    if bytes.len() != expected {
        return Err(MreError::Format(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut comps = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut coeffs = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = r.f64()?;
            let im = r.f64()?;
            coeffs.push(Complex64::new(re, im));
        }
        comps.push(SpectralScalar::from_coeffs(&grid, coeffs)?);
    }
    if !(gamma >= 0.0 && gamma.is_finite() && t.is_finite()) {
        return Err(MreError::Format("invalid gamma or time".into()));
    }
    Ok(MreState {
        b: SpectralVector::from_components(comps)?,
        t,
        gamma,
        steps: 0,
    })
}

pub fn write_file(path: &Path, state: &MreState) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(state))?;
    f.sync_all()?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<MreState> {
    decode(&fs::read(path)?)
}
