//! Binary field files and CSV number formatting.
//!
//! Field layout, all little-endian:
//!
//! ```text
//! "MGRF" | version u32 | d u32 | p u32 | m1 u32 | m2 u32 | h f64 | seed u64
//!        | replicate u32 | construction u8 | p·m1·m2 f64 values
//! ```
//!
//! The header is 45 bytes. Values are component-major, row-major within a
//! component. The periodicity of the grid is not stored: Markov fields are
//! read back on a lattice, the other constructions on a periodic grid.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Construction, GridSpec, Realization};

pub const MAGIC: &[u8; 4] = b"MGRF";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 45;

/// 17 significant digits, enough to round-trip any double.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn encode_field(r: &Realization) -> Vec<u8> {
    let [m1, m2] = r.grid.sizes();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * r.values.len());
    out.extend_from_slice(MAGIC);
    for v in [FORMAT_VERSION, r.grid.d() as u32, r.p as u32, m1 as u32, m2 as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&r.grid.spacing().to_le_bytes());
    out.extend_from_slice(&r.seed.to_le_bytes());
    out.extend_from_slice(&r.replicate.to_le_bytes());
    out.push(r.construction.tag());
    for v in &r.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<Realization> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Length { expected: HEADER_LEN, found: bytes.len() });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (d, p, m1, m2) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize);
    let h = f64::from_bits(u64_at(24));
    let seed = u64_at(32);
    let replicate = u32_at(40);
    let construction = Construction::from_tag(bytes[44])?;
    if !(1..=2).contains(&d) || (d == 1 && m2 != 1) || p == 0 {
        return Err(Error::Format(format!("bad dimensions d={d} p={p} m=({m1},{m2})")));
    }
    let sizes = if d == 1 { vec![m1] } else { vec![m1, m2] };
    let grid = match construction {
        Construction::Markov => GridSpec::lattice(&sizes, h),
        _ => GridSpec::periodic(&sizes, h),
    }
    .map_err(|e| Error::Format(e.to_string()))?;
    let count = p * m1 * m2;
    let expected = HEADER_LEN + 8 * count;
    if bytes.len() != expected {
        return Err(Error::Length { expected, found: bytes.len() });
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Realization::new(grid, p, values, seed, replicate, construction).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_field(path: &Path, r: &Realization) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_field(r))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Realization> {
    decode_field(&fs::read(path)?)
}
