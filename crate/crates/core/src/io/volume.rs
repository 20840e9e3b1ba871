use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{GridSpec, SdfVolume};

pub const VOLUME_MAGIC: &[u8; 4] = b"MSDF";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 12 + 12 + 4;

/// `MSDF`, version byte, `u32` dims, `f32` origin, `f32` spacing, then `f32`
/// values x-fastest; all little-endian.
pub fn encode_volume(vol: &SdfVolume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * vol.values.len());
    out.extend_from_slice(VOLUME_MAGIC);
    out.push(VERSION);
    for d in vol.grid.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for o in vol.grid.origin {
        out.extend_from_slice(&(o as f32).to_le_bytes());
    }
    out.extend_from_slice(&(vol.grid.spacing as f32).to_le_bytes());
    for v in &vol.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_volume(bytes: &[u8]) -> Result<SdfVolume> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != VOLUME_MAGIC {
        return Err(Error::Format("not an MSDF volume".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported MSDF version {}", bytes[4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let dims = [u32_at(5) as usize, u32_at(9) as usize, u32_at(13) as usize];
    let origin = [f32_at(17), f32_at(21), f32_at(25)];
    let grid = GridSpec::new(dims, origin, f32_at(29))?;
    let expected = HEADER_LEN + 4 * grid.len();
    if bytes.len() != expected {
        return Err(Error::Format(format!("MSDF payload is {} bytes, expected {expected}", bytes.len())));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    SdfVolume::new(grid, values)
}

pub fn write_volume(path: &Path, vol: &SdfVolume) -> Result<()> {
    Ok(fs::write(path, encode_volume(vol))?)
}

pub fn read_volume(path: &Path) -> Result<SdfVolume> {
    decode_volume(&fs::read(path)?)
}
