use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SKNN";
const VERSION: u8 = 1;

/// A named dense array as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

/// `SKNN`, version byte, then per record: `u16` name length, UTF-8 name,
/// `u8` rank, `u32` dims, `f32` data; little-endian, records to end of file.
pub fn encode_checkpoint(records: &[NamedArray]) -> Result<Vec<u8>> {
    let mut out = CHECKPOINT_MAGIC.to_vec();
    out.push(VERSION);
    for r in records {
        let len: u16 = r
            .name
            .len()
            .try_into()
            .map_err(|_| Error::Format(format!("record name too long: {}", r.name)))?;
        let rank: u8 = r.dims.len().try_into().map_err(|_| Error::Format("rank exceeds 255".into()))?;
        if r.dims.iter().product::<usize>() != r.data.len() {
            return Err(Error::shape(format!("record {} dims {:?} vs {} values", r.name, r.dims, r.data.len())));
        }
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.push(rank);
        for &d in &r.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &r.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<NamedArray>> {
    if bytes.len() < 5 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not an SKNN checkpoint".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported SKNN version {}", bytes[4])));
    }
    let truncated = || Error::Format("truncated SKNN record".into());
    let mut pos = 5;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(truncated)?;
        pos += n;
        Ok(s)
    };
    let mut out = Vec::new();
    loop {
        let Ok(len) = take(2) else { break };
        let len = u16::from_le_bytes([len[0], len[1]]) as usize;
        let name = String::from_utf8(take(len)?.to_vec()).map_err(|_| Error::Format("non-UTF-8 record name".into()))?;
        let rank = take(1)?[0] as usize;
        let dims: Vec<usize> = (0..rank)
            .map(|_| take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize))
            .collect::<Result<_>>()?;
        let n: usize = dims.iter().product();
        let data = take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        out.push(NamedArray { name, dims, data });
    }
    Ok(out)
}

pub fn write_checkpoint(path: &Path, records: &[NamedArray]) -> Result<()> {
    Ok(fs::write(path, encode_checkpoint(records)?)?)
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<NamedArray>> {
    decode_checkpoint(&fs::read(path)?)
}
