//! Binary dataset files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   b"RVSD"
//! version u32 (= 1)
//! k       u32
//! d       u32
//! m       u64   number of samples
//! seed    u64
//! offset  u64   stream index of the first sample
//! entries m·k·d f64, sample-major, each sample row-major k × d
//! ```

use std::io::{Read, Write};

use rvscgd_core::{Dataset, PatchMatrix};

use crate::HarnessError;

pub const MAGIC: [u8; 4] = *b"RVSD";
pub const VERSION: u32 = 1;

/// Header fields of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub k: u32,
    pub d: u32,
    pub m: u64,
    pub seed: u64,
    pub offset: u64,
}

fn io(e: std::io::Error) -> HarnessError {
    HarnessError::Format(e.to_string())
}

pub fn write_dataset<W: Write>(mut out: W, data: &Dataset) -> Result<(), HarnessError> {
    let k = u32::try_from(data.k()).map_err(|_| HarnessError::Format("k exceeds u32".into()))?;
    let d = u32::try_from(data.d()).map_err(|_| HarnessError::Format("d exceeds u32".into()))?;
    out.write_all(&MAGIC).map_err(io)?;
    for v in [VERSION, k, d] {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for v in [data.len() as u64, data.seed(), data.offset()] {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for z in data.samples() {
        for x in z.entries() {
            out.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], HarnessError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| HarnessError::Format(format!("truncated file: {e}")))?;
    Ok(b)
}

pub fn read_header<R: Read>(r: &mut R) -> Result<Header, HarnessError> {
    if read_array::<4, _>(r)? != MAGIC {
        return Err(HarnessError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(r)?);
    if version != VERSION {
        return Err(HarnessError::Format(format!(
            "unsupported version {version}"
        )));
    }
    Ok(Header {
        k: u32::from_le_bytes(read_array(r)?),
        d: u32::from_le_bytes(read_array(r)?),
        m: u64::from_le_bytes(read_array(r)?),
        seed: u64::from_le_bytes(read_array(r)?),
        offset: u64::from_le_bytes(read_array(r)?),
    })
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<Dataset, HarnessError> {
    let h = read_header(&mut r)?;
    let (k, d) = (h.k as usize, h.d as usize);
    let m =
        usize::try_from(h.m).map_err(|_| HarnessError::Format("sample count too large".into()))?;
    let mut samples = Vec::with_capacity(m.min(1 << 20));
    for _ in 0..m {
        let mut entries = Vec::with_capacity(k * d);
        for _ in 0..k * d {
            entries.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        samples.push(PatchMatrix::new(k, d, entries)?);
    }
    if r.read(&mut [0u8; 1]).map_err(io)? != 0 {
        return Err(HarnessError::Format(
            "trailing bytes after last sample".into(),
        ));
    }
    Ok(Dataset::from_samples(k, d, h.seed, h.offset, samples)?)
}
