//! Binary parameter checkpoints: five little-endian `u64` header words
//! (magic, version, width, blocks, precision flag) followed by the flat
//! parameters as little-endian `f64`.

use std::io::{Read, Write};

use super::{Layout, Precision, ResNet};
use crate::{Error, Result};

/// ASCII "RITZNET\0".
pub const CHECKPOINT_MAGIC: u64 = u64::from_le_bytes(*b"RITZNET\0");
pub const CHECKPOINT_VERSION: u64 = 1;

pub fn write_checkpoint<W: Write>(net: &ResNet, mut out: W) -> Result<()> {
    let flag = match net.precision() {
        Precision::F64 => 0u64,
        Precision::F32 => 1,
    };
    for word in [CHECKPOINT_MAGIC, CHECKPOINT_VERSION, net.width() as u64, net.blocks() as u64, flag] {
        out.write_all(&word.to_le_bytes())?;
    }
    for v in net.params() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_word<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input
        .read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<ResNet> {
    let magic = read_word(&mut input)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:#018x}")));
    }
    let version = read_word(&mut input)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let width = read_word(&mut input)? as usize;
    let blocks = read_word(&mut input)? as usize;
    let precision = match read_word(&mut input)? {
        0 => Precision::F64,
        1 => Precision::F32,
        other => return Err(Error::Checkpoint(format!("unknown precision flag {other}"))),
    };
    if width == 0 || blocks == 0 || width > 1 << 16 || blocks > 1 << 10 {
        return Err(Error::Checkpoint(format!("implausible shape N={width}, m={blocks}")));
    }
    let len = Layout { width, blocks }.num_params();
    let mut bytes = vec![0u8; 8 * len];
    input
        .read_exact(&mut bytes)
        .map_err(|e| Error::Checkpoint(format!("expected {len} parameters: {e}")))?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    let params = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight bytes")))
        .collect();
    Ok(ResNet::from_params(width, blocks, params)?.with_precision(precision))
}
