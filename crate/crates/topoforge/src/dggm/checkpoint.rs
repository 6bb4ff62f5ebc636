//! Model checkpoint file: a versioned header (magic bytes, format
//! version, dimensions), parameter tensors as little-endian IEEE-754
//! doubles in layout order, an optional optimizer-moment section, and a
//! trailing 64-bit content checksum.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::adam::AdamState;
use super::model::{ModelDims, ModelParams};
use crate::util::fnv1a64;

const MAGIC: &[u8; 8] = b"DGGMCKPT";
const VERSION: u32 = 1;
const FLAG_MOMENTS: u8 = 0b0000_0001;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checksum mismatch: file is corrupt or truncated")]
    BadChecksum,
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("inconsistent dimensions in checkpoint")]
    BadDims,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A loaded checkpoint: parameters plus optional optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub moments: Option<AdamState>,
}

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn encode(params: &ModelParams, moments: Option<&AdamState>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(25 + params.len() * 8 * 3);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.dims.transient as u32).to_le_bytes());
    buf.extend_from_slice(&(params.dims.latent as u32).to_le_bytes());
    buf.extend_from_slice(&(params.dims.edge_latent as u32).to_le_bytes());
    buf.push(if moments.is_some() { FLAG_MOMENTS } else { 0 });
    push_f64s(&mut buf, params.data());
    if let Some(state) = moments {
        buf.extend_from_slice(&state.t.to_le_bytes());
        push_f64s(&mut buf, &state.m);
        push_f64s(&mut buf, &state.v);
    }
    let checksum = fnv1a64(&buf);
    buf.extend_from_slice(&checksum.to_le_bytes());
    buf
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    moments: Option<&AdamState>,
) -> Result<(), CheckpointError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode(params, moments))?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated);
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>, CheckpointError> {
        let bytes = self.take(count * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < MAGIC.len() + 8 {
        return Err(CheckpointError::Truncated);
    }
    let (body, tail) = buf.split_at(buf.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if fnv1a64(body) != stored {
        return Err(CheckpointError::BadChecksum);
    }
    let mut cur = Cursor { buf: body, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let dims = ModelDims {
        transient: cur.u32()? as usize,
        latent: cur.u32()? as usize,
        edge_latent: cur.u32()? as usize,
    };
    let flags = cur.take(1)?[0];
    let total = super::model::param_count(&dims);
    let data = cur.f64s(total)?;
    let params = ModelParams::from_data(dims, data).map_err(|_| CheckpointError::BadDims)?;
    let moments = if flags & FLAG_MOMENTS != 0 {
        let t = cur.u64()?;
        let m = cur.f64s(total)?;
        let v = cur.f64s(total)?;
        Some(AdamState { m, v, t })
    } else {
        None
    };
    if cur.pos != body.len() {
        return Err(CheckpointError::Truncated);
    }
    Ok(Checkpoint { params, moments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        ModelDims {
            transient: 3,
            latent: 5,
            edge_latent: 2,
        }
    }

    #[test]
    fn round_trip_without_moments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = ModelParams::init(dims(), 7);
        save_checkpoint(&path, &params, None).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.params, params);
        assert!(loaded.moments.is_none());
    }

    #[test]
    fn round_trip_with_moments_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = ModelParams::init(dims(), 8);
        let mut state = AdamState::new(params.len());
        state.t = 41;
        for (i, slot) in state.m.iter_mut().enumerate() {
            *slot = (i as f64).sin();
        }
        save_checkpoint(&path, &params, Some(&state)).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.params, params);
        assert_eq!(loaded.moments.unwrap(), state);

        // identical save is byte-identical
        let again = dir.path().join("model2.ckpt");
        save_checkpoint(&again, &params, Some(&state)).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&again).unwrap()
        );
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = ModelParams::init(dims(), 9);
        save_checkpoint(&path, &params, None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::BadChecksum)
        ));

        std::fs::write(&path, b"JUNKFILE").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::Truncated)
        ));
    }
}
