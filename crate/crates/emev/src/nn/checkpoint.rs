//! Binary model checkpoints.
//!
//! Layout: magic `EMCK`, u16 version, u8 arch tag (0 = emev, 1 = csi),
//! three u32 dims (n_rb, n_r, n_t), u64 parameter count, then the parameter
//! tensors as little-endian f32 in canonical order. Adam moments and the
//! step counter are not persisted; a loaded model restarts its optimizer.

use std::io::{Read as _, Write as _};
use std::path::Path;

use super::model::{Arch, ModelSpec, ModelState};
use super::Scalar;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"EMCK";
const VERSION: u16 = 1;

pub fn save_checkpoint<F: Scalar>(state: &ModelState<F>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(match state.spec.arch {
        Arch::EmevIdNet => 0,
        Arch::CsiIdNet => 1,
    });
    for dim in [state.spec.n_rb, state.spec.n_r, state.spec.n_t] {
        let dim = u32::try_from(dim).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    buf.extend_from_slice(&(state.num_params() as u64).to_le_bytes());
    for slice in state.param_slices() {
        for &x in slice {
            buf.extend_from_slice(&(x.to_f64() as f32).to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    file.sync_all()?;
    Ok(())
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<ModelState<F>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}

/// Parses a checkpoint from raw bytes. Split out so it can be fuzzed.
pub fn decode_checkpoint<F: Scalar>(bytes: &[u8]) -> Result<ModelState<F>> {
    let mut cur = bytes;
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let (head, tail) = cur.split_at(n);
        cur = tail;
        Ok(head)
    };

    if take(4)? != MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let arch = match take(1)?[0] {
        0 => Arch::EmevIdNet,
        1 => Arch::CsiIdNet,
        other => return Err(Error::Format(format!("unknown arch tag {other}"))),
    };
    let mut dim = || -> Result<usize> {
        Ok(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize)
    };
    let (n_rb, n_r, n_t) = (dim()?, dim()?, dim()?);
    if n_rb == 0 || n_r == 0 || n_t == 0 {
        return Err(Error::Format("checkpoint has zero dimension".into()));
    }
    // Cap dims before allocating anything; a fuzzer will happily claim a
    // petabyte model otherwise.
    if n_rb > 4096 || n_r > 1024 || n_t > 4096 {
        return Err(Error::Format("checkpoint dimensions out of range".into()));
    }
    let spec = ModelSpec::new(arch, n_rb, n_r, n_t);
    let declared = u64::from_le_bytes(take(8)?.try_into().unwrap());

    let mut state = ModelState::<F>::init(spec, 0);
    let expected = state.num_params() as u64;
    if declared != expected {
        return Err(Error::Format(format!(
            "checkpoint declares {declared} params, architecture needs {expected}"
        )));
    }
    for slice in state.param_slices_mut() {
        for x in slice.iter_mut() {
            let raw = f32::from_le_bytes(take(4)?.try_into().unwrap());
            if !raw.is_finite() {
                return Err(Error::Format("non-finite parameter in checkpoint".into()));
            }
            *x = F::from_f64(raw as f64);
        }
    }
    if !cur.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after payload", cur.len())));
    }
    // Fresh optimizer state.
    state.adam_m = state.param_slices().iter().map(|p| vec![F::zero(); p.len()]).collect();
    state.adam_v = state.adam_m.clone();
    state.step = 0;
    Ok(state)
}
