//! Binary model checkpoints.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "DRWSLSTM"
//! 8       1     format version (1)
//! 9       4     input_dim, u32 LE
//! 13      4     hidden_dim, u32 LE
//! 17      8     parameter count, u64 LE
//! 25      8*n   parameters, f64 LE, in `LstmModel::params` order
//! ```

use super::model::{LstmModel, INPUT_DIM};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DRWSLSTM";
pub const CHECKPOINT_VERSION: u8 = 1;
const HEADER_LEN: usize = 25;

pub fn save_checkpoint(model: &LstmModel) -> Vec<u8> {
    let params = model.params();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&(INPUT_DIM as u32).to_le_bytes());
    out.extend_from_slice(&(model.hidden_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<LstmModel> {
    let err = |m: String| Error::Checkpoint(m);
    if bytes.len() < HEADER_LEN {
        return Err(err(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(err("bad magic bytes".into()));
    }
    if bytes[8] != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: bytes[8],
            expected: CHECKPOINT_VERSION,
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let input_dim = u32_at(9);
    let hidden = u32_at(13);
    let count = u64::from_le_bytes(bytes[17..25].try_into().unwrap());
    if input_dim != INPUT_DIM {
        return Err(err(format!("input_dim {input_dim}, expected {INPUT_DIM}")));
    }
    if hidden == 0 || count != LstmModel::param_count(hidden) as u64 {
        return Err(err(format!(
            "parameter count {count} inconsistent with hidden_dim {hidden}"
        )));
    }
    let body = &bytes[HEADER_LEN..];
    let expected = count as usize * 8;
    if body.len() != expected {
        return Err(err(format!(
            "payload is {} bytes, expected {expected}",
            body.len()
        )));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LstmModel::from_params(hidden, params)
}
