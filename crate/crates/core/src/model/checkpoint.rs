//! Binary checkpoint: `"CPTX"`, a `u16` version, the seven `u32` config
//! fields (`d_model, n_head, n_layers, d_ff, n_p, n_f, input_dim`), then every
//! weight tensor in declaration order as little-endian `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::config::ModelConfig;
use super::params::Weights;
use super::transformer::ModelParams;
use crate::error::{Error, Result};
use crate::fsio::write_atomically;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CPTX";
pub const CHECKPOINT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 7 * 4;

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let c = &params.config;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.weights.num_parameters());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [c.d_model, c.n_head, c.n_layers, c.d_ff, c.n_p, c.n_f, c.input_dim] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for t in params.weights.leaves() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<ModelParams> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, "file shorter than the checkpoint header"));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format(path, format!("bad magic {:?}", &bytes[..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            path,
            format!("checkpoint version {version}, this build reads {CHECKPOINT_VERSION}"),
        ));
    }
    let field = |i: usize| {
        let o = 6 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize
    };
    let config = ModelConfig {
        d_model: field(0),
        n_head: field(1),
        n_layers: field(2),
        d_ff: field(3),
        n_p: field(4),
        n_f: field(5),
        input_dim: field(6),
    };
    config
        .validate()
        .map_err(|e| Error::format(path, format!("stored config is invalid: {e}")))?;
    let mut weights = Weights::zeros(&config);
    let expected = HEADER_LEN + 8 * weights.num_parameters();
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "{} bytes but config {config:?} needs {expected}",
                bytes.len()
            ),
        ));
    }
    let mut chunks = bytes[HEADER_LEN..].chunks_exact(8);
    for t in weights.leaves_mut() {
        for v in t.data_mut() {
            let c = chunks.next().expect("length checked above");
            *v = f64::from_le_bytes(c.try_into().expect("8 bytes"));
        }
    }
    Ok(ModelParams { config, weights })
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(params);
    write_atomically(path, |w| w.write_all(&bytes))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
