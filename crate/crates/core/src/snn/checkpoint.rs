//! Weight checkpoints: a flat little-endian `f32` blob plus a JSON sidecar
//! listing the tensors in storage order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::network::{Network, ParamBlock};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub total: usize,
    pub tensors: Vec<ParamBlock>,
}

pub const FORMAT: &str = "f32-le";

pub fn encode_weights(params: &[f64]) -> Vec<u8> {
    params
        .iter()
        .flat_map(|&x| (x as f32).to_le_bytes())
        .collect()
}

pub fn decode_weights(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::Schema(format!(
            "weight blob of {} bytes is not a whole number of f32 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Writes `<stem>.bin` and `<stem>.json`.
pub fn save(net: &Network, bin_path: &Path, json_path: &Path) -> Result<()> {
    let meta = CheckpointMeta {
        format: FORMAT.into(),
        total: net.params().len(),
        tensors: net.blocks().to_vec(),
    };
    std::fs::write(bin_path, encode_weights(net.params())).map_err(|e| Error::file(bin_path, e))?;
    std::fs::write(json_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::file(json_path, e))?;
    Ok(())
}

/// Loads weights into a network of the same architecture.
pub fn load_into(net: &mut Network, bin_path: &Path, json_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(json_path).map_err(|e| Error::file(json_path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    if meta.format != FORMAT || meta.tensors != net.blocks() {
        return Err(Error::Schema("checkpoint layout does not match the network".into()));
    }
    let bytes = std::fs::read(bin_path).map_err(|e| Error::file(bin_path, e))?;
    let values = decode_weights(&bytes)?;
    if values.len() != meta.total || values.len() != net.params().len() {
        return Err(Error::Schema(format!(
            "checkpoint holds {} values, network has {}",
            values.len(),
            net.params().len()
        )));
    }
    net.params_mut().copy_from_slice(&values);
    Ok(())
}
