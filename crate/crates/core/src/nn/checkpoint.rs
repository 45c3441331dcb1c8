use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetError, Network, NetworkConfig};
use crate::dataset::NormStats;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const PARAMS_FILE: &str = "params.bin";
const META_FILE: &str = "meta.json";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    format_version: u32,
    config: NetworkConfig,
    num_params: usize,
    /// Statistics the network's inputs were normalized with.
    #[serde(default)]
    input_norm: Option<NormStats>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> NetError + '_ {
    move |source| NetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write `meta.json` and `params.bin` (little-endian f64, layer order).
pub fn save_checkpoint(net: &Network, input_norm: Option<&NormStats>, dir: impl AsRef<Path>) -> Result<(), NetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_VERSION,
        config: net.config().clone(),
        num_params: net.num_params(),
        input_norm: input_norm.copied(),
    };
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_string_pretty(&meta).expect("checkpoint meta serializes");
    fs::write(&meta_path, json + "\n").map_err(io_err(&meta_path))?;
    let bytes: Vec<u8> = net.params().iter().flat_map(|v| v.to_le_bytes()).collect();
    let params_path = dir.join(PARAMS_FILE);
    fs::write(&params_path, bytes).map_err(io_err(&params_path))
}

/// Network plus the input normalization stored with it.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(Network, Option<NormStats>), NetError> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: CheckpointMeta =
        serde_json::from_str(&text).map_err(|e| NetError::MalformedCheckpoint(format!("{}: {e}", meta_path.display())))?;
    if meta.format_version != CHECKPOINT_VERSION {
        return Err(NetError::MalformedCheckpoint(format!(
            "unsupported format_version {}",
            meta.format_version
        )));
    }
    let mut net = Network::new(meta.config)?;
    if meta.num_params != net.num_params() {
        return Err(NetError::MalformedCheckpoint(format!(
            "meta declares {} parameters, config implies {}",
            meta.num_params,
            net.num_params()
        )));
    }
    let params_path = dir.join(PARAMS_FILE);
    let bytes = fs::read(&params_path).map_err(io_err(&params_path))?;
    if bytes.len() != net.num_params() * 8 {
        return Err(NetError::ShapeMismatch {
            what: "params.bin bytes",
            expected: net.num_params() * 8,
            actual: bytes.len(),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    net.set_params(&values)?;
    Ok((net, meta.input_norm))
}
