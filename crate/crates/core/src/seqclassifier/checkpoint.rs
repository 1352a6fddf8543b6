//! Checkpoint layout: one line of compact JSON (the header), a newline,
//! then every parameter block as little-endian `f32` in header order.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::NetworkParams;
use super::train::TrainConfig;
use super::SeqError;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_ARCH: &str = "gru2-dense2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub schema_version: u32,
    pub arch: String,
    pub input_dim: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    pub config: TrainConfig,
    pub blocks: Vec<BlockInfo>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: NetworkParams,
}

fn bad(msg: impl Into<String>) -> SeqError {
    SeqError::Checkpoint(msg.into())
}

pub fn encode(params: &NetworkParams, config: &TrainConfig) -> Vec<u8> {
    let mut config = config.clone();
    config.arch = params.architecture();
    let header = CheckpointHeader {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        arch: CHECKPOINT_ARCH.into(),
        input_dim: params.input_dim(),
        dropout_rate: params.dropout_rate,
        seed: config.seed,
        config,
        blocks: params
            .block_layout()
            .into_iter()
            .map(|(name, shape)| BlockInfo { name, shape })
            .collect(),
    };
    let mut out = serde_json::to_vec(&header).expect("header is plain data");
    out.push(b'\n');
    for block in params.blocks() {
        for v in block {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, SeqError> {
    let mut reader = BufReader::new(bytes);
    let mut line = Vec::new();
    reader
        .read_until(b'\n', &mut line)
        .map_err(|e| bad(e.to_string()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&line).map_err(|e| bad(format!("header: {e}")))?;
    if header.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(bad(format!(
            "schema version {} not supported (expected {CHECKPOINT_SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    if header.arch != CHECKPOINT_ARCH {
        return Err(bad(format!("unknown architecture {:?}", header.arch)));
    }
    let mut arch = header.config.arch;
    arch.dropout_rate = header.dropout_rate;
    let mut params = NetworkParams::zeros(header.input_dim, &arch);
    let expected = params.block_layout();
    let declared: Vec<(String, Vec<usize>)> =
        header.blocks.iter().map(|b| (b.name.clone(), b.shape.clone())).collect();
    if declared != expected {
        return Err(bad("block layout does not match the declared architecture"));
    }

    let mut body = Vec::new();
    reader.read_to_end(&mut body).map_err(|e| bad(e.to_string()))?;
    let total = params.parameter_count();
    if body.len() != total * 4 {
        return Err(bad(format!("expected {} parameter bytes, found {}", total * 4, body.len())));
    }
    let mut values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    for block in params.blocks_mut() {
        for v in block.iter_mut() {
            *v = values.next().expect("length checked above");
        }
    }
    if !params.is_finite() {
        return Err(bad("non-finite parameter"));
    }
    Ok(Checkpoint { header, params })
}

pub fn save(path: &Path, params: &NetworkParams, config: &TrainConfig) -> Result<(), SeqError> {
    crate::tensor_file::write_atomic(path, &encode(params, config)).map_err(|e| bad(e.to_string()))
}

pub fn load(path: &Path) -> Result<Checkpoint, SeqError> {
    let bytes = fs::read(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}

/// Rounds every parameter through `f32`, the precision checkpoints store.
pub fn quantize(params: &NetworkParams) -> NetworkParams {
    let mut out = params.clone();
    for block in out.blocks_mut() {
        block.iter_mut().for_each(|v| *v = *v as f32 as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::seqclassifier::network::Architecture;

    fn net() -> (NetworkParams, TrainConfig) {
        let cfg = TrainConfig {
            seed: 42,
            ..TrainConfig::default()
        };
        (NetworkParams::init(8, &cfg.arch, &mut rng_from_seed(1)), cfg)
    }

    #[test]
    fn round_trip_is_f32_exact() {
        let (p, cfg) = net();
        let bytes = encode(&p, &cfg);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.params, quantize(&p));
        assert_eq!(back.header.seed, 42);
        assert_eq!(back.header.blocks.len(), 22);
        assert_eq!(encode(&back.params, &cfg), bytes);
    }

    #[test]
    fn header_is_first_line() {
        let (p, cfg) = net();
        let bytes = encode(&p, &cfg);
        let nl = bytes.iter().position(|b| *b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(header["schema_version"], 1);
        assert_eq!(header["blocks"][0]["name"], "gru1.w_z");
        assert_eq!(header["blocks"][0]["shape"], serde_json::json!([8, 16]));
        assert_eq!(bytes.len() - nl - 1, p.parameter_count() * 4);
        // first stored float is gru1.w_z[0][0]
        let first = f32::from_le_bytes(bytes[nl + 1..nl + 5].try_into().unwrap());
        assert_eq!(first, p.gru1.w_z.get(0, 0) as f32);
    }

    #[test]
    fn rejects_corruption() {
        let (p, cfg) = net();
        let bytes = encode(&p, &cfg);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let text = String::from_utf8_lossy(&bytes).replace("\"schema_version\":1", "\"schema_version\":9");
        assert!(decode(text.as_bytes()).is_err());
        let other = NetworkParams::zeros(8, &Architecture { hidden1: 4, ..Architecture::default() });
        let mut mixed = encode(&p, &cfg);
        let nl = mixed.iter().position(|b| *b == b'\n').unwrap();
        mixed.truncate(nl + 1);
        mixed.extend(&encode(&other, &cfg)[encode(&other, &cfg).iter().position(|b| *b == b'\n').unwrap() + 1..]);
        assert!(decode(&mixed).is_err());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (p, cfg) = net();
        save(&path, &p, &cfg).unwrap();
        assert_eq!(load(&path).unwrap().params, quantize(&p));
    }
}
