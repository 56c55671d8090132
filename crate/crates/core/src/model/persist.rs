//! Model files: `FCNA` magic, u32 version, u32 header length, a UTF-8 JSON
//! header, the tensors as little-endian `f32` in manifest order, then a
//! CRC32 of every preceding byte. All integers are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FcnConfig, FcnModel, FcnParams, ModelError, PARAM_NAMES};
use crate::dsp::FeatureConfig;
use crate::nn::{AdamConfig, AdamState, Tensor};

pub const MODEL_MAGIC: &[u8; 4] = b"FCNA";
pub const MODEL_VERSION: u32 = 1;
const PREAMBLE_LEN: usize = 12;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset from the start of the tensor payload.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct OptimizerHeader {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: FcnConfig,
    class_names: Vec<String>,
    tensors: Vec<TensorEntry>,
    optimizer: Option<OptimizerHeader>,
    #[serde(default)]
    features: Option<FeatureConfig>,
}

fn collect_tensors(model: &FcnModel) -> Vec<(String, &Tensor<f32>)> {
    let mut out: Vec<(String, &Tensor<f32>)> = PARAM_NAMES
        .iter()
        .zip(model.params.tensors())
        .map(|(n, t)| (n.to_string(), t))
        .collect();
    if let Some(opt) = &model.optimizer {
        for (slot, moments) in [("m", &opt.m), ("v", &opt.v)] {
            for (n, t) in PARAM_NAMES.iter().zip(moments) {
                out.push((format!("adam.{slot}.{n}"), t));
            }
        }
    }
    out
}

/// Serialises `model` into `sink`.
pub fn save_model<W: Write>(model: &FcnModel, mut sink: W) -> Result<(), ModelError> {
    let tensors = collect_tensors(model);
    let mut offset = 0;
    let entries = tensors
        .iter()
        .map(|(name, t)| {
            let e = TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            };
            offset += 4 * t.len();
            e
        })
        .collect();
    let header = Header {
        config: model.config.clone(),
        class_names: model.class_names.clone(),
        tensors: entries,
        optimizer: model.optimizer.as_ref().map(|o| OptimizerHeader {
            lr: o.config.lr,
            beta1: o.config.beta1,
            beta2: o.config.beta2,
            eps: o.config.eps,
            t: o.t,
        }),
        features: model.features,
    };
    let json = serde_json::to_vec(&header).map_err(|e| ModelError::BadHeader(e.to_string()))?;
    let mut buf = Vec::with_capacity(PREAMBLE_LEN + json.len() + offset + 4);
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for (_, t) in &tensors {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    sink.write_all(&buf)?;
    Ok(())
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses a model written by [`save_model`].
pub fn load_model<R: Read>(mut source: R) -> Result<FcnModel, ModelError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(ModelError::BadMagic);
    }
    if bytes.len() < PREAMBLE_LEN {
        return Err(ModelError::TruncatedPayload("file ends inside the preamble".into()));
    }
    let version = read_u32(&bytes, 4);
    if version != MODEL_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let header_len = read_u32(&bytes, 8) as usize;
    let payload_start = PREAMBLE_LEN + header_len;
    if bytes.len() < payload_start {
        return Err(ModelError::TruncatedPayload("file ends inside the header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE_LEN..payload_start])
        .map_err(|e| ModelError::BadHeader(e.to_string()))?;
    let payload_len: usize = header
        .tensors
        .iter()
        .map(|t| 4 * t.shape.iter().product::<usize>())
        .sum();
    let end = payload_start + payload_len;
    if bytes.len() < end + 4 {
        return Err(ModelError::TruncatedPayload(format!(
            "expected {} bytes, found {}",
            end + 4,
            bytes.len()
        )));
    }
    if bytes.len() > end + 4 {
        return Err(ModelError::BadHeader("trailing bytes after checksum".into()));
    }
    let stored = read_u32(&bytes, end);
    let computed = crc32fast::hash(&bytes[..end]);
    if stored != computed {
        return Err(ModelError::ChecksumMismatch { stored, computed });
    }

    let payload = &bytes[payload_start..end];
    let mut by_name = std::collections::HashMap::new();
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        let raw = payload
            .get(entry.offset..entry.offset + 4 * n)
            .ok_or_else(|| ModelError::BadHeader(format!("{} lies outside the payload", entry.name)))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        by_name.insert(entry.name.as_str(), Tensor::from_vec(&entry.shape, data)?);
    }
    let mut take = |name: &str| {
        by_name
            .remove(name)
            .ok_or_else(|| ModelError::BadHeader(format!("missing tensor {name}")))
    };

    header.config.validate()?;
    if header.class_names.len() != header.config.n_classes {
        return Err(ModelError::BadHeader("class name count does not match n_classes".into()));
    }
    let params = PARAM_NAMES.iter().map(|n| take(n)).collect::<Result<Vec<_>, _>>()?;
    let params = FcnParams::from_tensors(&header.config, params)?;
    let optimizer = match header.optimizer {
        None => None,
        Some(o) => {
            let mut moments = |slot: &str| {
                PARAM_NAMES
                    .iter()
                    .map(|n| take(&format!("adam.{slot}.{n}")))
                    .collect::<Result<Vec<_>, _>>()
            };
            let m = moments("m")?;
            let v = moments("v")?;
            for ((p, m), v) in params.tensors().iter().zip(&m).zip(&v) {
                if p.shape() != m.shape() || p.shape() != v.shape() {
                    return Err(ModelError::BadHeader("optimizer moment shape mismatch".into()));
                }
            }
            Some(AdamState {
                config: AdamConfig {
                    lr: o.lr,
                    beta1: o.beta1,
                    beta2: o.beta2,
                    eps: o.eps,
                },
                t: o.t,
                m,
                v,
            })
        }
    };
    Ok(FcnModel {
        config: header.config,
        params,
        class_names: header.class_names,
        optimizer,
        features: header.features,
    })
}

pub fn save_model_file(model: &FcnModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let file = std::fs::File::create(path)?;
    save_model(model, std::io::BufWriter::new(file))
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<FcnModel, ModelError> {
    load_model(std::io::BufReader::new(std::fs::File::open(path)?))
}
