//! Versioned binary checkpoint format.
//!
//! Layout: an 8-byte magic, u32 format version, u64 header length, a JSON
//! header (dimensions, activation tag, schedule parameters, training config,
//! and a named-tensor manifest with shapes and element offsets), then the
//! flat parameter payload as little-endian f64 in column-major order.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::denoiser::{Activation, Denoiser, ModelDims};
use crate::schedule::{NoiseSchedule, ScheduleConfig};
use crate::training::TrainConfig;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"FPGCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Offset into the payload, in f64 elements.
    pub offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub dims: ModelDims,
    pub activation: Activation,
    pub schedule: ScheduleConfig,
    pub seed: u64,
    pub train_config: Option<TrainConfig>,
    pub tensors: Vec<TensorEntry>,
}

pub struct LoadedCheckpoint {
    pub model: Denoiser,
    pub schedule: NoiseSchedule,
    pub header: CheckpointHeader,
}

pub fn checkpoint_bytes(
    model: &Denoiser,
    schedule: &ScheduleConfig,
    seed: u64,
    train_config: Option<&TrainConfig>,
) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut payload: Vec<f64> = Vec::new();
    for (name, data, rows, cols) in model.tensors() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            rows,
            cols,
            offset: payload.len(),
        });
        payload.extend_from_slice(&data);
    }
    let header = CheckpointHeader {
        format_version: VERSION,
        dims: *model.dims(),
        activation: model.activation(),
        schedule: schedule.clone(),
        seed,
        train_config: train_config.cloned(),
        tensors,
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(24 + header_json.len() + payload.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn save_checkpoint(
    path: &Path,
    model: &Denoiser,
    schedule: &ScheduleConfig,
    seed: u64,
    train_config: Option<&TrainConfig>,
) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(model, schedule, seed, train_config)?)?;
    Ok(())
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<LoadedCheckpoint> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() < 20 + header_len {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[20..20 + header_len])?;
    let payload = &bytes[20 + header_len..];
    if payload.len() % 8 != 0 {
        return Err(Error::Checkpoint("payload not a multiple of 8 bytes".into()));
    }
    let floats: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let fetch = |name: &str| -> Result<(usize, usize, &[f64])> {
        let entry = header
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        let len = entry.rows * entry.cols;
        if entry.offset + len > floats.len() {
            return Err(Error::Checkpoint(format!("tensor {name} out of bounds")));
        }
        Ok((entry.rows, entry.cols, &floats[entry.offset..entry.offset + len]))
    };
    let mat = |name: &str| -> Result<DMatrix<f64>> {
        let (r, c, data) = fetch(name)?;
        Ok(DMatrix::from_column_slice(r, c, data))
    };
    let vec = |name: &str| -> Result<DVector<f64>> {
        let (r, c, data) = fetch(name)?;
        if c != 1 {
            return Err(Error::Checkpoint(format!("tensor {name} is not a vector")));
        }
        Ok(DVector::from_column_slice_generic(
            nalgebra::Dyn(r),
            nalgebra::U1,
            data,
        ))
    };

    let model = Denoiser::from_parts(
        header.dims,
        header.activation,
        mat("w1")?,
        vec("b1")?,
        mat("w2")?,
        vec("b2")?,
        mat("w3")?,
        vec("b3")?,
        mat("head_w")?,
        vec("head_b")?,
    )?;
    let schedule = header.schedule.build()?;
    Ok(LoadedCheckpoint {
        model,
        schedule,
        header,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}
