//! Self-describing checkpoint files: one human-readable JSON header
//! line (dims, seed, transform, scaler, tensor shapes in declared
//! order) followed by the raw tensor payload, row-major little-endian
//! 64-bit floats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Scaler, TargetTransform};
use crate::error::{Error, Result};
use crate::lafee::{LaFeeDims, LaFeeParams};
use crate::lstm::{LstmDims, LstmParams};
use crate::train::{TensorSet, TensorView};

pub const CHECKPOINT_FORMAT: &str = "feelings-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub model: String,
    pub seed: u64,
    pub transform: TargetTransform,
    pub dims: serde_json::Value,
    #[serde(default)]
    pub scaler: Option<Scaler>,
    pub tensors: Vec<TensorSpec>,
}

fn tensor_specs(set: &impl TensorSet) -> Vec<TensorSpec> {
    set.tensors()
        .into_iter()
        .map(|(name, view)| match view {
            TensorView::Mat(m) => {
                TensorSpec { name: name.to_string(), rows: m.nrows(), cols: m.ncols() }
            }
            TensorView::Vec(v) => TensorSpec { name: name.to_string(), rows: v.len(), cols: 1 },
            TensorView::Scalar(_) => TensorSpec { name: name.to_string(), rows: 1, cols: 1 },
        })
        .collect()
}

/// Write header + payload for any tensor set.
pub fn save<S: TensorSet, P: AsRef<Path>>(
    path: P,
    model: &str,
    seed: u64,
    transform: TargetTransform,
    dims: serde_json::Value,
    scaler: Option<&Scaler>,
    set: &S,
) -> Result<()> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.to_string(),
        model: model.to_string(),
        seed,
        transform,
        dims,
        scaler: scaler.cloned(),
        tensors: tensor_specs(set),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header)
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    w.write_all(b"\n")?;
    for (_, view) in set.tensors() {
        for i in 0..view.len() {
            w.write_all(&view.get(i).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read the header and the per-tensor payload of a checkpoint.
pub fn load_raw<P: AsRef<Path>>(path: P) -> Result<(CheckpointHeader, Vec<Vec<f64>>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header_line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = r.read(&mut byte)?;
        if n == 0 {
            return Err(Error::Format("checkpoint ended before header terminator".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        header_line.push(byte[0]);
    }
    let header: CheckpointHeader = serde_json::from_slice(&header_line)
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!("unknown checkpoint format `{}`", header.format)));
    }
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for spec in &header.tensors {
        let len = spec.rows * spec.cols;
        let mut buf = vec![0u8; len * 8];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format(format!("checkpoint truncated in tensor `{}`", spec.name)))?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        tensors.push(values);
    }
    Ok((header, tensors))
}

fn fill_from_payload(set: &mut impl TensorSet, header: &CheckpointHeader, payload: &[Vec<f64>]) -> Result<()> {
    let mut views = set.tensors_mut();
    if views.len() != header.tensors.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} tensors, model expects {}",
            header.tensors.len(),
            views.len()
        )));
    }
    for ((spec, values), (name, view)) in header.tensors.iter().zip(payload).zip(views.iter_mut())
    {
        if spec.name != *name || values.len() != view.len() {
            return Err(Error::Format(format!(
                "checkpoint tensor `{}` ({} values) does not match `{}` ({} values)",
                spec.name,
                values.len(),
                name,
                view.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            view.set(i, *v);
        }
    }
    Ok(())
}

pub fn save_lafee<P: AsRef<Path>>(
    path: P,
    params: &LaFeeParams,
    seed: u64,
    transform: TargetTransform,
    scaler: Option<&Scaler>,
) -> Result<()> {
    let dims = serde_json::to_value(params.dims)
        .map_err(|e| Error::Format(format!("dims: {e}")))?;
    save(path, "lafee", seed, transform, dims, scaler, params)
}

pub fn load_lafee<P: AsRef<Path>>(path: P) -> Result<(LaFeeParams, CheckpointHeader)> {
    let (header, payload) = load_raw(path)?;
    if header.model != "lafee" {
        return Err(Error::Format(format!("checkpoint holds a `{}` model", header.model)));
    }
    let dims: LaFeeDims = serde_json::from_value(header.dims.clone())
        .map_err(|e| Error::Format(format!("dims: {e}")))?;
    let mut params = LaFeeParams::zeros(dims);
    fill_from_payload(&mut params, &header, &payload)?;
    Ok((params, header))
}

pub fn save_lstm<P: AsRef<Path>>(
    path: P,
    params: &LstmParams,
    seed: u64,
    transform: TargetTransform,
    scaler: Option<&Scaler>,
) -> Result<()> {
    let dims = serde_json::to_value(params.dims)
        .map_err(|e| Error::Format(format!("dims: {e}")))?;
    save(path, "lstm", seed, transform, dims, scaler, params)
}

pub fn load_lstm<P: AsRef<Path>>(path: P) -> Result<(LstmParams, CheckpointHeader)> {
    let (header, payload) = load_raw(path)?;
    if header.model != "lstm" {
        return Err(Error::Format(format!("checkpoint holds a `{}` model", header.model)));
    }
    let dims: LstmDims = serde_json::from_value(header.dims.clone())
        .map_err(|e| Error::Format(format!("dims: {e}")))?;
    let mut params = LstmParams::zeros(dims);
    fill_from_payload(&mut params, &header, &payload)?;
    Ok((params, header))
}
