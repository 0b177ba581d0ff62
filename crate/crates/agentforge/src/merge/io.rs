//! Binary checkpoint format.
//!
//! Layout: magic `AFCK1\n`, unsigned 64-bit little-endian header length,
//! UTF-8 JSON header mapping tensor name to `{dtype, shape, offset,
//! nbytes}` (offsets relative to the data section), then raw little-endian
//! f32 data. Writes are deterministic: names sorted, data packed in name
//! order without gaps.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tensor::{Checkpoint, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"AFCK1\n";

#[derive(Debug, Error)]
pub enum CheckpointIoError {
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("data section truncated: need {needed} bytes, file has {available}")]
    TruncatedData { needed: usize, available: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    dtype: String,
    shape: Vec<usize>,
    offset: usize,
    nbytes: usize,
}

pub fn write_checkpoint<P: AsRef<Path>>(
    checkpoint: &Checkpoint,
    path: P,
) -> Result<(), CheckpointIoError> {
    let mut header = BTreeMap::new();
    let mut offset = 0usize;
    for (name, tensor) in &checkpoint.tensors {
        let nbytes = tensor.data.len() * 4;
        header.insert(
            name.clone(),
            TensorHeader {
                dtype: "f32".into(),
                shape: tensor.shape.clone(),
                offset,
                nbytes,
            },
        );
        offset += nbytes;
    }
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| CheckpointIoError::CorruptHeader(e.to_string()))?;

    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    for tensor in checkpoint.tensors.values() {
        for value in &tensor.data {
            out.write_all(&value.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<P: AsRef<Path>>(path: P) -> Result<Checkpoint, CheckpointIoError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;

    if bytes.len() < CHECKPOINT_MAGIC.len() + 8 {
        return Err(CheckpointIoError::CorruptHeader("file too short".into()));
    }
    if &bytes[..6] != CHECKPOINT_MAGIC {
        return Err(CheckpointIoError::CorruptHeader("bad magic".into()));
    }
    let header_len = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes")) as usize;
    let header_end = match 14usize.checked_add(header_len) {
        Some(end) => end,
        None => {
            return Err(CheckpointIoError::CorruptHeader(
                "declared header length overflows".into(),
            ))
        }
    };
    if bytes.len() < header_end {
        return Err(CheckpointIoError::CorruptHeader(format!(
            "declared header length {header_len} exceeds file size"
        )));
    }
    // serde_json into a map silently keeps the last duplicate key; parse to
    // Value first to detect duplicates.
    let header_text = std::str::from_utf8(&bytes[14..header_end])
        .map_err(|e| CheckpointIoError::CorruptHeader(e.to_string()))?;
    check_duplicate_keys(header_text)?;
    let header: BTreeMap<String, TensorHeader> = serde_json::from_str(header_text)
        .map_err(|e| CheckpointIoError::CorruptHeader(e.to_string()))?;

    let data = &bytes[header_end..];
    let mut checkpoint = Checkpoint::new();
    for (name, th) in header {
        if th.dtype != "f32" {
            return Err(CheckpointIoError::CorruptHeader(format!(
                "tensor {name:?}: unsupported dtype {:?}",
                th.dtype
            )));
        }
        let expected: usize = th.shape.iter().product::<usize>() * 4;
        if th.nbytes != expected {
            return Err(CheckpointIoError::CorruptHeader(format!(
                "tensor {name:?}: nbytes {} does not match shape {:?}",
                th.nbytes, th.shape
            )));
        }
        let end = th.offset.checked_add(th.nbytes).ok_or_else(|| {
            CheckpointIoError::CorruptHeader(format!("tensor {name:?}: offset overflow"))
        })?;
        if end > data.len() {
            return Err(CheckpointIoError::TruncatedData {
                needed: end,
                available: data.len(),
            });
        }
        let values: Vec<f32> = data[th.offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        checkpoint.insert(
            name,
            Tensor {
                shape: th.shape,
                data: values,
            },
        );
    }
    Ok(checkpoint)
}

fn check_duplicate_keys(header_text: &str) -> Result<(), CheckpointIoError> {
    // Count top-level keys by streaming into a Vec of (key, value) pairs.
    let value: serde_json::Value = serde_json::from_str(header_text)
        .map_err(|e| CheckpointIoError::CorruptHeader(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CheckpointIoError::CorruptHeader("header is not an object".into()))?;
    // serde_json maps collapse duplicates; re-scan raw text for each key.
    for key in obj.keys() {
        let quoted = format!("{}:", serde_json::to_string(key).expect("string"));
        let occurrences = header_text.matches(&quoted).count();
        if occurrences > 1 {
            return Err(CheckpointIoError::CorruptHeader(format!(
                "duplicate tensor name {key:?}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merge::tensor::Tensor;

    fn two_tensor_checkpoint() -> Checkpoint {
        let mut c = Checkpoint::new();
        c.insert("layer.bias", Tensor::vector(vec![0.5, -0.5]));
        c.insert(
            "layer.weight",
            Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
        );
        c
    }

    #[test]
    fn round_trip_equality() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.afck");
        let original = two_tensor_checkpoint();
        write_checkpoint(&original, &path).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), original);
    }

    #[test]
    fn writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.afck");
        let b = dir.path().join("b.afck");
        let ckpt = two_tensor_checkpoint();
        write_checkpoint(&ckpt, &a).unwrap();
        write_checkpoint(&ckpt, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn truncated_data_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.afck");
        write_checkpoint(&two_tensor_checkpoint(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(CheckpointIoError::TruncatedData { .. })
        ));
    }

    #[test]
    fn bad_magic_is_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.afck");
        std::fs::write(&path, b"NOTCK\n\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(CheckpointIoError::CorruptHeader(_))
        ));
    }

    #[test]
    fn oversized_declared_header_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.afck");
        let mut bytes = CHECKPOINT_MAGIC.to_vec();
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(CheckpointIoError::CorruptHeader(_))
        ));
    }

    #[test]
    fn duplicate_tensor_name_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.afck");
        let header = br#"{"w":{"dtype":"f32","shape":[1],"offset":0,"nbytes":4},"w":{"dtype":"f32","shape":[1],"offset":0,"nbytes":4}}"#;
        let mut bytes = CHECKPOINT_MAGIC.to_vec();
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(header);
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        match read_checkpoint(&path) {
            Err(CheckpointIoError::CorruptHeader(msg)) => {
                assert!(msg.contains("duplicate"), "{msg}")
            }
            other => panic!("expected CorruptHeader, got {other:?}"),
        }
    }
}
