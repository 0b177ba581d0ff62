use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MergeError {
    #[error("tensor {name}: shape {got:?} does not match {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("tensor name sets differ: {0}")]
    NameMismatch(String),
    #[error("density {0} is outside (0, 1]")]
    DensityOutOfRange(f64),
    #[error("{got} weights supplied for {expected} delta sources")]
    WeightCountMismatch { expected: usize, got: usize },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLengthMismatch { len: usize, shape: Vec<usize> },
}

/// A named dense tensor: 32-bit floats, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, MergeError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(MergeError::DataLengthMismatch {
                len: data.len(),
                shape,
            });
        }
        Ok(Self { shape, data })
    }

    /// 1-D convenience constructor.
    pub fn vector(data: Vec<f32>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// A named collection of tensors (model parameters).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    /// Check this checkpoint has exactly the names and shapes of `other`.
    pub fn check_compatible(&self, other: &Checkpoint) -> Result<(), MergeError> {
        let ours: Vec<&String> = self.tensors.keys().collect();
        let theirs: Vec<&String> = other.tensors.keys().collect();
        if ours != theirs {
            return Err(MergeError::NameMismatch(format!(
                "{ours:?} vs {theirs:?}"
            )));
        }
        for (name, tensor) in &self.tensors {
            let peer = &other.tensors[name];
            if tensor.shape != peer.shape {
                return Err(MergeError::ShapeMismatch {
                    name: name.clone(),
                    expected: tensor.shape.clone(),
                    got: peer.shape.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Per-source delta tensors; same schema as a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSet {
    pub source_index: usize,
    pub tensors: BTreeMap<String, Tensor>,
}
