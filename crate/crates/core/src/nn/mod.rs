//! From-scratch convolutional network mapping sampled forcings to modal
//! coefficients.

mod checkpoint;
mod layers;
mod network;

use ndarray::{Array, Dimension};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION, PARAMS_FILE};
pub use layers::{activation_forward, conv1d_forward, sigmoid, Activation, ActivationKind, Conv1d, Dense, Flatten};
pub use network::{Layer, Network};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("{what}: expected {expected}, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("backward called without a matching forward pass")]
    NoForwardCache,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
}

/// Trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<D: Dimension> {
    pub value: Array<f64, D>,
    pub grad: Array<f64, D>,
}

impl<D: Dimension> Parameter<D> {
    pub fn zeros(shape: D) -> Self {
        Parameter {
            value: Array::zeros(shape.clone()),
            grad: Array::zeros(shape),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// Convolutions and a dense head with no activations.
    Linear,
    /// ReLU blocks
    NetA,
    /// sigmoid blocks
    NetB,
    /// Swish blocks
    NetC,
}

impl Arch {
    pub fn activation(self) -> Option<ActivationKind> {
        match self {
            Arch::Linear => None,
            Arch::NetA => Some(ActivationKind::Relu),
            Arch::NetB => Some(ActivationKind::Sigmoid),
            Arch::NetC => Some(ActivationKind::Swish),
        }
    }
}

fn default_filters() -> usize {
    32
}

fn default_kernel() -> usize {
    5
}

fn default_stride() -> usize {
    1
}

fn default_padding() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub arch: Arch,
    #[serde(default)]
    pub blocks: usize,
    #[serde(default = "default_filters")]
    pub filters: usize,
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_padding")]
    pub padding: usize,
    pub input_len: usize,
    pub output_len: usize,
    #[serde(default)]
    pub init_seed: u64,
}

impl NetworkConfig {
    /// Config with the standard layer hyperparameters (32 filters, kernel 5,
    /// stride 1, padding 2).
    pub fn new(arch: Arch, blocks: usize, input_len: usize, output_len: usize, init_seed: u64) -> Self {
        NetworkConfig {
            arch,
            blocks,
            filters: default_filters(),
            kernel_size: default_kernel(),
            stride: default_stride(),
            padding: default_padding(),
            input_len,
            output_len,
            init_seed,
        }
    }

    pub fn with_filters(mut self, filters: usize, kernel_size: usize) -> Self {
        self.filters = filters;
        self.kernel_size = kernel_size;
        self.padding = kernel_size.saturating_sub(1) / 2;
        self
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |msg: String| Err(NetError::InvalidConfig(msg));
        if self.filters == 0 {
            return bad("filters must be at least 1".into());
        }
        if self.kernel_size % 2 == 0 {
            return bad(format!("kernel_size must be odd, got {}", self.kernel_size));
        }
        if self.stride != 1 {
            return bad(format!("only stride 1 is supported, got {}", self.stride));
        }
        if 2 * self.padding + 1 != self.kernel_size {
            return bad(format!(
                "padding {} does not preserve length for kernel {}",
                self.padding, self.kernel_size
            ));
        }
        if self.input_len == 0 || self.output_len == 0 {
            return bad("input_len and output_len must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
