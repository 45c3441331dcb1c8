//! Loss assembly, optimizers, the training loop and evaluation metrics.

mod adam;
mod lbfgs;
mod loss;
mod metrics;
mod trainer;
mod weak_form;

use thiserror::Error;

use crate::dataset::DataError;
use crate::nn::NetError;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use lbfgs::{lbfgs_step, Evaluated, LbfgsConfig, LbfgsState, StepReport, FALLBACK_STEP};
pub use loss::{compute_loss, mae, mse, LossBreakdown};
pub use metrics::{evaluate, evaluate_predictions, predict_solutions, Metrics};
pub use trainer::{network_inputs, train, train_with, OptimizerConfig, OptimizerKind, TraceRow, TrainingTrace, TRACE_HEADER};
pub use weak_form::{collocation_derivative, modal_derivative, weak_residual, WeakFormConfig};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid training setup: {0}")]
    Invalid(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite {
        epoch: usize,
        /// Trace up to the last finite epoch.
        trace: Box<TrainingTrace>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TrainError {
    pub fn code(&self) -> &'static str {
        match self {
            TrainError::Shape(_) => "E_SHAPE",
            TrainError::Invalid(_) => "E_ARGUMENT",
            TrainError::Net(_) => "E_NETWORK",
            TrainError::Data(e) => e.code(),
            TrainError::NonFinite { .. } => "E_NONFINITE",
            TrainError::Io { .. } => "E_IO",
        }
    }
}
