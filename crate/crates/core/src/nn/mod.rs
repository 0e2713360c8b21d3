//! Minimal deterministic numeric core: tensors, a reverse-mode tape,
//! BiLSTM, dropout, Adam, and checkpoints.

mod adam;
mod checkpoint;
mod grad_check;
mod lstm;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint, TensorEntry, FORMAT_VERSION, MAGIC};
pub use grad_check::{grad_check, GradCheckOptions, GradCheckReport, GradSample};
pub use lstm::{bilstm_forward, BiLstmParams, LstmParams};
pub use params::{init_params, AdamState, Gradients, Init, Param, ParamId, ParamSpec, ParamStore};
pub use tape::{dropout, dropout_mask, Tape, Var, LOG_FLOOR};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("backward already ran on this tape")]
    BackwardTwice,
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidDropout(f64),
    #[error("non-finite gradient {value} at {name}[{index}]")]
    NonFinite { name: String, index: usize, value: f64 },
    #[error("gradient check needs a deterministic objective (disable dropout)")]
    StochasticObjective,
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("duplicate parameter {0}")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
