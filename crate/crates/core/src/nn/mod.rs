//! Small reverse-mode autodiff engine and the feed-forward pieces built on it.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod sgd;
pub mod tensor;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{log_sum_exp, Gradients, Graph, NodeId, ParamId, ParamStore};
pub use layers::{Activation, Dense, Mlp};
pub use sgd::{sgd_step, Direction, SgdConfig};
pub use tensor::Tensor2;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("loss must be 1x1, got {0:?}")]
    NotScalarLoss((usize, usize)),

    #[error("input contains non-finite values")]
    NonFiniteInput,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("learning rate must be positive, got {0}")]
    InvalidLearningRate(f64),

    #[error("weight decay must be non-negative, got {0}")]
    InvalidWeightDecay(f64),

    #[error("finite-difference step {0} outside [1e-7, 1e-3]")]
    InvalidStep(f64),

    #[error("checkpoint parameter {name} has shape {found:?}, expected {expected:?}")]
    CheckpointShape {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("checkpoint is missing parameter {0}")]
    CheckpointMissing(String),

    #[error("checkpoint has unknown parameter {0}")]
    CheckpointUnknown(String),

    #[error("checkpoint parameter {0} has {1} values for its declared shape")]
    CheckpointLength(String, usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
