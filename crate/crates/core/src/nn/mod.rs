//! Minimal dense-tensor engine and the residual-network family built on it.
//!
//! Everything is hand-rolled: convolution, pooling, batch statistics, the
//! classifier head, reverse-mode gradients, and Adam. Kernels are generic
//! over `f32` (training) and `f64` (gradient-check mode). Batched tensors
//! are `[N, H, W, C]` row-major.

pub mod adam;
pub mod checkpoint;
pub mod model;
pub mod ops;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamParams, AdamState};
pub use model::{Depth, ForwardTrace, MicroSpec, ResNetConfig, ResNetModel};
pub use ops::{avgpool_global, conv2d, maxpool, relu};
pub use tensor::{Scalar, Tensor};
pub use train::{
    ensemble_predict, train, Dataset, EpochStats, TrainHistory, TrainParams,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite activation in {layer}")]
    NonFinite { layer: String },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("blob: {0}")]
    Blob(#[from] crate::io::BlobError),
    #[error("chart: {0}")]
    Chart(#[from] crate::chart::ChartError),
}
