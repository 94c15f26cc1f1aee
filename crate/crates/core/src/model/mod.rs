//! Learned traversability regressor: network, training loop, checkpoints
//! and a finite-difference gradient check.

mod checkpoint;
mod config;
mod gradcheck;
mod network;
mod train;

pub use checkpoint::{CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{LayerGroup, ModelConfig};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use network::{InputShape, Network, Normalization, ParamLayout, TensorInfo};
pub use train::{
    batch_gradient, evaluate_mse, input_shape, mse_loss, predict_sequences, train, Adam, EpochLoss, LossCurve,
    TrainData, TrainOutcome,
};
