//! From-scratch numerical core: matrix ops, LSTM cell, bidirectional wiring,
//! backpropagation through time, SGD training and checkpointing.

pub mod blstm;
pub mod checkpoint;
pub mod linalg;
pub mod lstm;
pub mod train;

pub use blstm::{mse_loss, BlstmConfig, BlstmGradients, BlstmModel};
pub use checkpoint::Checkpoint;
pub use linalg::{xavier_init, Matrix};
pub use lstm::LstmCellParams;
pub use train::{dataset_mse, sgd_step, train, EpochStats, TrainConfig, TrainOutcome};
