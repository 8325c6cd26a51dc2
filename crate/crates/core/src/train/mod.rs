//! Loss, gradients, optimisation, checkpoints and the gradient oracle.

mod adam;
mod checkpoint;
mod config;
mod gradcheck;
mod loss;
mod trainer;

pub use adam::Adam;
pub use checkpoint::{decode, encode, inspect, load_checkpoint, peek_checkpoint, save_checkpoint, CheckpointInfo};
pub use config::TrainConfig;
pub use gradcheck::{
    grad_check, grad_check_report, grad_check_with, grad_check_with_difference, gradcheck_fixture, loss_difference,
    GradCheckReport, TensorCheck,
};
pub use loss::{loss, loss_and_grad};
pub use trainer::{fit, train, train_with_observer, EpochRecord, HgfndTask, Task, TrainReport};
