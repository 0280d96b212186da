//! Equilibrium training by recurrent backpropagation.

mod init;
mod loss;
mod madam;
mod schedule;
mod trainer;
pub mod vjp;

pub use init::{xavier_bound, xavier_init, BIAS_STD};
pub use loss::mse_loss;
pub use madam::{madam_step, MadamConfig, OptimizerState};
pub use schedule::lr_schedule;
pub use vjp::{
    adjoint_picard, batch_param_grads, deq_vjp, recurrent_backprop, recurrent_backprop_cotangents, BackpropConfig,
    LayerCotangents, Linearization,
};
pub use trainer::{argmax, evaluate, train, write_train_log, EvalReport, LogRow, TrainConfig};
