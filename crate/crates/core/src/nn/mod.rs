//! Dense feedforward networks: initialization, forward/backward passes,
//! training and evaluation metrics.

mod activation;
mod init;
mod kernels;
pub mod metrics;
pub mod network;
mod params;
mod timing;
mod train;

pub use activation::{ActivationKind, SELU_ALPHA, SELU_LAMBDA};
pub use init::{init_params, BiasInit, InitKind, InitStrategy};
pub use metrics::{mse, r_squared, relative_l2, MetricsReport};
pub use network::{forward, gradient, loss, loss_and_gradient, Workspace};
pub use params::{Architecture, Batch, DenseLayer, ParamSet};
pub use timing::{time_activation, TimingRecord};
pub use train::{
    linspace, refit_output_layer, train, BatchMode, Optimizer, SampleSpec, Sampling, TrainConfig, TrainOutcome,
};
