//! Small reverse-mode differentiation engine: dense and 3×3 same-padded conv
//! layers, mse / binary cross-entropy losses, SGD and Adam.

mod format;
pub mod gradcheck;
mod network;
mod optim;
mod spec;
mod tensor;

pub use format::{NamedArrays, MAGIC as PARAMS_MAGIC};
pub use network::{Network, Trace};
pub use optim::{gradients, train, Loss, Optimizer, OptimizerState, TrainConfig, Trained};
pub use spec::{sigmoid, Activation, LayerSpec, NetworkSpec};
pub use tensor::Tensor;
