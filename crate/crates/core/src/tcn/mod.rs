//! From-scratch temporal convolutional network: tensors, layers,
//! loss, optimizer, and the assembled estimation stack.

pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tensor;

pub use layers::{BN_EPS, BN_MOMENTUM};
pub use loss::masked_mse;
pub use model::{build_model, Model, ModelConfig, Precision};
pub use optim::{adam_update, AdamState};
pub use tensor::{Elem, Tensor3};
