//! Dense feed-forward networks with exact reverse-mode gradients.

mod adam;
mod checkpoint;
mod matrix;
mod net;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use matrix::Matrix;
pub use net::{sigmoid, soft_update, softmax_in_place, DenseNet, ForwardCache, Gradients, OutputHead};
