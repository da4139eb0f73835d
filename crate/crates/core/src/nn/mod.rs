//! Dense ReLU network engine: initialization, forward pass, loss,
//! backpropagation, SGD and checkpoints.

mod checkpoint;
mod gradcheck;
mod model;
mod ops;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use gradcheck::{
    gradient_check, gradient_check_against, numeric_gradient, relative_error, relu_margin,
};
pub use model::{init_model, ArchSpec, Dense, InitSnapshot, ModelState};
pub use ops::{
    argmax_row, average_loss, cross_entropy_row, forward, loss_and_gradients, loss_from_logits,
    Gradients,
};
pub use train::{apply_step, epoch_order, sgd_epoch, train, TrainConfig};
