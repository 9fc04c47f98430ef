//! Dense ReLU classifier with hand-written backpropagation, the attack and
//! training losses, SGD training and the text checkpoint format.

mod checkpoint;
mod dataset;
mod loss;
mod mlp;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use dataset::LabeledDataset;
pub use loss::{ce_loss, ce_loss_grad, cw_loss, cw_loss_grad, softmax, LossKind, DEFAULT_KAPPA};
pub use mlp::{ForwardCache, MlpModel};
pub use train::{accuracy, train_natural, TrainConfig, TrainReport};
