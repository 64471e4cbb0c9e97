//! Dense single-hidden-layer networks: forward/backward passes, losses,
//! optimisation and persistence.

mod adam;
mod autoencoder;
mod checkpoint;
mod corrupt;
mod layer;
mod loss;
mod mlp;
mod schedule;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState, LayerAdam};
pub use autoencoder::{AeGrads, Autoencoder};
pub use checkpoint::{Checkpoint, NamedArray, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use corrupt::{corrupt_input, dropout_mask};
pub use layer::{backprop_dense, dense_forward, Activation, DenseLayer, HiddenBatch, LayerGrads};
pub use loss::{mse_loss_grad, softmax_ce_loss_grad, softmax_rows};
pub use mlp::{DropoutMasks, Mlp, MlpGrads, ObjectiveParts};
pub use schedule::{plateau_schedule, PlateauScheduler};
pub use train::{train_autoencoder, train_mlp, EpochStats, TrainConfig, Trained};
