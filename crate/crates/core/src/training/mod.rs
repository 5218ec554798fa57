//! Loss, exact gradients, Adam and the training loop.

mod adam;
mod grad;
mod loss;
mod train;

pub use adam::{adam_step, AdamState};
pub use grad::{backward, sample_loss, SampleGradient};
pub use loss::{loss, loss_backward, sos, LossConfig};
pub use train::{
    epoch_order, mean_psnr, train, train_epoch, train_from, EpochRecord, TrainConfig, TrainState,
};
