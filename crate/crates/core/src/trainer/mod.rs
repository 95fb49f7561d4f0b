//! Loss assembly, the two-stage training loop, checkpoints and
//! deblurred rendering.

mod config;
mod losses;
mod model;
mod render;
mod step;
mod train;

pub use config::TrainConfig;
pub use losses::{coarse_loss, photometric_grad, photometric_loss, total_loss, tv_sum};
pub use model::{Architecture, Model, SceneGeometry};
pub use render::{evaluate_heldout, render_deblurred, variance_map};
pub use step::{central_rays, shard_loss, shard_loss_and_grad, PixelBatch, ShardLoss, StepOptions};
pub use train::{loss_log_csv, train, train_with, LossRecord, Progress, TrainData};
