//! Desk-scale training: Adam on mean-absolute-error over randomly sampled,
//! bicubically degraded patches, plus Y-channel evaluation against a
//! bicubic baseline.

mod adam;
mod data;
mod eval;
mod loss;
mod synth;
mod trainer;

pub use adam::{adam_step, adam_update, AdamState};
pub use data::PatchSampler;
pub use eval::{evaluate_bicubic, evaluate_model, evaluate_pair, modcrop, EvalResult, EvalRow};
pub use loss::{l1_loss, l1_loss_grad};
pub use synth::synthetic_rgb_image;
pub use trainer::{train, LossPoint, TrainConfig, TrainReport};
