//! Sliding-window neighborhood attention for lightweight single-image
//! super-resolution, as a self-verifying numerical library.
//!
//! The crate provides:
//!
//! - a minimal dense tensor core (`f32` by default, `f64` for verification),
//! - the neighborhood attention operator with hand-written gradients,
//! - the spatial-shift feed-forward network and standard layers around it,
//! - the full TCSR network with a parameter/FLOP cost analyzer,
//! - a desk-scale training loop (L1 loss + Adam), bicubic degradation, and
//!   Y-channel PSNR/SSIM evaluation,
//! - independent oracles (finite differences, dense attention, direct
//!   convolution) wired into a `gradcheck` command.
//!
//! Start with the runnable programs under `examples/`; the `tcsr` binary
//! exposes the same functionality as `train`, `eval`, `infer`, `analyze`
//! and `gradcheck` subcommands.

pub mod cli;
mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod na;
pub mod nn;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
