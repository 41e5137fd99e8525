//! The assembled network: attention blocks under residual connections, a
//! shallow feature conv, a pixelshuffle reconstruction head, and the
//! parameter/FLOP analyzer.

mod block;
mod config;
mod cost;
mod params;
#[allow(clippy::module_inception)]
mod tcsr;

pub use block::{BlockGrads, NatBlock};
pub use config::ModelConfig;
pub use cost::{
    conv_param_count, estimate_flops, estimate_params, model_cost, CostReport, CostRow, ModuleKind,
};
pub use params::ParamStore;
pub use tcsr::{GradTape, ModelGrads, Tcsr};
