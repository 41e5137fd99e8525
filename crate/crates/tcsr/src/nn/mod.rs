//! Network building blocks: 3x3 same-padding convolution, per-pixel linear
//! layers, layer normalization, GELU, pixelshuffle and the spatial-shift
//! feed-forward network. Every operation ships a hand-written backward pass
//! checked against central finite differences.

mod act;
mod conv;
mod effn;
mod linear;
mod norm;
mod shift;
mod shuffle;

pub use act::{gelu, gelu_backward, gelu_fwd, gelu_bwd_cached};
pub use conv::{conv2d_same, conv2d_same_backward, ConvGrads, ConvParams};
pub use effn::{effn_backward, effn_forward, effn_fwd_cached, EffnCache, EffnGrads, EffnParams};
pub use linear::{linear, linear_backward};
pub use norm::{layernorm, layernorm_backward, layernorm_fwd, LayerNorm, LnCache};
pub use shift::{spatial_shift, spatial_shift_backward, ShiftSpec};
pub use shuffle::{pixelshuffle, pixelunshuffle};
