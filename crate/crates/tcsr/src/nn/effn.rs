use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::act::{gelu_bwd_cached, gelu_fwd};
use super::linear::{linear, linear_backward};
use super::shift::{spatial_shift, spatial_shift_backward, ShiftSpec};

/// Feed-forward network whose hidden features are spatially shifted between
/// activation and the second projection, so that projection mixes each
/// pixel with its eight neighbors. Same parameter count and FLOPs as a plain
/// two-layer FFN of equal widths.
#[derive(Debug, Clone)]
pub struct EffnParams<T: Scalar> {
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
    pub spec: ShiftSpec,
}

/// Gradients mirroring [`EffnParams`] (the shift has none).
#[derive(Debug, Clone)]
pub struct EffnGrads<T: Scalar> {
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
}

/// Intermediates saved by [`effn_fwd_cached`].
#[derive(Debug, Clone)]
pub struct EffnCache<T: Scalar> {
    pre_act: Tensor<T>,
    tanh: Vec<T>,
    shifted: Tensor<T>,
}

impl<T: Scalar> EffnParams<T> {
    pub fn validate(&self) -> Result<()> {
        let (c, hidden) = (self.w1.shape()[0], self.w1.shape()[1]);
        if self.w2.shape() != [hidden, c] {
            return Err(Error::shape("effn", "w2 must be (hidden, c)"));
        }
        if hidden % self.spec.groups() != 0 {
            return Err(Error::Config(format!(
                "hidden width {hidden} not divisible into {} shift groups",
                self.spec.groups()
            )));
        }
        Ok(())
    }

    pub fn widths(&self) -> (usize, usize) {
        (self.w1.shape()[0], self.w1.shape()[1])
    }

    pub fn param_count(&self) -> usize {
        self.w1.numel() + self.b1.numel() + self.w2.numel() + self.b2.numel()
    }
}

/// `linear(c -> hidden) -> gelu -> spatial_shift -> linear(hidden -> c)`.
pub fn effn_forward<T: Scalar>(x: &Tensor<T>, p: &EffnParams<T>) -> Result<Tensor<T>> {
    Ok(effn_fwd_cached(x, p)?.0)
}

pub fn effn_fwd_cached<T: Scalar>(
    x: &Tensor<T>,
    p: &EffnParams<T>,
) -> Result<(Tensor<T>, EffnCache<T>)> {
    p.validate()?;
    let pre_act = linear(x, &p.w1, &p.b1)?;
    let (act, tanh) = gelu_fwd(&pre_act);
    let shifted = spatial_shift(&act, &p.spec)?;
    let y = linear(&shifted, &p.w2, &p.b2)?;
    Ok((
        y,
        EffnCache {
            pre_act,
            tanh,
            shifted,
        },
    ))
}

/// Gradients of [`effn_forward`]: `(grad_x, grads)`.
pub fn effn_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &EffnParams<T>,
    cache: &EffnCache<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, EffnGrads<T>)> {
    let (g_shifted, gw2, gb2) = linear_backward(&cache.shifted, &p.w2, grad_out)?;
    let g_act = spatial_shift_backward(&g_shifted, &p.spec)?;
    let g_pre = gelu_bwd_cached(&cache.pre_act, &cache.tanh, &g_act);
    let (gx, gw1, gb1) = linear_backward(x, &p.w1, &g_pre)?;
    Ok((
        gx,
        EffnGrads {
            w1: gw1,
            b1: gb1,
            w2: gw2,
            b2: gb2,
        },
    ))
}
