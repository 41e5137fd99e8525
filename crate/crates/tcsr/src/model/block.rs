use crate::error::Result;
use crate::na::{na_backward_cached, na_forward_with_cache, NaCache, NaGrads, NaParams};
use crate::nn::{
    effn_backward, effn_fwd_cached, layernorm_backward, layernorm_fwd, EffnCache, EffnGrads,
    EffnParams, LayerNorm, LnCache, ShiftSpec,
};
use crate::tensor::{CounterRng, Scalar, Tensor};

use super::config::ModelConfig;

/// One residual unit: pre-norm attention followed by a pre-norm spatially
/// shifted feed-forward network.
#[derive(Debug, Clone)]
pub struct NatBlock<T: Scalar> {
    pub norm1: LayerNorm<T>,
    pub na: NaParams<T>,
    pub norm2: LayerNorm<T>,
    pub effn: EffnParams<T>,
}

/// Gradients mirroring [`NatBlock`].
#[derive(Debug, Clone)]
pub struct BlockGrads<T: Scalar> {
    pub norm1_gamma: Tensor<T>,
    pub norm1_beta: Tensor<T>,
    pub na: NaGrads<T>,
    pub norm2_gamma: Tensor<T>,
    pub norm2_beta: Tensor<T>,
    pub effn: EffnGrads<T>,
}

/// Activations recorded by [`NatBlock::forward_with_cache`].
#[derive(Debug, Clone)]
pub struct BlockCache<T: Scalar> {
    norm1_out: Tensor<T>,
    ln1: LnCache<T>,
    na: NaCache<T>,
    /// Residual state between the two halves of the block.
    mid: Tensor<T>,
    norm2_out: Tensor<T>,
    ln2: LnCache<T>,
    effn: EffnCache<T>,
}

impl<T: Scalar> NatBlock<T> {
    pub fn init(config: &ModelConfig, rng: &mut CounterRng) -> Result<Self> {
        let c = config.channels;
        let hidden = config.hidden();
        let spec = if config.shift_groups == 8 && config.shift_stride == 1 {
            ShiftSpec::default_8()
        } else {
            // Non-default group counts reuse the same ring pattern cyclically.
            let ring = ShiftSpec::default_8().directions;
            let dirs = (0..config.shift_groups)
                .map(|g| {
                    let (dy, dx) = ring[g % ring.len()];
                    (dy * config.shift_stride as i32, dx * config.shift_stride as i32)
                })
                .collect();
            ShiftSpec::new(config.shift_stride, dirs)?
        };
        Ok(NatBlock {
            norm1: LayerNorm::new(c, 1e-5),
            na: NaParams::init(c, config.heads, config.kernel, rng)?,
            norm2: LayerNorm::new(c, 1e-5),
            effn: EffnParams {
                w1: rng.trunc_normal_tensor(&[c, hidden], 0.0, 0.02),
                b1: Tensor::zeros(&[hidden]),
                w2: rng.trunc_normal_tensor(&[hidden, c], 0.0, 0.02),
                b2: Tensor::zeros(&[c]),
                spec,
            },
        })
    }

    /// `x + NA(norm1(x))`, then `y + EFFN(norm2(y))`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_with_cache(x)?.0)
    }

    pub fn forward_with_cache(&self, x: &Tensor<T>) -> Result<(Tensor<T>, BlockCache<T>)> {
        let (norm1_out, ln1) = layernorm_fwd(x, &self.norm1)?;
        let (na_out, na) = na_forward_with_cache(&norm1_out, &self.na)?;
        let mid = x.add(&na_out)?;
        let (norm2_out, ln2) = layernorm_fwd(&mid, &self.norm2)?;
        let (effn_out, effn) = effn_fwd_cached(&norm2_out, &self.effn)?;
        let y = mid.add(&effn_out)?;
        Ok((
            y,
            BlockCache {
                norm1_out,
                ln1,
                na,
                mid,
                norm2_out,
                ln2,
                effn,
            },
        ))
    }

    pub fn backward(
        &self,
        x: &Tensor<T>,
        cache: &BlockCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, BlockGrads<T>)> {
        // Feed-forward half.
        let (g_norm2_out, effn_grads) =
            effn_backward(&cache.norm2_out, &self.effn, &cache.effn, grad_out)?;
        let (g_mid_branch, gn2_gamma, gn2_beta) =
            layernorm_backward(&cache.mid, &self.norm2, &cache.ln2, &g_norm2_out)?;
        let g_mid = grad_out.add(&g_mid_branch)?;

        // Attention half.
        let (g_norm1_out, na_grads) =
            na_backward_cached(&cache.norm1_out, &self.na, &cache.na, &g_mid)?;
        let (g_x_branch, gn1_gamma, gn1_beta) =
            layernorm_backward(x, &self.norm1, &cache.ln1, &g_norm1_out)?;
        let gx = g_mid.add(&g_x_branch)?;

        Ok((
            gx,
            BlockGrads {
                norm1_gamma: gn1_gamma,
                norm1_beta: gn1_beta,
                na: na_grads,
                norm2_gamma: gn2_gamma,
                norm2_beta: gn2_beta,
                effn: effn_grads,
            },
        ))
    }

    pub fn param_count(&self) -> usize {
        self.norm1.param_count()
            + self.na.param_count()
            + self.norm2.param_count()
            + self.effn.param_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeroed_branch_terminals_make_block_identity() {
        let config = ModelConfig::tiny(2);
        let mut rng = CounterRng::new(1);
        let mut block = NatBlock::<f64>::init(&config, &mut rng).unwrap();
        block.na.wo = block.na.wo.zeros_like();
        block.na.bo = block.na.bo.zeros_like();
        block.effn.w2 = block.effn.w2.zeros_like();
        block.effn.b2 = block.effn.b2.zeros_like();

        let x = rng.normal_tensor::<f64>(&[1, 8, 8, 32], 0.0, 1.0);
        let y = block.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn preserves_shape() {
        let config = ModelConfig::tiny(2);
        let mut rng = CounterRng::new(2);
        let block = NatBlock::<f64>::init(&config, &mut rng).unwrap();
        let x = rng.normal_tensor::<f64>(&[2, 9, 7, 32], 0.0, 1.0);
        let y = block.forward(&x).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert!(y.all_finite());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // Small instance; full per-op checks live in the verify module.
        let mut config = ModelConfig::tiny(2);
        config.channels = 8;
        config.heads = 2;
        config.kernel = 3;
        let mut rng = CounterRng::new(3);
        let block = NatBlock::<f64>::init(&config, &mut rng).unwrap();
        let x = rng.normal_tensor::<f64>(&[1, 5, 5, 8], 0.0, 1.0);
        let cot = rng.normal_tensor::<f64>(&[1, 5, 5, 8], 0.0, 1.0);

        let (_, cache) = block.forward_with_cache(&x).unwrap();
        let (gx, _) = block.backward(&x, &cache, &cot).unwrap();

        let loss = |xs: &[f64]| {
            let xt = Tensor::from_vec(x.shape(), xs.to_vec()).unwrap();
            block
                .forward(&xt)
                .unwrap()
                .data()
                .iter()
                .zip(cot.data())
                .map(|(y, g)| y * g)
                .sum::<f64>()
        };
        let fd = tcsr_oracles::central_diff(loss, x.data(), 1e-5);
        for (a, b) in gx.data().iter().zip(&fd) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
            assert!(rel < 1e-4, "{a} vs {b}");
        }
    }
}
