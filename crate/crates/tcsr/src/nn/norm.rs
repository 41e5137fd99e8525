use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Layer normalization over the trailing (channel) axis.
#[derive(Debug, Clone)]
pub struct LayerNorm<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub eps: T,
}

impl<T: Scalar> LayerNorm<T> {
    /// Unit scale, zero shift.
    pub fn new(c: usize, eps: f64) -> Self {
        LayerNorm {
            gamma: Tensor::full(&[c], T::ONE),
            beta: Tensor::zeros(&[c]),
            eps: T::from_f64(eps),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn param_count(&self) -> usize {
        self.gamma.numel() + self.beta.numel()
    }
}

/// Per-position mean/inverse-stddev saved by the forward pass.
#[derive(Debug, Clone)]
pub struct LnCache<T: Scalar> {
    mean: Vec<T>,
    inv_std: Vec<T>,
}

/// Normalize each trailing-axis slice to zero mean and unit variance
/// (biased, `eps`-stabilized), then scale and shift.
pub fn layernorm<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<Tensor<T>> {
    let ln = LayerNorm {
        gamma: gamma.clone(),
        beta: beta.clone(),
        eps,
    };
    Ok(layernorm_fwd(x, &ln)?.0)
}

pub fn layernorm_fwd<T: Scalar>(x: &Tensor<T>, p: &LayerNorm<T>) -> Result<(Tensor<T>, LnCache<T>)> {
    let c = p.channels();
    if x.shape().last() != Some(&c) {
        return Err(Error::shape(
            "layernorm",
            format!("trailing dim of {:?} must equal {c}", x.shape()),
        ));
    }
    let positions = x.numel() / c;
    let mut out = x.clone();
    let mut mean = vec![T::ZERO; positions];
    let mut inv_std = vec![T::ZERO; positions];
    let gd = p.gamma.data();
    let bd = p.beta.data();
    let inv_c = T::ONE / T::from_f64(c as f64);
    out.data_mut()
        .par_chunks_mut(c)
        .zip(mean.par_iter_mut())
        .zip(inv_std.par_iter_mut())
        .for_each(|((row, m), s)| {
            let mut mu = T::ZERO;
            for &v in row.iter() {
                mu += v;
            }
            mu *= inv_c;
            let mut var = T::ZERO;
            for &v in row.iter() {
                let d = v - mu;
                var += d * d;
            }
            var *= inv_c;
            let inv = T::ONE / (var + p.eps).sqrt();
            for (ch, v) in row.iter_mut().enumerate() {
                *v = bd[ch] + gd[ch] * (*v - mu) * inv;
            }
            *m = mu;
            *s = inv;
        });
    Ok((out, LnCache { mean, inv_std }))
}

/// Gradients of [`layernorm_fwd`]: `(grad_x, grad_gamma, grad_beta)`.
pub fn layernorm_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &LayerNorm<T>,
    cache: &LnCache<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let c = p.channels();
    if grad_out.shape() != x.shape() {
        return Err(Error::shape("layernorm_backward", "grad shape mismatch"));
    }
    let positions = x.numel() / c;
    let gd = p.gamma.data();
    let inv_c = T::ONE / T::from_f64(c as f64);

    let mut gx = Tensor::zeros(x.shape());
    gx.data_mut()
        .par_chunks_mut(c)
        .enumerate()
        .for_each(|(pos, grow)| {
            let xrow = &x.data()[pos * c..(pos + 1) * c];
            let gorow = &grad_out.data()[pos * c..(pos + 1) * c];
            let (mu, inv) = (cache.mean[pos], cache.inv_std[pos]);
            // gx = inv * (ghat - mean(ghat) - xhat * mean(ghat * xhat))
            let mut mean_g = T::ZERO;
            let mut mean_gx = T::ZERO;
            for ch in 0..c {
                let ghat = gorow[ch] * gd[ch];
                let xhat = (xrow[ch] - mu) * inv;
                mean_g += ghat;
                mean_gx += ghat * xhat;
            }
            mean_g *= inv_c;
            mean_gx *= inv_c;
            for ch in 0..c {
                let ghat = gorow[ch] * gd[ch];
                let xhat = (xrow[ch] - mu) * inv;
                grow[ch] = (ghat - mean_g - xhat * mean_gx) * inv;
            }
        });

    let mut ggamma = Tensor::zeros(&[c]);
    let mut gbeta = Tensor::zeros(&[c]);
    {
        let gg = ggamma.data_mut();
        let gb = gbeta.data_mut();
        for pos in 0..positions {
            let xrow = &x.data()[pos * c..(pos + 1) * c];
            let gorow = &grad_out.data()[pos * c..(pos + 1) * c];
            let (mu, inv) = (cache.mean[pos], cache.inv_std[pos]);
            for ch in 0..c {
                let xhat = (xrow[ch] - mu) * inv;
                gg[ch] += gorow[ch] * xhat;
                gb[ch] += gorow[ch];
            }
        }
    }
    Ok((gx, ggamma, gbeta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CounterRng;

    #[test]
    fn constant_row_normalizes_to_beta() {
        // Variance 0 is absorbed by eps; pre-affine output is 0, so y = beta.
        let x = Tensor::<f64>::full(&[2, 4], 3.0);
        let beta = Tensor::from_vec(&[4], vec![0.5; 4]).unwrap();
        let y = layernorm(&x, &Tensor::full(&[4], 1.0), &beta, 1e-5).unwrap();
        for &v in y.data() {
            assert!((v - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn two_channel_hand_case() {
        // x = [1, 3]: mean 2, variance 1, so xhat ~ [-1, 1].
        let x = Tensor::from_vec(&[1, 2], vec![1.0f64, 3.0]).unwrap();
        let y = layernorm(&x, &Tensor::full(&[2], 1.0), &Tensor::zeros(&[2]), 1e-5).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-3);
        assert!((y.data()[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn output_channel_mean_equals_beta_mean() {
        let mut rng = CounterRng::new(4);
        let x = rng.normal_tensor::<f64>(&[8, 16], 1.0, 2.0);
        let beta = rng.normal_tensor::<f64>(&[16], 0.0, 1.0);
        let y = layernorm(&x, &Tensor::full(&[16], 1.0), &beta, 1e-5).unwrap();
        let beta_mean: f64 = beta.data().iter().sum::<f64>() / 16.0;
        for row in y.data().chunks(16) {
            let m: f64 = row.iter().sum::<f64>() / 16.0;
            // xhat has zero mean per row, so the row mean is the beta mean.
            assert!((m - beta_mean).abs() < 1e-9);
        }
    }
}
