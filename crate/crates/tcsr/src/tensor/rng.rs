use super::{Scalar, Tensor};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Counter-based pseudo-random generator.
///
/// Draw `i` of stream `seed` is `mix64(seed + (i+1) * GOLDEN)` where `mix64`
/// is the SplitMix64 finalizer. Output depends only on `(seed, i)` and pure
/// integer arithmetic, so streams reproduce bit-exactly across platforms.
/// Normal variates come from the Box-Muller transform on two uniform draws.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
    spare_normal: Option<f64>,
}

fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            seed,
            counter: 0,
            spare_normal: None,
        }
    }

    /// Derive an independent stream; used to give each training component
    /// (init, sampling, augmentation) its own counter sequence.
    pub fn fork(&self, stream: u64) -> Self {
        CounterRng::new(mix64(self.seed ^ mix64(stream.wrapping_add(GOLDEN))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Standard normal via Box-Muller; the paired variate is cached so draws
    /// come in deterministic (cos, sin) order.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal_tensor<T: Scalar>(&mut self, shape: &[usize], mean: f64, std: f64) -> Tensor<T> {
        debug_assert!(std >= 0.0);
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64(self.standard_normal() * std + mean))
            .collect();
        Tensor::from_vec(shape, data).expect("shape/product mismatch is impossible here")
    }

    /// Normal truncated to two standard deviations, resampling rejected
    /// draws. The usual initializer for projection weights.
    pub fn trunc_normal_tensor<T: Scalar>(
        &mut self,
        shape: &[usize],
        mean: f64,
        std: f64,
    ) -> Tensor<T> {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let mut z = self.standard_normal();
                while z.abs() > 2.0 {
                    z = self.standard_normal();
                }
                T::from_f64(z * std + mean)
            })
            .collect();
        Tensor::from_vec(shape, data).expect("shape/product mismatch is impossible here")
    }
}

/// Normal tensor from an explicit seed; deterministic given `(shape, seed)`.
pub fn rng_normal<T: Scalar>(shape: &[usize], mean: f64, std: f64, seed: u64) -> Tensor<T> {
    CounterRng::new(seed).normal_tensor(shape, mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_yields_mean() {
        let t = rng_normal::<f64>(&[10], 3.5, 0.0, 1);
        assert!(t.data().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn same_seed_same_stream() {
        let a = rng_normal::<f64>(&[64], 0.0, 1.0, 42);
        let b = rng_normal::<f64>(&[64], 0.0, 1.0, 42);
        assert_eq!(a, b);
        let c = rng_normal::<f64>(&[64], 0.0, 1.0, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_mean_close_to_zero() {
        let t = rng_normal::<f64>(&[100_000], 0.0, 1.0, 7);
        let mean: f64 = t.data().iter().sum::<f64>() / t.numel() as f64;
        assert!(mean.abs() < 0.02, "sample mean {mean}");
    }

    #[test]
    fn trunc_normal_respects_bounds() {
        let mut rng = CounterRng::new(9);
        let t = rng.trunc_normal_tensor::<f64>(&[10_000], 0.0, 0.02);
        assert!(t.data().iter().all(|&v| v.abs() <= 0.04 + 1e-12));
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = CounterRng::new(3);
        for _ in 0..1000 {
            assert!(rng.below(7) < 7);
        }
    }
}
