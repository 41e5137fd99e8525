use crate::error::{Error, Result};
use crate::metrics::bicubic_resize;
use crate::tensor::{CounterRng, Scalar, Tensor};

/// Draws random augmented HR patches from a pool of images and pairs them
/// with bicubic-downscaled LR inputs.
pub struct PatchSampler<'a, T: Scalar> {
    images: Vec<&'a Tensor<T>>,
    patch: usize,
    scale: usize,
    augment: bool,
}

impl<'a, T: Scalar> PatchSampler<'a, T> {
    pub fn new(images: &'a [Tensor<T>], patch: usize, scale: usize, augment: bool) -> Result<Self> {
        if !patch.is_multiple_of(scale) {
            return Err(Error::Config(format!(
                "patch {patch} not divisible by scale {scale}"
            )));
        }
        let usable: Vec<&Tensor<T>> = images
            .iter()
            .filter(|img| {
                img.shape4()
                    .map(|s| s.h >= patch && s.w >= patch)
                    .unwrap_or(false)
            })
            .collect();
        if usable.is_empty() {
            return Err(Error::Config(format!(
                "no training image is at least {patch}x{patch}"
            )));
        }
        Ok(PatchSampler {
            images: usable,
            patch,
            scale,
            augment,
        })
    }

    /// `(lr, hr)` batch: HR patches are `(batch, patch, patch, 3)`, LR their
    /// `scale`-fold bicubic downscale. Draw order per sample is fixed
    /// (image, row, column, augmentation), so a given RNG state always
    /// yields the same batch.
    pub fn sample_batch(
        &self,
        rng: &mut CounterRng,
        batch: usize,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        let p = self.patch;
        let mut hr = Tensor::<T>::zeros(&[batch, p, p, 3]);
        for b in 0..batch {
            let img = self.images[rng.below(self.images.len())];
            let s = img.shape4()?;
            let top = rng.below(s.h - p + 1);
            let left = rng.below(s.w - p + 1);
            let transform = if self.augment { rng.below(8) } else { 0 };
            let dst = &mut hr.data_mut()[b * p * p * 3..(b + 1) * p * p * 3];
            copy_patch(img.data(), s.w, top, left, p, transform, dst);
        }
        let lr = bicubic_resize(&hr, p / self.scale, p / self.scale)?;
        Ok((lr, hr))
    }
}

/// Copy a `p x p` RGB patch applying one of the eight dihedral transforms:
/// bit 0 transposes, bit 1 flips rows, bit 2 flips columns.
fn copy_patch<T: Scalar>(
    src: &[T],
    src_w: usize,
    top: usize,
    left: usize,
    p: usize,
    transform: usize,
    dst: &mut [T],
) {
    for i in 0..p {
        for j in 0..p {
            let (mut si, mut sj) = if transform & 1 != 0 { (j, i) } else { (i, j) };
            if transform & 2 != 0 {
                si = p - 1 - si;
            }
            if transform & 4 != 0 {
                sj = p - 1 - sj;
            }
            let s = ((top + si) * src_w + left + sj) * 3;
            let d = (i * p + j) * 3;
            dst[d..d + 3].copy_from_slice(&src[s..s + 3]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_image(h: usize, w: usize) -> Tensor<f64> {
        let data = (0..h * w * 3).map(|i| (i % 255) as f64 / 255.0).collect();
        Tensor::from_vec(&[1, h, w, 3], data).unwrap()
    }

    #[test]
    fn batch_shapes_and_determinism() {
        let imgs = vec![ramp_image(80, 96), ramp_image(64, 64)];
        let sampler = PatchSampler::new(&imgs, 64, 2, true).unwrap();
        let (lr1, hr1) = sampler.sample_batch(&mut CounterRng::new(5), 3).unwrap();
        assert_eq!(hr1.shape(), &[3, 64, 64, 3]);
        assert_eq!(lr1.shape(), &[3, 32, 32, 3]);
        let (lr2, hr2) = sampler.sample_batch(&mut CounterRng::new(5), 3).unwrap();
        assert_eq!(hr1, hr2);
        assert_eq!(lr1, lr2);
    }

    #[test]
    fn small_images_are_skipped_and_empty_pool_rejected() {
        let imgs = vec![ramp_image(16, 16)];
        assert!(PatchSampler::new(&imgs, 64, 2, true).is_err());
        let imgs = vec![ramp_image(16, 16), ramp_image(64, 64)];
        assert!(PatchSampler::new(&imgs, 64, 2, true).is_ok());
    }

    #[test]
    fn dihedral_transforms_preserve_values() {
        let img = ramp_image(8, 8);
        let mut base = vec![0.0; 4 * 4 * 3];
        copy_patch(img.data(), 8, 2, 2, 4, 0, &mut base);
        for t in 1..8 {
            let mut out = vec![0.0; 4 * 4 * 3];
            copy_patch(img.data(), 8, 2, 2, 4, t, &mut out);
            let mut a = base.clone();
            let mut b = out.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b, "transform {t} changed the multiset");
        }
    }
}
