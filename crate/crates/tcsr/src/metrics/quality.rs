use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// BT.601 luma of `[0, 1]`-scaled RGB, itself on `[16/255, 235/255]`:
/// `Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255`.
pub fn rgb_to_y<T: Scalar>(img: &Tensor<T>) -> Result<Tensor<T>> {
    if img.shape().last() != Some(&3) {
        return Err(Error::shape("rgb_to_y", "trailing axis must hold RGB"));
    }
    let mut shape = img.shape().to_vec();
    *shape.last_mut().unwrap() = 1;
    let (kr, kg, kb, off) = (
        T::from_f64(65.481 / 255.0),
        T::from_f64(128.553 / 255.0),
        T::from_f64(24.966 / 255.0),
        T::from_f64(16.0 / 255.0),
    );
    let data = img
        .data()
        .chunks_exact(3)
        .map(|px| kr * px[0] + kg * px[1] + kb * px[2] + off)
        .collect();
    Tensor::from_vec(&shape, data)
}

/// Maximum reported PSNR; zero-MSE pairs land here instead of infinity.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Peak signal-to-noise ratio in dB over `[0, 1]` images, with `border`
/// pixels cropped from each spatial side first. Capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, border: usize) -> Result<f64> {
    let (a, b) = (crop_border(a, border)?, crop_border(b, border)?);
    if a.shape() != b.shape() {
        return Err(Error::shape("psnr", "images must have equal shapes"));
    }
    let mut mse = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = x.to_f64() - y.to_f64();
        mse += d * d;
    }
    mse /= a.numel() as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

fn crop_border<T: Scalar>(img: &Tensor<T>, border: usize) -> Result<Tensor<T>> {
    if border == 0 {
        return Ok(img.clone());
    }
    let s = img.shape4()?;
    if 2 * border >= s.h || 2 * border >= s.w {
        return Err(Error::Config(format!(
            "border crop {border} leaves no pixels of a {}x{} image",
            s.h, s.w
        )));
    }
    img.slice(&[
        (0, s.n),
        (border, s.h - border),
        (border, s.w - border),
        (0, s.c),
    ])
}

/// Normalized 11x11 Gaussian window, sigma 1.5.
fn gaussian_window() -> [f64; 121] {
    let sigma = 1.5f64;
    let mut w = [0.0; 121];
    let mut sum = 0.0;
    for i in 0..11 {
        for j in 0..11 {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            let v = (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
            w[i * 11 + j] = v;
            sum += v;
        }
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Structural similarity over `[0, 1]` single-channel images: 11x11
/// Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, valid windows only,
/// averaged over positions. `ssim(x, x)` is exactly 1.
pub fn ssim<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape("ssim", "images must have equal shapes"));
    }
    let s = a.shape4()?;
    if s.c != 1 {
        return Err(Error::shape("ssim", "expected a single (luma) channel"));
    }
    if s.h < 11 || s.w < 11 {
        return Err(Error::Config(format!(
            "image {}x{} smaller than the 11x11 window",
            s.h, s.w
        )));
    }
    let window = gaussian_window();
    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;

    let mut total = 0.0f64;
    let mut count = 0usize;
    for n in 0..s.n {
        for i in 0..=s.h - 11 {
            for j in 0..=s.w - 11 {
                let mut mu_a = 0.0;
                let mut mu_b = 0.0;
                let mut aa = 0.0;
                let mut bb = 0.0;
                let mut ab = 0.0;
                for u in 0..11 {
                    for v in 0..11 {
                        let wgt = window[u * 11 + v];
                        let pa = a.data()[(n * s.h + i + u) * s.w + j + v].to_f64();
                        let pb = b.data()[(n * s.h + i + u) * s.w + j + v].to_f64();
                        mu_a += wgt * pa;
                        mu_b += wgt * pb;
                        aa += wgt * pa * pa;
                        bb += wgt * pb * pb;
                        ab += wgt * pa * pb;
                    }
                }
                let var_a = aa - mu_a * mu_a;
                let var_b = bb - mu_b * mu_b;
                let cov = ab - mu_a * mu_b;
                let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
                let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                total += num / den;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CounterRng;

    #[test]
    fn luma_formula_constants() {
        let black = Tensor::from_vec(&[1, 1, 1, 3], vec![0.0f64, 0.0, 0.0]).unwrap();
        assert!((rgb_to_y(&black).unwrap().data()[0] - 16.0 / 255.0).abs() < 1e-12);
        let white = Tensor::from_vec(&[1, 1, 1, 3], vec![1.0f64, 1.0, 1.0]).unwrap();
        assert!((rgb_to_y(&white).unwrap().data()[0] - 235.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn luma_affine_in_gray_level() {
        // Y(g, g, g) = (219 g + 16) / 255.
        for g in [0.0f64, 0.25, 0.5, 0.75, 1.0] {
            let px = Tensor::from_vec(&[1, 1, 1, 3], vec![g, g, g]).unwrap();
            let y = rgb_to_y(&px).unwrap().data()[0];
            assert!((y - (219.0 * g + 16.0) / 255.0).abs() < 1e-9);
        }
    }

    #[test]
    fn psnr_of_identical_images_hits_cap() {
        let mut rng = CounterRng::new(1);
        let x = rng.normal_tensor::<f64>(&[1, 16, 16, 1], 0.5, 0.1);
        assert_eq!(psnr(&x, &x, 2).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn uniform_one_lsb_error_is_48_13_db() {
        let a = Tensor::<f64>::full(&[1, 20, 20, 1], 0.5);
        let b = a.map(|v| v + 1.0 / 255.0);
        let db = psnr(&a, &b, 0).unwrap();
        assert!((db - 48.13).abs() < 0.01, "{db}");
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let mut rng = CounterRng::new(2);
        let x = rng.normal_tensor::<f64>(&[1, 24, 24, 1], 0.5, 0.1);
        let noise = rng.normal_tensor::<f64>(&[1, 24, 24, 1], 0.0, 1.0);
        let mut prev = f64::INFINITY;
        for amp in [0.001, 0.003, 0.01, 0.03, 0.1] {
            let noisy = x.add(&noise.scale(amp)).unwrap();
            let db = psnr(&x, &noisy, 0).unwrap();
            assert!(db < prev, "amp {amp}: {db} !< {prev}");
            prev = db;
        }
    }

    #[test]
    fn ssim_of_identical_images_is_exactly_one() {
        let mut rng = CounterRng::new(3);
        let x = rng.normal_tensor::<f64>(&[1, 16, 16, 1], 0.5, 0.15);
        assert_eq!(ssim(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn ssim_penalizes_noise() {
        let mut rng = CounterRng::new(4);
        let x = rng.normal_tensor::<f64>(&[1, 32, 32, 1], 0.5, 0.1);
        let noisy = x
            .add(&rng.normal_tensor::<f64>(&[1, 32, 32, 1], 0.0, 0.05))
            .unwrap();
        let v = ssim(&x, &noisy).unwrap();
        assert!(v < 1.0 && v > -1.0);
    }
}
