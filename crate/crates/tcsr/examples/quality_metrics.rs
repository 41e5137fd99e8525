//! PSNR and SSIM behavior on controlled inputs.
//!
//! Run with: `cargo run --release --example quality_metrics`

use tcsr::metrics::{psnr, rgb_to_y, ssim, PSNR_CAP_DB};
use tcsr::tensor::{CounterRng, Tensor};

fn main() {
    let mut rng = CounterRng::new(1);
    let img = rng
        .normal_tensor::<f64>(&[1, 48, 48, 3], 0.5, 0.15)
        .map(|v| v.clamp(0.0, 1.0));
    let y = rgb_to_y(&img).unwrap();

    println!("identical images:");
    println!("  psnr = {} dB (capped at {PSNR_CAP_DB})", psnr(&y, &y, 2).unwrap());
    println!("  ssim = {}", ssim(&y, &y).unwrap());

    let off = y.map(|v| v + 1.0 / 255.0);
    println!(
        "\nuniform one-8-bit-step error: psnr = {:.3} dB (closed form 20*log10(255) = {:.3})",
        psnr(&y, &off, 0).unwrap(),
        20.0 * 255.0f64.log10()
    );

    println!("\nGaussian noise sweep:");
    let noise = rng.normal_tensor::<f64>(&[1, 48, 48, 1], 0.0, 1.0);
    println!("{:>10}  {:>9}  {:>7}", "amplitude", "psnr_db", "ssim");
    for amp in [0.002, 0.01, 0.05, 0.1] {
        let noisy = y.add(&noise.scale(amp)).unwrap();
        println!(
            "{amp:>10}  {:>9.3}  {:>7.4}",
            psnr(&y, &noisy, 0).unwrap(),
            ssim(&y, &noisy).unwrap()
        );
    }

    let black = Tensor::from_vec(&[1, 1, 1, 3], vec![0.0f64, 0.0, 0.0]).unwrap();
    let white = Tensor::from_vec(&[1, 1, 1, 3], vec![1.0f64, 1.0, 1.0]).unwrap();
    println!(
        "\nBT.601 luma range: black -> {:.4} (16/255), white -> {:.4} (235/255)",
        rgb_to_y(&black).unwrap().data()[0],
        rgb_to_y(&white).unwrap().data()[0]
    );
}
