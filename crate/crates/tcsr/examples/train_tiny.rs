//! A short end-to-end training run on procedural images: sample HR patches,
//! degrade them bicubically, optimize the L1 loss with Adam, then score the
//! model against the bicubic baseline on held-out images.
//!
//! This is a demonstration, not a convergence run; expect the model to
//! still trail bicubic after so few steps. Run with:
//! `cargo run --release --example train_tiny [steps]`

use tcsr::model::{ModelConfig, Tcsr};
use tcsr::tensor::Tensor;
use tcsr::train::{
    evaluate_bicubic, evaluate_model, synthetic_rgb_image, train, AdamState, TrainConfig,
};

fn main() {
    let steps: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);

    type T = f32;
    let train_images: Vec<Tensor<T>> = (0..16)
        .map(|i| synthetic_rgb_image(256, 256, 1000 + i))
        .collect();
    let held_out: Vec<(String, Tensor<T>)> = (0..4)
        .map(|i| (format!("held{i}"), synthetic_rgb_image(128, 128, 2000 + i)))
        .collect();

    let config = ModelConfig::tiny(2);
    let mut model = Tcsr::<T>::init(config, 42).unwrap();
    let mut state = AdamState::for_model(&model);
    let cfg = TrainConfig {
        steps,
        batch: 8,
        patch: 64,
        lr: 2e-3,
        seed: 42,
        checkpoint_interval: 0,
        ..TrainConfig::default()
    };

    println!("training tiny x2 for {steps} steps on {} images...", train_images.len());
    let report = train(&mut model, &mut state, &cfg, &train_images, |_, _, _| Ok(())).unwrap();
    for p in report.points.iter().step_by((steps as usize / 10).max(1)) {
        println!("  step {:>5}  loss {:.5}  lr {:.2e}", p.step, p.loss, p.lr);
    }

    let ours = evaluate_model(&model, &held_out, None).unwrap();
    let bicubic = evaluate_bicubic(&held_out, 2).unwrap();
    println!("\nheld-out Y-channel quality (x2):");
    println!("  bicubic: {:.3} dB / ssim {:.4}", bicubic.mean_psnr(), bicubic.mean_ssim());
    println!("  model:   {:.3} dB / ssim {:.4}", ours.mean_psnr(), ours.mean_ssim());
    println!(
        "  delta:   {:+.3} dB after {steps} steps",
        ours.mean_psnr() - bicubic.mean_psnr()
    );
}
