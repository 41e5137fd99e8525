//! Image-file inference round trip: write a PNG, downscale it, and
//! super-resolve with both whole-image and tiled forwards.
//!
//! Run with: `cargo run --release --example upscale_image`
//! (pass a checkpoint path to use trained weights instead of a fresh model)

use tcsr::io::{load_model, read_rgb_png, write_rgb_png};
use tcsr::metrics::bicubic_resize;
use tcsr::model::{ModelConfig, Tcsr};
use tcsr::train::{evaluate_pair, synthetic_rgb_image};

fn main() {
    let out_dir = std::env::temp_dir().join("tcsr_upscale_demo");
    std::fs::create_dir_all(&out_dir).unwrap();

    // An HR reference and its 2x bicubic degradation, via actual PNG files.
    let hr = synthetic_rgb_image::<f32>(96, 96, 5);
    let hr_path = out_dir.join("reference.png");
    write_rgb_png(&hr_path, &hr).unwrap();
    let hr = read_rgb_png::<f32>(&hr_path).unwrap();
    let lr = bicubic_resize(&hr, 48, 48).unwrap();
    write_rgb_png(&out_dir.join("input_lr.png"), &lr).unwrap();

    let model = match std::env::args().nth(1) {
        Some(ckpt) => {
            println!("loading checkpoint {ckpt}");
            load_model::<f32>(std::path::Path::new(&ckpt)).unwrap().0
        }
        None => {
            println!("no checkpoint given; using freshly initialized weights");
            Tcsr::<f32>::init(ModelConfig::tiny(2), 1).unwrap()
        }
    };

    let sr = model.super_resolve(&lr).unwrap();
    write_rgb_png(&out_dir.join("output_sr.png"), &sr).unwrap();
    let sr_tiled = model.super_resolve_tiled(&lr, 24).unwrap();
    write_rgb_png(&out_dir.join("output_sr_tiled.png"), &sr_tiled).unwrap();

    let up = bicubic_resize(&lr, 96, 96).unwrap().map(|v| v.clamp(0.0, 1.0));
    let (psnr_model, ssim_model) = evaluate_pair(&sr, &hr, 2).unwrap();
    let (psnr_bicubic, ssim_bicubic) = evaluate_pair(&up, &hr, 2).unwrap();
    println!("vs the 96x96 reference (Y channel, 2 px border crop):");
    println!("  bicubic upscale: {psnr_bicubic:.2} dB / ssim {ssim_bicubic:.4}");
    println!("  model output:    {psnr_model:.2} dB / ssim {ssim_model:.4}");
    println!("files written under {}", out_dir.display());
}
