//! Parameter and FLOP accounting: itemized model reports and the
//! conv-versus-attention cost comparison.
//!
//! Run with: `cargo run --release --example analyze_cost`

use tcsr::model::{estimate_flops, model_cost, ModelConfig, ModuleKind};

fn main() {
    for config in [ModelConfig::tiny(4), ModelConfig::base(4), ModelConfig::large(4)] {
        let report = model_cost(&config, 64, 64).unwrap();
        println!(
            "{} (C={}, B={}, k={}, x{}): {} params, {:.2} GMAC at 64x64",
            config.variant,
            config.channels,
            config.blocks,
            config.kernel,
            config.scale,
            report.total_params(),
            report.total_flops() as f64 / 1e9,
        );
    }

    // Per-pixel multiply-accumulates: convolution cost grows with C^2 K^2,
    // window attention with 3C^2 + 2CK^2, so wide attention windows stay
    // cheap where wide conv kernels explode.
    let c = 64;
    println!("\nper-pixel cost at C={c}:");
    println!("{:>4}  {:>12}  {:>12}  {:>7}", "K", "conv", "attention", "ratio");
    for k in [3usize, 5, 7, 9, 11, 13] {
        let conv = estimate_flops(ModuleKind::Conv { channels: c, kernel: k }, 1, 1);
        let na = estimate_flops(ModuleKind::Na { channels: c, kernel: k }, 1, 1);
        println!("{k:>4}  {conv:>12}  {na:>12}  {:>7.3}", na as f64 / conv as f64);
    }
    let na13 = estimate_flops(ModuleKind::Na { channels: c, kernel: 13 }, 1, 1);
    let conv3 = estimate_flops(ModuleKind::Conv { channels: c, kernel: 3 }, 1, 1);
    println!(
        "\na 13-wide attention window costs {:.3} of one 3x3 convolution ({na13} vs {conv3})",
        na13 as f64 / conv3 as f64
    );

    // Full itemization for the tiny model.
    println!("\nitemized tiny model at 64x64:");
    print!("{}", model_cost(&ModelConfig::tiny(2), 64, 64).unwrap().to_text());
}
