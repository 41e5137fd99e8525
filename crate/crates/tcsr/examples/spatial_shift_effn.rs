//! The spatial-shift operation and the feed-forward network built on it.
//!
//! Run with: `cargo run --release --example spatial_shift_effn`

use tcsr::nn::{effn_forward, spatial_shift, EffnParams, ShiftSpec};
use tcsr::tensor::{CounterRng, Tensor};

fn main() {
    let spec = ShiftSpec::default_8();
    println!("shift directions (dy, dx) per channel group: {:?}\n", spec.directions);

    // Move a single bright pixel: each channel group travels its own way.
    let mut x = Tensor::<f64>::zeros(&[1, 5, 5, 8]);
    for g in 0..8 {
        x.data_mut()[((2 * 5) + 2) * 8 + g] = 1.0;
    }
    let y = spatial_shift(&x, &spec).unwrap();
    println!("a pixel at (2,2) lit in all 8 groups lands at:");
    for (g, &(dy, dx)) in spec.directions.iter().enumerate() {
        let i = (2 + dy) as usize;
        let j = (2 + dx) as usize;
        let v = y.data()[((i * 5) + j) * 8 + g];
        println!("  group {g}: ({i},{j}) = {v} (direction ({dy},{dx}))");
    }

    // Exact agreement with one-hot depthwise convolution, borders included.
    let mut rng = CounterRng::new(3);
    let noise = rng.normal_tensor::<f64>(&[2, 6, 7, 16], 0.0, 1.0);
    let ours = spatial_shift(&noise, &spec).unwrap();
    let oracle = tcsr_oracles::depthwise_shift(noise.data(), 2, 6, 7, 16, 1, &spec.directions);
    println!("\nshift equals one-hot depthwise conv bitwise: {}", ours.data() == oracle.as_slice());

    // The shifted feed-forward network costs exactly as much as a plain one.
    let (c, hidden) = (32usize, 64usize);
    let effn = EffnParams::<f64> {
        w1: rng.normal_tensor(&[c, hidden], 0.0, 0.1),
        b1: Tensor::zeros(&[hidden]),
        w2: rng.normal_tensor(&[hidden, c], 0.0, 0.1),
        b2: Tensor::zeros(&[c]),
        spec,
    };
    let plain_ffn_params = c * hidden + hidden + hidden * c + c;
    println!(
        "\neffn params {} == plain ffn params {} (shift is parameter-free)",
        effn.param_count(),
        plain_ffn_params
    );
    let input = rng.normal_tensor::<f64>(&[1, 8, 8, c], 0.0, 1.0);
    let out = effn_forward(&input, &effn).unwrap();
    println!("effn output shape {:?}, finite: {}", out.shape(), out.all_finite());
}
