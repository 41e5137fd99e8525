//! The neighborhood attention operator, stand-alone.
//!
//! Shows that each pixel's output is a softmax-weighted mixture of its k x k
//! window, that the window saturates into dense global self-attention when
//! k equals the image size, and that the tiled traversal is bit-identical.
//!
//! Run with: `cargo run --release --example neighborhood_attention`

use tcsr::na::{na_forward, na_forward_tiled, neighborhood_indices, na_param_count, NaParams};
use tcsr::tensor::CounterRng;

fn main() {
    let (c, heads) = (8usize, 2usize);
    let mut rng = CounterRng::new(7);

    println!("window positions for a 9x9 image, k = 3:");
    println!("  interior (4,4): {:?}", neighborhood_indices(4, 4, 3, 9, 9).unwrap());
    println!("  corner   (0,0): {:?}", neighborhood_indices(0, 0, 3, 9, 9).unwrap());
    println!("  border   (0,4): {:?}", neighborhood_indices(0, 4, 3, 9, 9).unwrap());
    println!("every query sees exactly k*k keys; borders translate the window inward.\n");

    // Saturation: with k = H = W, the sliding window covers the whole image,
    // so the operator equals dense global self-attention.
    let k = 5;
    let params = NaParams::<f64>::init(c, heads, k, &mut rng).unwrap();
    let mut params = params;
    params.rpb = rng.normal_tensor(params.rpb.shape(), 0.0, 0.2);
    let x = rng.normal_tensor::<f64>(&[1, k, k, c], 0.0, 1.0);
    let windowed = na_forward(&x, &params).unwrap();
    let dense = tcsr_oracles::global_self_attention(
        x.data(),
        params.wq.data(),
        params.wk.data(),
        params.wv.data(),
        params.wo.data(),
        params.bo.data(),
        params.rpb.data(),
        1,
        k,
        k,
        c,
        heads,
        k,
    );
    let max_rel = windowed
        .data()
        .iter()
        .zip(&dense)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-8))
        .fold(0.0f64, f64::max)
        ;
    println!("saturated window (k = H = W = {k}) vs dense attention: max rel err {max_rel:.2e}");

    // Tiled traversal computes the very same values.
    let big = rng.normal_tensor::<f64>(&[1, 12, 16, c], 0.0, 1.0);
    let row_order = na_forward(&big, &params).unwrap();
    let tiled = na_forward_tiled(&big, &params, 4).unwrap();
    println!(
        "tiled traversal bit-identical: {}",
        row_order.data() == tiled.data()
    );

    // Parameter counts do not grow with the window (except the bias table).
    println!("\nparameters at c = 64, one head:");
    for k in [3, 7, 11, 13] {
        println!("  k = {k:<2}: {}", na_param_count(64, 1, k));
    }
}
