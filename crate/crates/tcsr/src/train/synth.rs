use crate::tensor::{CounterRng, Scalar, Tensor};

// Shared shape palette: held-out images drawn from the same small color
// set as training images, so desk-scale runs measure generalization over
// geometry rather than over unseen colors.
const PALETTE: [[f64; 3]; 8] = [
    [0.95, 0.25, 0.20],
    [0.20, 0.70, 0.30],
    [0.15, 0.35, 0.85],
    [0.95, 0.85, 0.20],
    [0.80, 0.30, 0.80],
    [0.20, 0.80, 0.85],
    [0.92, 0.92, 0.92],
    [0.10, 0.10, 0.12],
];

/// Procedural RGB test image: a smooth corner-gradient background under a
/// dense field of solid rectangles and disks in a fixed palette. Sharp
/// edges over smooth regions make these useful for desk-scale
/// super-resolution runs without shipping a dataset. Deterministic in
/// `seed`.
pub fn synthetic_rgb_image<T: Scalar>(h: usize, w: usize, seed: u64) -> Tensor<T> {
    let mut rng = CounterRng::new(seed);
    let mut img = vec![0.0f64; h * w * 3];

    // Bilinear gradient between four random corner colors.
    let corners: Vec<[f64; 3]> = (0..4)
        .map(|_| [rng.uniform(), rng.uniform(), rng.uniform()])
        .collect();
    for i in 0..h {
        let fy = i as f64 / (h - 1).max(1) as f64;
        for j in 0..w {
            let fx = j as f64 / (w - 1).max(1) as f64;
            for ch in 0..3 {
                let top = corners[0][ch] * (1.0 - fx) + corners[1][ch] * fx;
                let bot = corners[2][ch] * (1.0 - fx) + corners[3][ch] * fx;
                img[(i * w + j) * 3 + ch] = top * (1.0 - fy) + bot * fy;
            }
        }
    }

    // A dense field of small shapes, count scaled to area so patch-level
    // edge statistics stay the same across image sizes.
    let shapes = (h * w) / 400 + rng.below((h * w) / 1600 + 1);
    for _ in 0..shapes {
        let color = PALETTE[rng.below(PALETTE.len())];
        if rng.uniform() < 0.5 {
            // Rectangle.
            let y0 = rng.below(h);
            let x0 = rng.below(w);
            let rh = 2 + rng.below(21.min(h / 3 + 1));
            let rw = 2 + rng.below(21.min(w / 3 + 1));
            for i in y0..(y0 + rh).min(h) {
                for j in x0..(x0 + rw).min(w) {
                    for ch in 0..3 {
                        img[(i * w + j) * 3 + ch] = color[ch];
                    }
                }
            }
        } else {
            // Disk.
            let cy = rng.below(h) as f64;
            let cx = rng.below(w) as f64;
            let r = (2 + rng.below(13.min(h.min(w) / 4 + 1))) as f64;
            let (lo_i, hi_i) = ((cy - r).max(0.0) as usize, ((cy + r) as usize + 1).min(h));
            let (lo_j, hi_j) = ((cx - r).max(0.0) as usize, ((cx + r) as usize + 1).min(w));
            for i in lo_i..hi_i {
                for j in lo_j..hi_j {
                    let (dy, dx) = (i as f64 - cy, j as f64 - cx);
                    if dy * dy + dx * dx <= r * r {
                        for ch in 0..3 {
                            img[(i * w + j) * 3 + ch] = color[ch];
                        }
                    }
                }
            }
        }
    }

    let data = img.into_iter().map(|v| T::from_f64(v.clamp(0.0, 1.0))).collect();
    Tensor::from_vec(&[1, h, w, 3], data).expect("size computed from shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = synthetic_rgb_image::<f64>(48, 64, 7);
        let b = synthetic_rgb_image::<f64>(48, 64, 7);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let c = synthetic_rgb_image::<f64>(48, 64, 8);
        assert_ne!(a, c);
    }
}
