//! Reference implementations used to cross-check the `tcsr` kernels.
//!
//! Everything in this crate is written as plain loops over raw `f64` slices,
//! directly from the defining formulas. Nothing here calls into the main
//! library, so a bug in an optimized kernel cannot be mirrored into the
//! oracle that is supposed to catch it.
//!
//! Layout convention for all image-shaped buffers: row-major
//! `(batch, height, width, channel)`, channel fastest.

/// `c[i][j] = sum_k a[i][k] * b[k][j]` via the naive triple loop.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for kk in 0..k {
                acc += a[i * k + kk] * b[kk * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// Elementwise sum, one scalar at a time.
pub fn add_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Mean absolute difference between two equally sized buffers.
pub fn l1_mean(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += (a[i] - b[i]).abs();
    }
    acc / a.len() as f64
}

/// Direct 2-D convolution with odd kernel, zero padding and unit stride.
///
/// `x` is `(n, h, w, cin)`, `weight` is `(kh, kw, cin, cout)`, `bias` is
/// `(cout)`. Output is `(n, h, w, cout)`. Six nested loops, no shortcuts.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_same(
    x: &[f64],
    weight: &[f64],
    bias: &[f64],
    n: usize,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    kh: usize,
    kw: usize,
) -> Vec<f64> {
    assert_eq!(x.len(), n * h * w * cin);
    assert_eq!(weight.len(), kh * kw * cin * cout);
    assert_eq!(bias.len(), cout);
    assert!(kh % 2 == 1 && kw % 2 == 1);
    let (ph, pw) = (kh / 2, kw / 2);
    let mut out = vec![0.0; n * h * w * cout];
    for b in 0..n {
        for i in 0..h {
            for j in 0..w {
                for co in 0..cout {
                    let mut acc = bias[co];
                    for u in 0..kh {
                        for v in 0..kw {
                            let si = i as isize + u as isize - ph as isize;
                            let sj = j as isize + v as isize - pw as isize;
                            if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                                continue; // zero padding
                            }
                            let (si, sj) = (si as usize, sj as usize);
                            for ci in 0..cin {
                                acc += x[((b * h + si) * w + sj) * cin + ci]
                                    * weight[((u * kw + v) * cin + ci) * cout + co];
                            }
                        }
                    }
                    out[((b * h + i) * w + j) * cout + co] = acc;
                }
            }
        }
    }
    out
}

/// Depthwise convolution with per-group one-hot kernels, the reference for
/// the spatial-shift operation.
///
/// Channels are split into `directions.len()` equal groups; group `g` gets a
/// `(2s+1) x (2s+1)` kernel that is zero everywhere except a single 1 placed
/// so that the group's content moves by `directions[g] = (dy, dx)`. Zero
/// padding at borders.
pub fn depthwise_shift(
    x: &[f64],
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    stride: usize,
    directions: &[(i32, i32)],
) -> Vec<f64> {
    let groups = directions.len();
    assert_eq!(x.len(), n * h * w * c);
    assert_eq!(c % groups, 0);
    let per = c / groups;
    let ksz = 2 * stride + 1;

    // Build the one-hot kernel per group: moving content by (dy, dx) under
    // correlation means the 1 sits at offset (-dy, -dx) from the center.
    let mut kernels = vec![vec![0.0; ksz * ksz]; groups];
    for (g, &(dy, dx)) in directions.iter().enumerate() {
        assert!(dy.unsigned_abs() as usize <= stride && dx.unsigned_abs() as usize <= stride);
        let u = (stride as i32 - dy) as usize;
        let v = (stride as i32 - dx) as usize;
        kernels[g][u * ksz + v] = 1.0;
    }

    let mut out = vec![0.0; x.len()];
    for b in 0..n {
        for i in 0..h {
            for j in 0..w {
                for ch in 0..c {
                    let ker = &kernels[ch / per];
                    let mut acc = 0.0;
                    for u in 0..ksz {
                        for v in 0..ksz {
                            let si = i as isize + u as isize - stride as isize;
                            let sj = j as isize + v as isize - stride as isize;
                            if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                                continue;
                            }
                            acc += ker[u * ksz + v]
                                * x[((b * h + si as usize) * w + sj as usize) * c + ch];
                        }
                    }
                    out[((b * h + i) * w + j) * c + ch] = acc;
                }
            }
        }
    }
    out
}

/// Dense all-pairs multi-head self-attention with a relative-position-bias
/// lookup per (query, key) pair: `softmax(q k^T / sqrt(d) + rpb) v`, heads
/// concatenated and projected.
///
/// `wq`, `wk`, `wv`, `wo` are `(c, c)`; `bo` is `(c)`; `rpb` is
/// `(heads, 2*kernel-1, 2*kernel-1)` indexed by the key's spatial offset
/// from the query. Intended for small images where every offset fits the
/// table, i.e. `height, width <= kernel`. O((HW)^2), f64 only.
#[allow(clippy::too_many_arguments)]
pub fn global_self_attention(
    x: &[f64],
    wq: &[f64],
    wk: &[f64],
    wv: &[f64],
    wo: &[f64],
    bo: &[f64],
    rpb: &[f64],
    n: usize,
    height: usize,
    width: usize,
    c: usize,
    heads: usize,
    kernel: usize,
) -> Vec<f64> {
    assert_eq!(x.len(), n * height * width * c);
    assert_eq!(c % heads, 0);
    let d = c / heads;
    let side = 2 * kernel - 1;
    assert_eq!(rpb.len(), heads * side * side);
    let hw = height * width;
    let scale = 1.0 / (d as f64).sqrt();

    let mut out = vec![0.0; x.len()];
    for b in 0..n {
        let xb = &x[b * hw * c..(b + 1) * hw * c];
        // Per-pixel projections.
        let q = matmul(xb, wq, hw, c, c);
        let k = matmul(xb, wk, hw, c, c);
        let v = matmul(xb, wv, hw, c, c);

        let mut concat = vec![0.0; hw * c];
        for hd in 0..heads {
            for qi in 0..height {
                for qj in 0..width {
                    let qp = qi * width + qj;
                    // Logits against every position.
                    let mut logits = vec![0.0; hw];
                    for ti in 0..height {
                        for tj in 0..width {
                            let tp = ti * width + tj;
                            let mut dot = 0.0;
                            for e in 0..d {
                                dot += q[qp * c + hd * d + e] * k[tp * c + hd * d + e];
                            }
                            let oi = (ti as isize - qi as isize + kernel as isize - 1) as usize;
                            let oj = (tj as isize - qj as isize + kernel as isize - 1) as usize;
                            logits[tp] = dot * scale + rpb[(hd * side + oi) * side + oj];
                        }
                    }
                    // Stable softmax.
                    let mut mx = f64::NEG_INFINITY;
                    for &l in &logits {
                        if l > mx {
                            mx = l;
                        }
                    }
                    let mut den = 0.0;
                    for l in logits.iter_mut() {
                        *l = (*l - mx).exp();
                        den += *l;
                    }
                    for e in 0..d {
                        let mut acc = 0.0;
                        for tp in 0..hw {
                            acc += logits[tp] / den * v[tp * c + hd * d + e];
                        }
                        concat[qp * c + hd * d + e] = acc;
                    }
                }
            }
        }
        let y = matmul(&concat, wo, hw, c, c);
        for p in 0..hw {
            for ch in 0..c {
                out[(b * hw + p) * c + ch] = y[p * c + ch] + bo[ch];
            }
        }
    }
    out
}

/// Central-difference gradient of a scalar function:
/// `g_i = (f(x + h e_i) - f(x - h e_i)) / (2h)`.
pub fn central_diff<F>(mut f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut work = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = work[i];
        work[i] = orig + step;
        let fp = f(&work);
        work[i] = orig - step;
        let fm = f(&work);
        work[i] = orig;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

/// Catmull-Rom cubic kernel (a = -0.5).
pub fn cubic_kernel(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        a * (((t - 5.0) * t + 8.0) * t - 4.0)
    } else {
        0.0
    }
}

/// Direct (non-separated) bicubic resize: every output pixel is a normalized
/// 2-D weighted sum over the full support, with kernel width stretched by the
/// scale factor when downscaling and source indices clamped at the edges.
pub fn bicubic_resize(
    img: &[f64],
    h: usize,
    w: usize,
    c: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    assert_eq!(img.len(), h * w * c);
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    // Antialiasing: widen the kernel by the scale factor when shrinking.
    let fy = sy.max(1.0);
    let fx = sx.max(1.0);
    let ry = (2.0 * fy).ceil() as isize;
    let rx = (2.0 * fx).ceil() as isize;

    let mut out = vec![0.0; out_h * out_w * c];
    for oy in 0..out_h {
        let cy = (oy as f64 + 0.5) * sy - 0.5;
        let iy = cy.floor() as isize;
        for ox in 0..out_w {
            let cx = (ox as f64 + 0.5) * sx - 0.5;
            let ix = cx.floor() as isize;
            for ch in 0..c {
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for dy in -ry + 1..=ry {
                    let syi = iy + dy;
                    let wy = cubic_kernel((syi as f64 - cy) / fy);
                    if wy == 0.0 {
                        continue;
                    }
                    let syi = syi.clamp(0, h as isize - 1) as usize;
                    for dx in -rx + 1..=rx {
                        let sxi = ix + dx;
                        let wx = cubic_kernel((sxi as f64 - cx) / fx);
                        if wx == 0.0 {
                            continue;
                        }
                        let sxi = sxi.clamp(0, w as isize - 1) as usize;
                        acc += wy * wx * img[(syi * w + sxi) * c + ch];
                        wsum += wy * wx;
                    }
                }
                out[(oy * out_w + ox) * c + ch] = acc / wsum;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_hand_case() {
        // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
        let c = matmul(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0], 2, 2, 2);
        assert_eq!(c, vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn identity_kernel_conv_is_identity() {
        // 1x1 kernel with identity channel mixing leaves the input untouched.
        let x: Vec<f64> = (0..2 * 3 * 3 * 2).map(|i| i as f64 * 0.37 - 2.0).collect();
        let mut weight = vec![0.0; 2 * 2];
        weight[0] = 1.0; // (0,0,ci=0,co=0)
        weight[3] = 1.0; // (0,0,ci=1,co=1)
        let y = conv2d_same(&x, &weight, &[0.0, 0.0], 2, 3, 3, 2, 2, 1, 1);
        assert_eq!(y, x);
    }

    #[test]
    fn shift_oracle_zero_direction_is_identity() {
        let x: Vec<f64> = (0..4 * 4 * 2).map(|i| (i as f64).sin()).collect();
        let y = depthwise_shift(&x, 1, 4, 4, 2, 1, &[(0, 0), (0, 0)]);
        assert_eq!(y, x);
    }

    #[test]
    fn central_diff_quadratic() {
        // f(x) = sum x^2 at [1, 2] -> [2, 4]
        let g = central_diff(|v| v.iter().map(|x| x * x).sum(), &[1.0, 2.0], 1e-5);
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn bicubic_same_size_is_identity() {
        let img: Vec<f64> = (0..5 * 4 * 3).map(|i| (i as f64 * 0.11).cos()).collect();
        let out = bicubic_resize(&img, 5, 4, 3, 5, 4);
        for (a, b) in img.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_kernel_partition_points() {
        assert_eq!(cubic_kernel(0.0), 1.0);
        assert_eq!(cubic_kernel(1.0), 0.0);
        assert_eq!(cubic_kernel(2.0), 0.0);
    }
}
