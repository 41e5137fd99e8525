//! Neighborhood attention: sliding-window multi-head self-attention with a
//! learnable relative position bias.
//!
//! Each query pixel attends to the k x k window of key/value pixels around
//! it. Near borders the window is translated inward so every query sees
//! exactly k^2 in-bounds keys; zero-padding the keys was rejected because
//! softmax would leak probability mass onto fabricated zeros.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{
    dot_unrolled, matmul_a_bt_into, matmul_at_b_into, matmul_into, CounterRng, Scalar, Tensor,
};

/// Projections and bias table for one attention layer.
///
/// `wq`, `wk`, `wv`, `wo` are `(c, c)`; the query/key/value projections carry
/// no bias, the output projection does. `rpb` is `(heads, 2k-1, 2k-1)`,
/// indexed by the key's offset from the query plus `k-1`; clamped windows
/// keep offsets within `±(k-1)`, which the table covers exactly.
#[derive(Debug, Clone)]
pub struct NaParams<T: Scalar> {
    pub wq: Tensor<T>,
    pub wk: Tensor<T>,
    pub wv: Tensor<T>,
    pub wo: Tensor<T>,
    pub bo: Tensor<T>,
    pub rpb: Tensor<T>,
    pub heads: usize,
    pub kernel: usize,
}

/// Gradients mirroring [`NaParams`].
#[derive(Debug, Clone)]
pub struct NaGrads<T: Scalar> {
    pub wq: Tensor<T>,
    pub wk: Tensor<T>,
    pub wv: Tensor<T>,
    pub wo: Tensor<T>,
    pub bo: Tensor<T>,
    pub rpb: Tensor<T>,
}

/// Intermediates saved by [`na_forward_with_cache`] for the backward pass.
#[derive(Debug, Clone)]
pub struct NaCache<T: Scalar> {
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// Attention weights, `(n, h*w, heads, k*k)`.
    attn: Vec<T>,
    /// Head outputs before the output projection, `(n, h*w, c)`.
    concat: Vec<T>,
}

impl<T: Scalar> NaParams<T> {
    /// Truncated-normal (std 0.02) projections, zero output bias and bias
    /// table.
    pub fn init(c: usize, heads: usize, kernel: usize, rng: &mut CounterRng) -> Result<Self> {
        let side = 2 * kernel - 1;
        let p = NaParams {
            wq: rng.trunc_normal_tensor(&[c, c], 0.0, 0.02),
            wk: rng.trunc_normal_tensor(&[c, c], 0.0, 0.02),
            wv: rng.trunc_normal_tensor(&[c, c], 0.0, 0.02),
            wo: rng.trunc_normal_tensor(&[c, c], 0.0, 0.02),
            bo: Tensor::zeros(&[c]),
            rpb: Tensor::zeros(&[heads, side, side]),
            heads,
            kernel,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn channels(&self) -> usize {
        self.wq.shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel must be odd, got {}", self.kernel)));
        }
        if self.heads == 0 || !c.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "channels {c} not divisible by {} heads",
                self.heads
            )));
        }
        let side = 2 * self.kernel - 1;
        if self.rpb.shape() != [self.heads, side, side] {
            return Err(Error::shape(
                "na",
                format!("rpb must be ({}, {side}, {side})", self.heads),
            ));
        }
        for w in [&self.wq, &self.wk, &self.wv, &self.wo] {
            if w.shape() != [c, c] {
                return Err(Error::shape("na", "projection weights must be (c, c)"));
            }
        }
        Ok(())
    }

    /// Learnable scalars actually held by this layer (output bias included).
    pub fn param_count(&self) -> usize {
        4 * self.channels() * self.channels() + self.bo.numel() + self.rpb.numel()
    }
}

/// `4c^2 + heads*(2k-1)^2`: the projection term is independent of the kernel
/// size; only the bias table grows with `k` (bias-free form).
pub fn na_param_count(c: usize, heads: usize, kernel: usize) -> usize {
    4 * c * c + heads * (2 * kernel - 1) * (2 * kernel - 1)
}

/// Top-left corner of the k-wide window for query index `i` on an axis of
/// length `len`: centered, then translated inward at the borders.
#[inline]
pub fn window_origin(i: usize, kernel: usize, len: usize) -> usize {
    let half = kernel / 2;
    (i.saturating_sub(half)).min(len - kernel)
}

/// For every key index on an axis, the contiguous range (inclusive) of
/// query indices whose clamped window covers it.
fn inverse_window_ranges(len: usize, kernel: usize) -> Vec<(usize, usize)> {
    let mut lo = vec![usize::MAX; len];
    let mut hi = vec![0usize; len];
    for q in 0..len {
        let origin = window_origin(q, kernel, len);
        for key in origin..origin + kernel {
            if lo[key] == usize::MAX {
                lo[key] = q;
            }
            hi[key] = q;
        }
    }
    lo.into_iter().zip(hi).collect()
}

/// The k^2 key positions for query pixel `(i, j)` on an `h x w` grid,
/// row-major. Exactly centered for interior pixels, clamped at borders.
pub fn neighborhood_indices(
    i: usize,
    j: usize,
    kernel: usize,
    h: usize,
    w: usize,
) -> Result<Vec<(usize, usize)>> {
    if kernel.is_multiple_of(2) {
        return Err(Error::Config(format!("kernel must be odd, got {kernel}")));
    }
    if kernel > h.min(w) {
        return Err(Error::Config(format!(
            "kernel {kernel} exceeds image extent ({h}, {w})"
        )));
    }
    let (i0, j0) = (window_origin(i, kernel, h), window_origin(j, kernel, w));
    let mut out = Vec::with_capacity(kernel * kernel);
    for ki in i0..i0 + kernel {
        for kj in j0..j0 + kernel {
            out.push((ki, kj));
        }
    }
    Ok(out)
}

fn check_input<T: Scalar>(x: &Tensor<T>, p: &NaParams<T>) -> Result<(usize, usize, usize, usize)> {
    p.validate()?;
    let s = x.shape4()?;
    if s.c != p.channels() {
        return Err(Error::shape(
            "na_forward",
            format!("input has {} channels, params expect {}", s.c, p.channels()),
        ));
    }
    if p.kernel > s.h.min(s.w) {
        return Err(Error::Config(format!(
            "kernel {} exceeds image extent ({}, {})",
            p.kernel, s.h, s.w
        )));
    }
    Ok((s.n, s.h, s.w, s.c))
}

/// Attention for the queries of one image row; writes head outputs into
/// `concat_row` and, when given, the attention weights into `attn_row`.
/// Shared by the row-order and tiled forward paths so both produce
/// bit-identical results. Each window row of keys is one contiguous slice,
/// and all heads are handled per key to keep the inner loops dense.
#[allow(clippy::too_many_arguments)]
fn attend_row<T: Scalar>(
    q: &[T],
    k: &[T],
    v: &[T],
    rpb: &[T],
    concat_row: &mut [T],
    mut attn_row: Option<&mut [T]>,
    i: usize,
    h: usize,
    w: usize,
    c: usize,
    heads: usize,
    kernel: usize,
    j_range: std::ops::Range<usize>,
) {
    let d = c / heads;
    let side = 2 * kernel - 1;
    let kk = kernel * kernel;
    let scale = T::from_f64(1.0 / (d as f64).sqrt());
    let i0 = window_origin(i, kernel, h);
    // Per-head weight buffers, `[head][t]`.
    let mut logits = vec![T::ZERO; heads * kk];
    for j in j_range {
        let j0 = window_origin(j, kernel, w);
        let qpx = &q[(i * w + j) * c..][..c];
        let oj0 = j0 + kernel - 1 - j;
        for wi in 0..kernel {
            let ki = i0 + wi;
            let oi = ki + kernel - 1 - i;
            let krow = &k[(ki * w + j0) * c..][..kernel * c];
            for wj in 0..kernel {
                let key = &krow[wj * c..][..c];
                let t = wi * kernel + wj;
                for head in 0..heads {
                    let dot = dot_unrolled(&qpx[head * d..][..d], &key[head * d..][..d]);
                    logits[head * kk + t] =
                        rpb[(head * side + oi) * side + oj0 + wj] + dot * scale;
                }
            }
        }
        // Stable softmax per head, in place.
        for head in 0..heads {
            let lh = &mut logits[head * kk..(head + 1) * kk];
            let mut mx = lh[0];
            for &l in lh[1..].iter() {
                if l > mx {
                    mx = l;
                }
            }
            let mut den = T::ZERO;
            for l in lh.iter_mut() {
                *l = (*l - mx).exp();
                den += *l;
            }
            let inv_den = T::ONE / den;
            for l in lh.iter_mut() {
                *l *= inv_den;
            }
        }
        // Weighted sum of values, every head per key.
        let out_px = &mut concat_row[j * c..(j + 1) * c];
        for o in out_px.iter_mut() {
            *o = T::ZERO;
        }
        for wi in 0..kernel {
            let ki = i0 + wi;
            let vrow = &v[(ki * w + j0) * c..][..kernel * c];
            for wj in 0..kernel {
                let val = &vrow[wj * c..][..c];
                let t = wi * kernel + wj;
                for head in 0..heads {
                    let a = logits[head * kk + t];
                    let out = &mut out_px[head * d..head * d + d];
                    for (o, &vv) in out.iter_mut().zip(&val[head * d..head * d + d]) {
                        *o += a * vv;
                    }
                }
            }
        }
        if let Some(attn) = attn_row.as_deref_mut() {
            attn[j * heads * kk..(j + 1) * heads * kk].copy_from_slice(&logits);
        }
    }
}

fn project_qkv<T: Scalar>(x: &Tensor<T>, p: &NaParams<T>, m: usize, c: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut q = vec![T::ZERO; m * c];
    let mut k = vec![T::ZERO; m * c];
    let mut v = vec![T::ZERO; m * c];
    matmul_into(x.data(), p.wq.data(), &mut q, m, c, c);
    matmul_into(x.data(), p.wk.data(), &mut k, m, c, c);
    matmul_into(x.data(), p.wv.data(), &mut v, m, c, c);
    (q, k, v)
}

fn project_out<T: Scalar>(concat: &[T], p: &NaParams<T>, shape: &[usize], m: usize, c: usize) -> Tensor<T> {
    let mut y = Tensor::zeros(shape);
    matmul_into(concat, p.wo.data(), y.data_mut(), m, c, c);
    let bd = p.bo.data();
    for px in y.data_mut().chunks_exact_mut(c) {
        for (o, &b) in px.iter_mut().zip(bd) {
            *o += b;
        }
    }
    y
}

/// Sliding-window attention forward pass; output shape equals input shape.
pub fn na_forward<T: Scalar>(x: &Tensor<T>, p: &NaParams<T>) -> Result<Tensor<T>> {
    Ok(na_forward_with_cache(x, p)?.0)
}

/// Forward pass that additionally returns the intermediates needed by
/// [`na_backward_cached`].
pub fn na_forward_with_cache<T: Scalar>(
    x: &Tensor<T>,
    p: &NaParams<T>,
) -> Result<(Tensor<T>, NaCache<T>)> {
    let (n, h, w, c) = check_input(x, p)?;
    let hw = h * w;
    let m = n * hw;
    let kk = p.kernel * p.kernel;
    let (q, k, v) = project_qkv(x, p, m, c);

    let mut concat = vec![T::ZERO; m * c];
    let mut attn = vec![T::ZERO; m * p.heads * kk];
    concat
        .par_chunks_mut(w * c)
        .zip(attn.par_chunks_mut(w * p.heads * kk))
        .enumerate()
        .for_each(|(row, (crow, arow))| {
            let (b, i) = (row / h, row % h);
            attend_row(
                &q[b * hw * c..(b + 1) * hw * c],
                &k[b * hw * c..(b + 1) * hw * c],
                &v[b * hw * c..(b + 1) * hw * c],
                p.rpb.data(),
                crow,
                Some(arow),
                i,
                h,
                w,
                c,
                p.heads,
                p.kernel,
                0..w,
            );
        });

    let y = project_out(&concat, p, x.shape(), m, c);
    Ok((y, NaCache { q, k, v, attn, concat }))
}

/// Same computation as [`na_forward`] but traversing queries in square
/// tiles. Per-query arithmetic is shared with the row-order path, so the two
/// variants agree bit-for-bit.
pub fn na_forward_tiled<T: Scalar>(x: &Tensor<T>, p: &NaParams<T>, tile: usize) -> Result<Tensor<T>> {
    let (n, h, w, c) = check_input(x, p)?;
    if tile == 0 {
        return Err(Error::Config("tile must be >= 1".into()));
    }
    let hw = h * w;
    let m = n * hw;
    let (q, k, v) = project_qkv(x, p, m, c);

    let mut concat = vec![T::ZERO; m * c];
    for b in 0..n {
        let qb = &q[b * hw * c..(b + 1) * hw * c];
        let kb = &k[b * hw * c..(b + 1) * hw * c];
        let vb = &v[b * hw * c..(b + 1) * hw * c];
        let cb = &mut concat[b * hw * c..(b + 1) * hw * c];
        for ti in (0..h).step_by(tile) {
            for tj in (0..w).step_by(tile) {
                for i in ti..(ti + tile).min(h) {
                    let crow = &mut cb[i * w * c..(i + 1) * w * c];
                    attend_row(
                        qb,
                        kb,
                        vb,
                        p.rpb.data(),
                        crow,
                        None,
                        i,
                        h,
                        w,
                        c,
                        p.heads,
                        p.kernel,
                        tj..(tj + tile).min(w),
                    );
                }
            }
        }
    }
    Ok(project_out(&concat, p, x.shape(), m, c))
}

/// Reverse-mode gradients of [`na_forward`], recomputing the forward
/// intermediates. See [`na_backward_cached`] for the training path.
pub fn na_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &NaParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, NaGrads<T>)> {
    let (_, cache) = na_forward_with_cache(x, p)?;
    na_backward_cached(x, p, &cache, grad_out)
}

/// Reverse-mode gradients using the cache from [`na_forward_with_cache`].
///
/// The bias-table gradient is accumulated per image row and merged in fixed
/// row order, and the key/value scatter is re-expressed as a gather over the
/// queries covering each key, so results are identical regardless of thread
/// count.
pub fn na_backward_cached<T: Scalar>(
    x: &Tensor<T>,
    p: &NaParams<T>,
    cache: &NaCache<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, NaGrads<T>)> {
    let (n, h, w, c) = check_input(x, p)?;
    if grad_out.shape() != x.shape() {
        return Err(Error::shape("na_backward", "grad shape must match forward output"));
    }
    let hw = h * w;
    let m = n * hw;
    let heads = p.heads;
    let d = c / heads;
    let kernel = p.kernel;
    let kk = kernel * kernel;
    let side = 2 * kernel - 1;
    let scale = T::from_f64(1.0 / (d as f64).sqrt());

    // Output projection.
    let mut g_concat = vec![T::ZERO; m * c];
    matmul_a_bt_into(grad_out.data(), p.wo.data(), &mut g_concat, m, c, c);
    let mut gwo = Tensor::zeros(&[c, c]);
    matmul_at_b_into(&cache.concat, grad_out.data(), gwo.data_mut(), c, m, c);
    let mut gbo = Tensor::zeros(&[c]);
    {
        let gb = gbo.data_mut();
        for px in grad_out.data().chunks_exact(c) {
            for (o, &g) in gb.iter_mut().zip(px) {
                *o += g;
            }
        }
    }

    // Phase 1, parallel over image rows: softmax backward. Produces the
    // logit gradients, the query gradient, and per-row bias-table partials.
    let mut g_logits = vec![T::ZERO; m * heads * kk];
    let mut gq = vec![T::ZERO; m * c];
    let rpb_partials: Vec<Vec<T>> = g_logits
        .par_chunks_mut(w * heads * kk)
        .zip(gq.par_chunks_mut(w * c))
        .enumerate()
        .map(|(row, (glrow, gqrow))| {
            let (b, i) = (row / h, row % h);
            let kb = &cache.k[b * hw * c..(b + 1) * hw * c];
            let vb = &cache.v[b * hw * c..(b + 1) * hw * c];
            let i0 = window_origin(i, kernel, h);
            let mut rpb_part = vec![T::ZERO; heads * side * side];
            for j in 0..w {
                let j0 = window_origin(j, kernel, w);
                let px = (b * hw + i * w + j) * c;
                let go = &g_concat[px..px + c];
                let abase = (b * hw + i * w + j) * heads * kk;
                let a = &cache.attn[abase..abase + heads * kk];
                let gl = &mut glrow[j * heads * kk..(j + 1) * heads * kk];
                // grad wrt attention weights: one sweep over the keys.
                for wi in 0..kernel {
                    let vrow = &vb[((i0 + wi) * w + j0) * c..][..kernel * c];
                    for wj in 0..kernel {
                        let val = &vrow[wj * c..][..c];
                        let t = wi * kernel + wj;
                        for head in 0..heads {
                            gl[head * kk + t] =
                                dot_unrolled(&go[head * d..][..d], &val[head * d..][..d]);
                        }
                    }
                }
                // Softmax backward per head.
                for head in 0..heads {
                    let ah = &a[head * kk..(head + 1) * kk];
                    let glh = &mut gl[head * kk..(head + 1) * kk];
                    let mut dot_sum = T::ZERO;
                    for t in 0..kk {
                        dot_sum += ah[t] * glh[t];
                    }
                    for t in 0..kk {
                        glh[t] = ah[t] * (glh[t] - dot_sum);
                    }
                }
                // Query gradient and bias-table partial, second key sweep.
                let gqpx = &mut gqrow[j * c..(j + 1) * c];
                let oj0 = j0 + kernel - 1 - j;
                for wi in 0..kernel {
                    let ki = i0 + wi;
                    let oi = ki + kernel - 1 - i;
                    let krow = &kb[(ki * w + j0) * c..][..kernel * c];
                    for wj in 0..kernel {
                        let key = &krow[wj * c..][..c];
                        let t = wi * kernel + wj;
                        for head in 0..heads {
                            let glt = gl[head * kk + t];
                            rpb_part[(head * side + oi) * side + oj0 + wj] += glt;
                            let gs = glt * scale;
                            let gqh = &mut gqpx[head * d..head * d + d];
                            for (o, &kv) in gqh.iter_mut().zip(&key[head * d..head * d + d]) {
                                *o += gs * kv;
                            }
                        }
                    }
                }
            }
            rpb_part
        })
        .collect();

    let mut grpb = Tensor::zeros(p.rpb.shape());
    for part in &rpb_partials {
        for (o, &v) in grpb.data_mut().iter_mut().zip(part) {
            *o += v;
        }
    }

    // Phase 2, parallel over key rows: gather grad_k and grad_v from every
    // query whose (clamped) window covers the key.
    let row_ranges = inverse_window_ranges(h, kernel);
    let col_ranges = inverse_window_ranges(w, kernel);
    let mut gk = vec![T::ZERO; m * c];
    let mut gv = vec![T::ZERO; m * c];
    gk.par_chunks_mut(w * c)
        .zip(gv.par_chunks_mut(w * c))
        .enumerate()
        .for_each(|(row, (gkrow, gvrow))| {
            let (b, ki) = (row / h, row % h);
            let qb = &cache.q[b * hw * c..(b + 1) * hw * c];
            let (qi_lo, qi_hi) = row_ranges[ki];
            for kj in 0..w {
                let (qj_lo, qj_hi) = col_ranges[kj];
                let gkpx = &mut gkrow[kj * c..(kj + 1) * c];
                let gvpx = &mut gvrow[kj * c..(kj + 1) * c];
                for qi in qi_lo..=qi_hi {
                    let i0 = window_origin(qi, kernel, h);
                    let trow = (ki - i0) * kernel;
                    for qj in qj_lo..=qj_hi {
                        let j0 = window_origin(qj, kernel, w);
                        let t = trow + (kj - j0);
                        let qpx = &qb[(qi * w + qj) * c..][..c];
                        let gopx = &g_concat[(b * hw + qi * w + qj) * c..][..c];
                        let base = (b * hw + qi * w + qj) * heads * kk + t;
                        for head in 0..heads {
                            let glt = g_logits[base + head * kk] * scale;
                            let at = cache.attn[base + head * kk];
                            let gkh = &mut gkpx[head * d..head * d + d];
                            for (o, &qv) in gkh.iter_mut().zip(&qpx[head * d..head * d + d]) {
                                *o += glt * qv;
                            }
                            let gvh = &mut gvpx[head * d..head * d + d];
                            for (o, &g) in gvh.iter_mut().zip(&gopx[head * d..head * d + d]) {
                                *o += at * g;
                            }
                        }
                    }
                }
            }
        });

    // Back through the projections.
    let mut gx = Tensor::zeros(x.shape());
    matmul_a_bt_into(&gq, p.wq.data(), gx.data_mut(), m, c, c);
    matmul_a_bt_into(&gk, p.wk.data(), gx.data_mut(), m, c, c);
    matmul_a_bt_into(&gv, p.wv.data(), gx.data_mut(), m, c, c);

    let mut gwq = Tensor::zeros(&[c, c]);
    let mut gwk = Tensor::zeros(&[c, c]);
    let mut gwv = Tensor::zeros(&[c, c]);
    matmul_at_b_into(x.data(), &gq, gwq.data_mut(), c, m, c);
    matmul_at_b_into(x.data(), &gk, gwk.data_mut(), c, m, c);
    matmul_at_b_into(x.data(), &gv, gwv.data_mut(), c, m, c);

    Ok((
        gx,
        NaGrads {
            wq: gwq,
            wk: gwk,
            wv: gwv,
            wo: gwo,
            bo: gbo,
            rpb: grpb,
        },
    ))
}
