use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Catmull-Rom cubic kernel (a = -0.5).
fn cubic(t: f64) -> f64 {
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

/// Sampling taps for one axis: for every output index, the clamped source
/// indices and normalized weights. When shrinking, the kernel is stretched
/// by the scale factor so high frequencies are filtered out rather than
/// aliased.
fn axis_taps(in_len: usize, out_len: usize) -> Vec<(usize, Vec<(usize, f64)>)> {
    let scale = in_len as f64 / out_len as f64;
    let support = scale.max(1.0);
    let radius = (2.0 * support).ceil() as isize;
    (0..out_len)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale - 0.5;
            let base = center.floor() as isize;
            let mut taps = Vec::new();
            let mut wsum = 0.0;
            for d in -radius + 1..=radius {
                let src = base + d;
                let weight = cubic((src as f64 - center) / support);
                if weight == 0.0 {
                    continue;
                }
                let src = src.clamp(0, in_len as isize - 1) as usize;
                taps.push((src, weight));
                wsum += weight;
            }
            for (_, w) in taps.iter_mut() {
                *w /= wsum;
            }
            (o, taps)
        })
        .collect()
}

/// Separable bicubic resize of `(n, h, w, c)` to `(n, out_h, out_w, c)`:
/// Catmull-Rom kernel, antialiased when downscaling, edge-clamped sampling.
/// Weights per output pixel sum to one, so constant images stay constant.
pub fn bicubic_resize<T: Scalar>(img: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let s = img.shape4()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::Config("resize target must be at least 1x1".into()));
    }
    let (n, h, w, c) = (s.n, s.h, s.w, s.c);

    // Horizontal pass: (n, h, w, c) -> (n, h, out_w, c).
    let wtaps = axis_taps(w, out_w);
    let mut mid = Tensor::<T>::zeros(&[n, h, out_w, c]);
    {
        let src = img.data();
        let dst = mid.data_mut();
        for b in 0..n {
            for i in 0..h {
                let in_row = &src[(b * h + i) * w * c..(b * h + i + 1) * w * c];
                let out_row = &mut dst[(b * h + i) * out_w * c..(b * h + i + 1) * out_w * c];
                for (o, taps) in &wtaps {
                    let px = &mut out_row[o * c..(o + 1) * c];
                    for ch in px.iter_mut() {
                        *ch = T::ZERO;
                    }
                    for &(sj, wt) in taps {
                        let wt = T::from_f64(wt);
                        let spx = &in_row[sj * c..(sj + 1) * c];
                        for (d, &v) in px.iter_mut().zip(spx) {
                            *d += v * wt;
                        }
                    }
                }
            }
        }
    }

    // Vertical pass: (n, h, out_w, c) -> (n, out_h, out_w, c).
    let htaps = axis_taps(h, out_h);
    let mut out = Tensor::<T>::zeros(&[n, out_h, out_w, c]);
    {
        let src = mid.data();
        let dst = out.data_mut();
        let row_len = out_w * c;
        for b in 0..n {
            for (o, taps) in &htaps {
                let out_row = &mut dst[(b * out_h + o) * row_len..(b * out_h + o + 1) * row_len];
                for v in out_row.iter_mut() {
                    *v = T::ZERO;
                }
                for &(si, wt) in taps {
                    let wt = T::from_f64(wt);
                    let in_row = &src[(b * h + si) * row_len..(b * h + si + 1) * row_len];
                    for (d, &v) in out_row.iter_mut().zip(in_row) {
                        *d += v * wt;
                    }
                }
            }
        }
    }
    Ok(out)
}
