use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Rearrange `(n, h, w, r*r*c)` into `(n, r*h, r*w, c)`.
///
/// Channel block `(dy*r + dx)*c .. +c` of input pixel `(i, j)` becomes output
/// pixel `(r*i + dy, r*j + dx)`; for a `(1, 1, 4)` input `[a, b, c, d]` with
/// `r = 2` the output grid reads `[[a, b], [c, d]]`.
pub fn pixelshuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let s = x.shape4()?;
    if r == 0 || s.c % (r * r) != 0 {
        return Err(Error::shape(
            "pixelshuffle",
            format!("{} channels not divisible by r^2 = {}", s.c, r * r),
        ));
    }
    if r == 1 {
        return Ok(x.clone());
    }
    let c = s.c / (r * r);
    let mut out = Tensor::zeros(&[s.n, r * s.h, r * s.w, c]);
    let (oh, ow) = (r * s.h, r * s.w);
    let xd = x.data();
    let od = out.data_mut();
    for b in 0..s.n {
        for i in 0..s.h {
            for j in 0..s.w {
                let xpx = ((b * s.h + i) * s.w + j) * s.c;
                for dy in 0..r {
                    for dx in 0..r {
                        let opx = ((b * oh + r * i + dy) * ow + (r * j + dx)) * c;
                        let block = (dy * r + dx) * c;
                        od[opx..opx + c].copy_from_slice(&xd[xpx + block..xpx + block + c]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`pixelshuffle`]: `(n, r*h, r*w, c)` back to
/// `(n, h, w, r*r*c)`.
pub fn pixelunshuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let s = x.shape4()?;
    if r == 0 || s.h % r != 0 || s.w % r != 0 {
        return Err(Error::shape(
            "pixelunshuffle",
            format!("spatial extents ({}, {}) not divisible by r = {r}", s.h, s.w),
        ));
    }
    if r == 1 {
        return Ok(x.clone());
    }
    let (h, w) = (s.h / r, s.w / r);
    let c_out = s.c * r * r;
    let mut out = Tensor::zeros(&[s.n, h, w, c_out]);
    let xd = x.data();
    let od = out.data_mut();
    for b in 0..s.n {
        for i in 0..h {
            for j in 0..w {
                let opx = ((b * h + i) * w + j) * c_out;
                for dy in 0..r {
                    for dx in 0..r {
                        let xpx = ((b * s.h + r * i + dy) * s.w + (r * j + dx)) * s.c;
                        let block = (dy * r + dx) * s.c;
                        od[opx + block..opx + block + s.c].copy_from_slice(&xd[xpx..xpx + s.c]);
                    }
                }
            }
        }
    }
    Ok(out)
}
