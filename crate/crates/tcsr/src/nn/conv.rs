use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{dot_unrolled, Scalar, Tensor};

/// Weights of a same-padding 2-D convolution.
///
/// `weight` is `(kh, kw, c_in, c_out)`, `bias` is `(c_out)`. Kernel extents
/// must be odd so the output keeps the input's spatial size.
#[derive(Debug, Clone)]
pub struct ConvParams<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients mirroring [`ConvParams`].
#[derive(Debug, Clone)]
pub struct ConvGrads<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.rank() != 4 {
            return Err(Error::shape("conv2d", "weight must be (kh, kw, c_in, c_out)"));
        }
        let (kh, kw, cout) = (weight.shape()[0], weight.shape()[1], weight.shape()[3]);
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::Config(format!(
                "conv kernel extents must be odd, got {kh}x{kw}"
            )));
        }
        if bias.shape() != [cout] {
            return Err(Error::shape("conv2d", "bias length must equal c_out"));
        }
        Ok(ConvParams { weight, bias })
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.shape()[0], self.weight.shape()[1])
    }

    pub fn channels(&self) -> (usize, usize) {
        (self.weight.shape()[2], self.weight.shape()[3])
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.numel()
    }
}

/// 2-D convolution with zero padding of `(k-1)/2` per side, preserving the
/// spatial extent. `x` is `(n, h, w, c_in)`.
pub fn conv2d_same<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    let s = x.shape4()?;
    let (kh, kw) = p.kernel();
    let (cin, cout) = p.channels();
    if s.c != cin {
        return Err(Error::shape(
            "conv2d_same",
            format!("input has {} channels, weight expects {cin}", s.c),
        ));
    }
    let (ph, pw) = (kh / 2, kw / 2);
    let (h, w) = (s.h, s.w);
    let xd = x.data();
    let wd = p.weight.data();
    let bd = p.bias.data();

    let mut out = Tensor::zeros(&[s.n, h, w, cout]);
    out.data_mut()
        .par_chunks_mut(w * cout)
        .enumerate()
        .for_each(|(row, orow)| {
            let (b, i) = (row / h, row % h);
            for j in 0..w {
                let opx = &mut orow[j * cout..(j + 1) * cout];
                opx.copy_from_slice(bd);
                for u in 0..kh {
                    let si = i as isize + u as isize - ph as isize;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    for v in 0..kw {
                        let sj = j as isize + v as isize - pw as isize;
                        if sj < 0 || sj >= w as isize {
                            continue;
                        }
                        let xpx = ((b * h + si as usize) * w + sj as usize) * cin;
                        for ci in 0..cin {
                            let xv = xd[xpx + ci];
                            let wrow = &wd[((u * kw + v) * cin + ci) * cout..][..cout];
                            for (o, &wv) in opx.iter_mut().zip(wrow) {
                                *o += wv * xv;
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients of [`conv2d_same`] with respect to the input and parameters.
pub fn conv2d_same_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, ConvGrads<T>)> {
    let s = x.shape4()?;
    let (kh, kw) = p.kernel();
    let (cin, cout) = p.channels();
    if grad_out.shape() != [s.n, s.h, s.w, cout] {
        return Err(Error::shape(
            "conv2d_same_backward",
            format!("grad shape {:?} does not match forward output", grad_out.shape()),
        ));
    }
    let (ph, pw) = (kh / 2, kw / 2);
    let (h, w) = (s.h, s.w);
    let xd = x.data();
    let wd = p.weight.data();
    let gd = grad_out.data();

    // grad bias: plain sum over all output positions.
    let mut gbias = Tensor::zeros(&[cout]);
    {
        let gb = gbias.data_mut();
        for px in gd.chunks_exact(cout) {
            for (o, &g) in gb.iter_mut().zip(px) {
                *o += g;
            }
        }
    }

    // grad weight: each (u, v) tap owns a disjoint slice, reductions over
    // (b, i, j) run in fixed order inside it.
    let mut gweight = Tensor::zeros(p.weight.shape());
    gweight
        .data_mut()
        .par_chunks_mut(cin * cout)
        .enumerate()
        .for_each(|(tap, gw)| {
            let (u, v) = (tap / kw, tap % kw);
            for b in 0..s.n {
                for i in 0..h {
                    let si = i as isize + u as isize - ph as isize;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    for j in 0..w {
                        let sj = j as isize + v as isize - pw as isize;
                        if sj < 0 || sj >= w as isize {
                            continue;
                        }
                        let xpx = ((b * h + si as usize) * w + sj as usize) * cin;
                        let gpx = ((b * h + i) * w + j) * cout;
                        for ci in 0..cin {
                            let xv = xd[xpx + ci];
                            let grow = &gd[gpx..gpx + cout];
                            let wrow = &mut gw[ci * cout..(ci + 1) * cout];
                            for (o, &g) in wrow.iter_mut().zip(grow) {
                                *o += g * xv;
                            }
                        }
                    }
                }
            }
        });

    // grad input: correlate grad_out with the kernel reflected in space.
    let mut gx = Tensor::zeros(x.shape());
    gx.data_mut()
        .par_chunks_mut(w * cin)
        .enumerate()
        .for_each(|(row, grow)| {
            let (b, a) = (row / h, row % h);
            for bcol in 0..w {
                let gpx = &mut grow[bcol * cin..(bcol + 1) * cin];
                for u in 0..kh {
                    let i = a as isize - u as isize + ph as isize;
                    if i < 0 || i >= h as isize {
                        continue;
                    }
                    for v in 0..kw {
                        let j = bcol as isize - v as isize + pw as isize;
                        if j < 0 || j >= w as isize {
                            continue;
                        }
                        let gopx = ((b * h + i as usize) * w + j as usize) * cout;
                        let gorow = &gd[gopx..gopx + cout];
                        for (ci, o) in gpx.iter_mut().enumerate() {
                            let wrow = &wd[((u * kw + v) * cin + ci) * cout..][..cout];
                            *o += dot_unrolled(wrow, gorow);
                        }
                    }
                }
            }
        });

    Ok((
        gx,
        ConvGrads {
            weight: gweight,
            bias: gbias,
        },
    ))
}
