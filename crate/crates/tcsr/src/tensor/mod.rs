//! Dense row-major tensors and the primitive numeric operations everything
//! else builds on.
//!
//! Layout convention throughout the crate: `(batch, height, width, channel)`
//! with the last axis fastest, so a pixel's channel vector is contiguous.

mod rng;
mod scalar;

pub use rng::{rng_normal, CounterRng};
pub use scalar::{Dtype, Scalar};

use crate::error::{Error, Result};

/// Dense rank-N array of `T` with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// Four-axis shape `(batch, height, width, channel)` for image-like tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape4 {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape4 {
    pub fn new(n: usize, h: usize, w: usize, c: usize) -> Result<Self> {
        if n == 0 || h == 0 || w == 0 || c == 0 {
            return Err(Error::Config(format!(
                "all extents of a model input must be >= 1, got ({n}, {h}, {w}, {c})"
            )));
        }
        Ok(Shape4 { n, h, w, c })
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.h, self.w, self.c]
    }

    pub fn numel(&self) -> usize {
        self.n * self.h * self.w * self.c
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::ZERO; shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::shape(
                "from_vec",
                format!("shape {shape:?} needs {expect} values, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(&self.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Interpret as `(batch, height, width, channel)`.
    pub fn shape4(&self) -> Result<Shape4> {
        if self.rank() != 4 {
            return Err(Error::shape(
                "shape4",
                format!("expected rank 4, got shape {:?}", self.shape),
            ));
        }
        Shape4::new(self.shape[0], self.shape[1], self.shape[2], self.shape[3])
    }

    /// Same data, new shape (element count must match).
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {:?} as {shape:?}", self.shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T + Send + Sync) -> Self {
        use rayon::prelude::*;
        let data = if self.data.len() >= 65_536 {
            self.data.par_iter().map(|&v| f(v)).collect()
        } else {
            self.data.iter().map(|&v| f(v)).collect()
        };
        Tensor {
            shape: self.shape.clone(),
            data,
        }
    }

    /// Elementwise combine with `other`, which must either match `self`'s
    /// shape or be broadcastable along trailing axes (its shape equal to a
    /// suffix of `self`'s, e.g. a `(c)` bias against `(n, h, w, c)`).
    pub fn zip_with(&self, other: &Tensor<T>, f: impl Fn(T, T) -> T + Send + Sync) -> Result<Self> {
        use rayon::prelude::*;
        if self.shape == other.shape {
            let data = if self.data.len() >= 65_536 {
                self.data
                    .par_iter()
                    .zip(&other.data)
                    .map(|(&a, &b)| f(a, b))
                    .collect()
            } else {
                self.data
                    .iter()
                    .zip(&other.data)
                    .map(|(&a, &b)| f(a, b))
                    .collect()
            };
            return Ok(Tensor {
                shape: self.shape.clone(),
                data,
            });
        }
        // Trailing-axis broadcast.
        let k = other.rank();
        if k <= self.rank() && self.shape[self.rank() - k..] == other.shape[..] {
            let block = other.data.len().max(1);
            let data = self
                .data
                .iter()
                .enumerate()
                .map(|(i, &a)| f(a, other.data[i % block]))
                .collect();
            return Ok(Tensor {
                shape: self.shape.clone(),
                data,
            });
        }
        Err(Error::shape(
            "zip_with",
            format!(
                "{:?} vs {:?}: not equal and not a trailing-axis broadcast",
                self.shape, other.shape
            ),
        ))
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn div(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a / b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// True when every element is finite. Library-produced tensors are
    /// expected to stay finite; callers treat a `false` here as an error
    /// state.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Softmax along the last axis with max-subtraction for stability; every
    /// last-axis slice of the output sums to 1.
    pub fn softmax_lastdim(&self) -> Result<Self> {
        let d = *self
            .shape
            .last()
            .ok_or_else(|| Error::shape("softmax_lastdim", "rank-0 tensor".to_string()))?;
        if d == 0 {
            return Err(Error::shape("softmax_lastdim", "empty last axis".to_string()));
        }
        let mut out = self.data.clone();
        for row in out.chunks_mut(d) {
            let mut mx = row[0];
            for &v in row.iter() {
                if v > mx {
                    mx = v;
                }
            }
            let mut den = T::ZERO;
            for v in row.iter_mut() {
                *v = (*v - mx).exp();
                den += *v;
            }
            for v in row.iter_mut() {
                *v /= den;
            }
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: out,
        })
    }

    /// Zero-pad: `pads[axis] = (before, after)`.
    pub fn pad_zero(&self, pads: &[(usize, usize)]) -> Result<Self> {
        if pads.len() != self.rank() {
            return Err(Error::shape(
                "pad_zero",
                format!("{} pad pairs for rank {}", pads.len(), self.rank()),
            ));
        }
        let out_shape: Vec<usize> = self
            .shape
            .iter()
            .zip(pads)
            .map(|(&s, &(b, a))| s + b + a)
            .collect();
        let mut out = Tensor::zeros(&out_shape);
        let in_strides = strides(&self.shape);
        let out_strides = strides(&out_shape);
        let mut idx = vec![0usize; self.rank()];
        for (flat, &v) in self.data.iter().enumerate() {
            unflatten(flat, &in_strides, &mut idx);
            let mut o = 0;
            for ax in 0..idx.len() {
                o += (idx[ax] + pads[ax].0) * out_strides[ax];
            }
            out.data[o] = v;
        }
        Ok(out)
    }

    /// Extract `ranges[axis] = (start, end)` (end exclusive) along each axis.
    pub fn slice(&self, ranges: &[(usize, usize)]) -> Result<Self> {
        if ranges.len() != self.rank() {
            return Err(Error::shape(
                "slice",
                format!("{} ranges for rank {}", ranges.len(), self.rank()),
            ));
        }
        for (ax, &(s, e)) in ranges.iter().enumerate() {
            if s > e || e > self.shape[ax] {
                return Err(Error::shape(
                    "slice",
                    format!("range {s}..{e} out of bounds for axis {ax} (len {})", self.shape[ax]),
                ));
            }
        }
        let out_shape: Vec<usize> = ranges.iter().map(|&(s, e)| e - s).collect();
        let mut out = Tensor::zeros(&out_shape);
        let in_strides = strides(&self.shape);
        let out_strides = strides(&out_shape);
        let mut idx = vec![0usize; self.rank()];
        for flat in 0..out.data.len() {
            unflatten(flat, &out_strides, &mut idx);
            let mut i = 0;
            for ax in 0..idx.len() {
                i += (idx[ax] + ranges[ax].0) * in_strides[ax];
            }
            out.data[flat] = self.data[i];
        }
        Ok(out)
    }

    /// Reorder axes: output axis `a` is input axis `order[a]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.rank() {
            return Err(Error::shape(
                "permute",
                format!("order {order:?} for rank {}", self.rank()),
            ));
        }
        let mut seen = vec![false; order.len()];
        for &ax in order {
            if ax >= order.len() || seen[ax] {
                return Err(Error::shape("permute", format!("invalid axis order {order:?}")));
            }
            seen[ax] = true;
        }
        let out_shape: Vec<usize> = order.iter().map(|&ax| self.shape[ax]).collect();
        let mut out = Tensor::zeros(&out_shape);
        let in_strides = strides(&self.shape);
        let out_strides = strides(&out_shape);
        let mut idx = vec![0usize; self.rank()];
        for flat in 0..out.data.len() {
            unflatten(flat, &out_strides, &mut idx);
            let mut i = 0;
            for (a, &ax) in order.iter().enumerate() {
                i += idx[a] * in_strides[ax];
            }
            out.data[flat] = self.data[i];
        }
        Ok(out)
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::shape(
                "matmul",
                format!("need rank-2 operands, got {:?} x {:?}", self.shape, other.shape),
            ));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("inner dimensions disagree: {:?} x {:?}", self.shape, other.shape),
            ));
        }
        let mut out = Tensor::zeros(&[m, n]);
        matmul_into(&self.data, &other.data, &mut out.data, m, k, n);
        Ok(out)
    }

    pub fn to_f64(&self) -> Tensor<f64> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v.to_f64()).collect(),
        }
    }

    pub fn from_f64_tensor(t: &Tensor<f64>) -> Tensor<T> {
        Tensor {
            shape: t.shape.clone(),
            data: t.data.iter().map(|&v| T::from_f64(v)).collect(),
        }
    }
}

/// Row-major strides for `shape`.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        s[ax] = s[ax + 1] * shape[ax + 1];
    }
    s
}

fn unflatten(mut flat: usize, strides: &[usize], idx: &mut [usize]) {
    for ax in 0..strides.len() {
        idx[ax] = flat / strides[ax];
        flat %= strides[ax];
    }
}

/// `out[m][n] += a[m][k] * b[k][n]`, row-parallel, accumulation order fixed
/// per output row so results do not depend on thread count.
pub(crate) fn matmul_into<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    use rayon::prelude::*;
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let body = |(row, out_row): (usize, &mut [T])| {
        let a_row = &a[row * k..(row + 1) * k];
        for (kk, &av) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += bv * av;
            }
        }
    };
    if m * k * n >= 16_384 {
        out.par_chunks_mut(n).enumerate().for_each(body);
    } else {
        out.chunks_mut(n).enumerate().for_each(body);
    }
}

/// `out[m][n] += a^T[m][k] * b[k][n]` where `a` is stored `(k, m)`.
/// Used for weight gradients; same determinism guarantee as `matmul_into`.
pub(crate) fn matmul_at_b_into<T: Scalar>(
    a: &[T],
    b: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    use rayon::prelude::*;
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let body = |(row, out_row): (usize, &mut [T])| {
        for kk in 0..k {
            let av = a[kk * m + row];
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += bv * av;
            }
        }
    };
    if m * k * n >= 16_384 {
        out.par_chunks_mut(n).enumerate().for_each(body);
    } else {
        out.chunks_mut(n).enumerate().for_each(body);
    }
}

/// Dot product with four independent accumulators so the reduction is not
/// serialized on floating-point add latency. Summation order is fixed, so
/// results are still deterministic.
#[inline]
pub(crate) fn dot_unrolled<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::ZERO; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let (ac, bc) = (&a[4 * i..4 * i + 4], &b[4 * i..4 * i + 4]);
        acc[0] += ac[0] * bc[0];
        acc[1] += ac[1] * bc[1];
        acc[2] += ac[2] * bc[2];
        acc[3] += ac[3] * bc[3];
    }
    let mut tail = T::ZERO;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// `out[m][n] += a[m][k] * b^T[k][n]` where `b` is stored `(n, k)`.
pub(crate) fn matmul_a_bt_into<T: Scalar>(
    a: &[T],
    b: &[T],
    out: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    use rayon::prelude::*;
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    let body = |(row, out_row): (usize, &mut [T])| {
        let a_row = &a[row * k..(row + 1) * k];
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            *o += dot_unrolled(a_row, b_row);
        }
    };
    if m * k * n >= 16_384 {
        out.par_chunks_mut(n).enumerate().for_each(body);
    } else {
        out.chunks_mut(n).enumerate().for_each(body);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_matches_definition() {
        let a = Tensor::from_vec(&[2], vec![1.0f64, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);
    }

    #[test]
    fn mul_by_zeros_annihilates() {
        let mut rng = CounterRng::new(7);
        let x = rng.normal_tensor::<f64>(&[3, 4], 0.0, 1.0);
        let z = x.zeros_like();
        assert_eq!(x.mul(&z).unwrap().data(), z.data());
    }

    #[test]
    fn add_matches_scalar_loop_oracle() {
        let mut rng = CounterRng::new(11);
        let x = rng.normal_tensor::<f64>(&[2, 3, 4], 0.0, 1.0);
        let y = rng.normal_tensor::<f64>(&[2, 3, 4], 0.0, 1.0);
        let got = x.add(&y).unwrap();
        let want = tcsr_oracles::add_slices(x.data(), y.data());
        assert_eq!(got.data(), want.as_slice());
    }

    #[test]
    fn broadcast_bias_over_trailing_axis() {
        let a = Tensor::from_vec(&[2, 2], vec![0.0f64, 0.0, 1.0, 1.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![10.0, 20.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[10.0, 20.0, 11.0, 21.0]);
    }

    #[test]
    fn broadcast_rejects_incompatible() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        let b = Tensor::<f64>::zeros(&[2]);
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn matmul_identity() {
        let a = Tensor::from_vec(&[2, 2], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let eye = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.matmul(&eye).unwrap(), a);
    }

    #[test]
    fn matmul_one_by_one() {
        let a = Tensor::from_vec(&[1, 1], vec![2.0f64]).unwrap();
        let b = Tensor::from_vec(&[1, 1], vec![3.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[6.0]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = CounterRng::new(3);
        let a = rng.normal_tensor::<f64>(&[5, 4], 0.0, 1.0);
        let b = rng.normal_tensor::<f64>(&[4, 3], 0.0, 1.0);
        let got = a.matmul(&b).unwrap();
        let want = tcsr_oracles::matmul(a.data(), b.data(), 5, 4, 3);
        for (g, w) in got.data().iter().zip(&want) {
            let rel = (g - w).abs() / g.abs().max(w.abs()).max(1e-8);
            assert!(rel < 1e-6, "got {g}, want {w}");
        }
    }

    #[test]
    fn matmul_rejects_dim_mismatch() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        let b = Tensor::<f64>::zeros(&[4, 2]);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn softmax_uniform() {
        let x = Tensor::from_vec(&[3], vec![0.0f64, 0.0, 0.0]).unwrap();
        let y = x.softmax_lastdim().unwrap();
        for &v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_single_element() {
        let x = Tensor::from_vec(&[1, 1], vec![5.0f64]).unwrap();
        assert_eq!(x.softmax_lastdim().unwrap().data(), &[1.0]);
    }

    #[test]
    fn softmax_shift_invariant_and_stable() {
        let big = Tensor::from_vec(&[2], vec![1000.0f64, 1000.5]).unwrap();
        let small = Tensor::from_vec(&[2], vec![0.0, 0.5]).unwrap();
        let yb = big.softmax_lastdim().unwrap();
        let ys = small.softmax_lastdim().unwrap();
        assert!(yb.all_finite());
        for (a, b) in yb.data().iter().zip(ys.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_f32() {
        let mut rng = CounterRng::new(5);
        let x = rng.normal_tensor::<f32>(&[7, 9], 0.0, 3.0);
        let y = x.softmax_lastdim().unwrap();
        for row in y.data().chunks(9) {
            let s: f32 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn pad_then_interior_slice_is_identity() {
        let x = Tensor::from_vec(&[1], vec![1.0f64]).unwrap();
        let p = x.pad_zero(&[(1, 1)]).unwrap();
        assert_eq!(p.data(), &[0.0, 1.0, 0.0]);
        let back = p.slice(&[(1, 2)]).unwrap();
        assert_eq!(back, x);

        let mut rng = CounterRng::new(9);
        let x = rng.normal_tensor::<f64>(&[2, 3, 4], 0.0, 1.0);
        let p = x.pad_zero(&[(1, 1), (1, 1), (1, 1)]).unwrap();
        let back = p.slice(&[(1, 3), (1, 4), (1, 5)]).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn permute_involution() {
        let mut rng = CounterRng::new(13);
        let x = rng.normal_tensor::<f64>(&[2, 3, 4], 0.0, 1.0);
        let p = x.permute(&[2, 0, 1]).unwrap();
        // Inverse of (2,0,1) is (1,2,0).
        let back = p.permute(&[1, 2, 0]).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn slice_out_of_range_rejected() {
        let x = Tensor::<f64>::zeros(&[2, 2]);
        assert!(x.slice(&[(0, 3), (0, 1)]).is_err());
    }

    #[test]
    fn shape4_rejects_zero_extent() {
        assert!(Shape4::new(1, 0, 4, 3).is_err());
    }
}
