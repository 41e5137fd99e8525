use crate::tensor::{Scalar, Tensor};

// Tanh-form GELU constants: sqrt(2/pi) and the cubic coefficient.
const GELU_C0: f64 = 0.797_884_560_802_865_4;
const GELU_C1: f64 = 0.044_715;

#[inline]
fn gelu_scalar<T: Scalar>(x: T) -> (T, T) {
    let c0 = T::from_f64(GELU_C0);
    let c1 = T::from_f64(GELU_C1);
    let u = c0 * (x + c1 * x * x * x);
    let t = u.tanh();
    let half = T::from_f64(0.5);
    (half * x * (T::ONE + t), t)
}

#[inline]
fn gelu_grad_scalar<T: Scalar>(x: T, t: T) -> T {
    let c0 = T::from_f64(GELU_C0);
    let c1 = T::from_f64(GELU_C1);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let du = c0 * (T::ONE + three * c1 * x * x);
    half * (T::ONE + t) + half * x * (T::ONE - t * t) * du
}

/// Gaussian error linear unit, tanh approximation:
/// `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| gelu_scalar(v).0)
}

/// Forward pass that also returns the tanh values for reuse in the backward.
pub fn gelu_fwd<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, Vec<T>) {
    use rayon::prelude::*;
    let mut t_cache = vec![T::ZERO; x.numel()];
    let mut out = x.clone();
    let chunk = 8192;
    out.data_mut()
        .par_chunks_mut(chunk)
        .zip(t_cache.par_chunks_mut(chunk))
        .for_each(|(vs, ts)| {
            for (v, t) in vs.iter_mut().zip(ts) {
                let (y, tt) = gelu_scalar(*v);
                *t = tt;
                *v = y;
            }
        });
    (out, t_cache)
}

/// `grad_x` of [`gelu`], recomputing the tanh.
pub fn gelu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(x.shape(), grad_out.shape());
    let mut gx = x.clone();
    for (v, &g) in gx.data_mut().iter_mut().zip(grad_out.data()) {
        let t = gelu_scalar(*v).1;
        *v = gelu_grad_scalar(*v, t) * g;
    }
    gx
}

/// `grad_x` of [`gelu`] using the tanh values saved by [`gelu_fwd`].
pub fn gelu_bwd_cached<T: Scalar>(x: &Tensor<T>, t_cache: &[T], grad_out: &Tensor<T>) -> Tensor<T> {
    use rayon::prelude::*;
    debug_assert_eq!(x.numel(), t_cache.len());
    let mut gx = x.clone();
    let chunk = 8192;
    gx.data_mut()
        .par_chunks_mut(chunk)
        .zip(t_cache.par_chunks(chunk))
        .zip(grad_out.data().par_chunks(chunk))
        .for_each(|((vs, ts), gs)| {
            for ((v, &t), &g) in vs.iter_mut().zip(ts).zip(gs) {
                *v = gelu_grad_scalar(*v, t) * g;
            }
        });
    gx
}
