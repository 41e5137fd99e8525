use crate::error::{Error, Result};
use crate::tensor::{matmul_a_bt_into, matmul_at_b_into, matmul_into, Scalar, Tensor};

/// Per-position affine map: `y[..., j] = sum_i x[..., i] w[i][j] + b[j]`.
/// Applies to the trailing axis of any rank >= 1 input.
pub fn linear<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (cin, cout) = check_dims("linear", x, w, b)?;
    let m = x.numel() / cin;
    let mut out_shape = x.shape().to_vec();
    *out_shape.last_mut().unwrap() = cout;
    let mut out = Tensor::zeros(&out_shape);
    matmul_into(x.data(), w.data(), out.data_mut(), m, cin, cout);
    let bd = b.data();
    for px in out.data_mut().chunks_exact_mut(cout) {
        for (o, &bv) in px.iter_mut().zip(bd) {
            *o += bv;
        }
    }
    Ok(out)
}

/// Gradients of [`linear`]: `(grad_x, grad_w, grad_b)`.
pub fn linear_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (cin, cout) = (w.shape()[0], w.shape()[1]);
    if grad_out.shape().last() != Some(&cout) || grad_out.numel() / cout != x.numel() / cin {
        return Err(Error::shape(
            "linear_backward",
            format!("grad shape {:?} does not match forward output", grad_out.shape()),
        ));
    }
    let m = x.numel() / cin;

    let mut gx = Tensor::zeros(x.shape());
    matmul_a_bt_into(grad_out.data(), w.data(), gx.data_mut(), m, cout, cin);

    let mut gw = Tensor::zeros(w.shape());
    matmul_at_b_into(x.data(), grad_out.data(), gw.data_mut(), cin, m, cout);

    let mut gb = Tensor::zeros(&[cout]);
    {
        let gbd = gb.data_mut();
        for px in grad_out.data().chunks_exact(cout) {
            for (o, &g) in gbd.iter_mut().zip(px) {
                *o += g;
            }
        }
    }
    Ok((gx, gw, gb))
}

fn check_dims<T: Scalar>(
    op: &'static str,
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(usize, usize)> {
    if w.rank() != 2 {
        return Err(Error::shape(op, "weight must be (c_in, c_out)"));
    }
    let (cin, cout) = (w.shape()[0], w.shape()[1]);
    if x.shape().last() != Some(&cin) {
        return Err(Error::shape(
            op,
            format!("trailing dim of {:?} must equal {cin}", x.shape()),
        ));
    }
    if b.shape() != [cout] {
        return Err(Error::shape(op, "bias length must equal c_out"));
    }
    Ok((cin, cout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CounterRng;

    #[test]
    fn identity_weight_zero_bias() {
        let mut rng = CounterRng::new(1);
        let x = rng.normal_tensor::<f64>(&[2, 3, 4], 0.0, 1.0);
        let mut w = Tensor::zeros(&[4, 4]);
        for i in 0..4 {
            w.data_mut()[i * 4 + i] = 1.0;
        }
        let y = linear(&x, &w, &Tensor::zeros(&[4])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_weight_gives_bias_everywhere() {
        let x = Tensor::<f64>::full(&[5, 3], 7.0);
        let b = Tensor::from_vec(&[2], vec![1.5, -2.5]).unwrap();
        let y = linear(&x, &Tensor::zeros(&[3, 2]), &b).unwrap();
        for px in y.data().chunks(2) {
            assert_eq!(px, &[1.5, -2.5]);
        }
    }

    #[test]
    fn matches_flattened_matmul_oracle() {
        let mut rng = CounterRng::new(2);
        let x = rng.normal_tensor::<f64>(&[2, 3, 5], 0.0, 1.0);
        let w = rng.normal_tensor::<f64>(&[5, 4], 0.0, 1.0);
        let b = rng.normal_tensor::<f64>(&[4], 0.0, 1.0);
        let y = linear(&x, &w, &b).unwrap();
        let flat = tcsr_oracles::matmul(x.data(), w.data(), 6, 5, 4);
        for (p, px) in y.data().chunks(4).enumerate() {
            for (j, &v) in px.iter().enumerate() {
                let want = flat[p * 4 + j] + b.data()[j];
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dim_mismatch_rejected() {
        let x = Tensor::<f64>::zeros(&[2, 3]);
        let w = Tensor::<f64>::zeros(&[4, 4]);
        assert!(linear(&x, &w, &Tensor::zeros(&[4])).is_err());
    }
}
