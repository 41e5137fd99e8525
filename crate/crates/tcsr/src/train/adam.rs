use crate::error::{Error, Result};
use crate::model::{ModelGrads, Tcsr};
use crate::tensor::{Scalar, Tensor};

/// First/second moment estimates for every model parameter, in
/// `Tcsr::for_each_param` order, plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn for_model(model: &Tcsr<T>) -> Self {
        let mut m = Vec::new();
        model.for_each_param(|_, t| m.push(t.zeros_like()));
        let v = m.clone();
        AdamState { m, v, step: 0 }
    }
}

/// One bias-corrected Adam update over a flat parameter slice.
/// `step` is the 1-based step count the bias correction uses.
#[allow(clippy::too_many_arguments)]
pub fn adam_update<T: Scalar>(
    param: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    debug_assert_eq!(param.len(), grad.len());
    let b1 = T::from_f64(beta1);
    let b2 = T::from_f64(beta2);
    let one_m_b1 = T::from_f64(1.0 - beta1);
    let one_m_b2 = T::from_f64(1.0 - beta2);
    let bc1 = T::from_f64(1.0 - beta1.powi(step as i32));
    let bc2 = T::from_f64(1.0 - beta2.powi(step as i32));
    let lr = T::from_f64(lr);
    let eps = T::from_f64(eps);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + one_m_b1 * g;
        v[i] = b2 * v[i] + one_m_b2 * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Apply one Adam step to every model parameter. Non-finite gradients abort
/// the step before anything (parameters, moments, counter) is touched.
#[allow(clippy::too_many_arguments)]
pub fn adam_step<T: Scalar>(
    model: &mut Tcsr<T>,
    grads: &ModelGrads<T>,
    state: &mut AdamState<T>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradients passed to adam_step".into()));
    }
    let grad_list = grads.tensors();
    if grad_list.len() != state.m.len() {
        return Err(Error::Config(format!(
            "optimizer state holds {} tensors, gradients hold {}",
            state.m.len(),
            grad_list.len()
        )));
    }
    state.step += 1;
    let step = state.step;
    let mut i = 0;
    model.for_each_param_mut(|_, t| {
        adam_update(
            t.data_mut(),
            grad_list[i].data(),
            state.m[i].data_mut(),
            state.v[i].data_mut(),
            step,
            lr,
            beta1,
            beta2,
            eps,
        );
        i += 1;
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = [1.0f64, -2.0];
        let mut m = [0.5, -0.5];
        let mut v = [0.25, 0.25];
        let before = p;
        adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, 3, 0.1, 0.9, 0.999, 1e-8);
        // Parameters move by (tiny) m-momentum only if m != 0; with zero
        // gradient the moments decay but a nonzero m still nudges p.
        // With m = 0 the update is exactly zero:
        let mut p2 = before;
        let mut m2 = [0.0, 0.0];
        let mut v2 = [0.0, 0.0];
        adam_update(&mut p2, &[0.0, 0.0], &mut m2, &mut v2, 1, 0.1, 0.9, 0.999, 1e-8);
        assert_eq!(p2, before);
        // And the moments decayed toward zero in the first case.
        assert!(m[0].abs() < 0.5 && v[0] < 0.25);
    }

    #[test]
    fn first_step_moves_by_lr_sign() {
        // With eps -> 0, bias correction makes the first update lr * sign(g).
        let mut p = [0.0f64, 0.0];
        let mut m = [0.0, 0.0];
        let mut v = [0.0, 0.0];
        adam_update(&mut p, &[0.3, -7.0], &mut m, &mut v, 1, 0.01, 0.9, 0.999, 1e-12);
        assert!((p[0] + 0.01).abs() < 1e-8);
        assert!((p[1] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // Minimize (w - 3)^2 from w = 0 with lr = 0.1.
        let mut w = [0.0f64];
        let mut m = [0.0];
        let mut v = [0.0];
        for step in 1..=100 {
            let g = [2.0 * (w[0] - 3.0)];
            adam_update(&mut w, &g, &mut m, &mut v, step, 0.1, 0.9, 0.999, 1e-8);
        }
        assert!((w[0] - 3.0).abs() < 0.5, "w = {}", w[0]);
    }

    #[test]
    fn odd_symmetry_under_sign_flip() {
        // Flipping gradients and parameters together mirrors the trajectory
        // when moments start at zero.
        let mut p1 = [0.7f64, -0.2];
        let mut m1 = [0.0, 0.0];
        let mut v1 = [0.0, 0.0];
        let mut p2 = [-0.7f64, 0.2];
        let mut m2 = [0.0, 0.0];
        let mut v2 = [0.0, 0.0];
        for step in 1..=10 {
            let g1 = [0.3 * p1[0] + 0.1, -0.2 * p1[1]];
            let g2 = [-(0.3 * -p2[0] + 0.1), -(-0.2 * -p2[1])];
            adam_update(&mut p1, &g1, &mut m1, &mut v1, step, 0.05, 0.9, 0.999, 1e-8);
            adam_update(&mut p2, &g2, &mut m2, &mut v2, step, 0.05, 0.9, 0.999, 1e-8);
        }
        assert!((p1[0] + p2[0]).abs() < 1e-12);
        assert!((p1[1] + p2[1]).abs() < 1e-12);
    }
}
