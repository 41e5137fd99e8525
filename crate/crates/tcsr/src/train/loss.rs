use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Mean absolute difference over all elements.
pub fn l1_loss<T: Scalar>(sr: &Tensor<T>, hr: &Tensor<T>) -> Result<T> {
    if sr.shape() != hr.shape() {
        return Err(Error::shape(
            "l1_loss",
            format!("{:?} vs {:?}", sr.shape(), hr.shape()),
        ));
    }
    let mut acc = T::ZERO;
    for (a, b) in sr.data().iter().zip(hr.data()) {
        acc += (*a - *b).abs();
    }
    Ok(acc / T::from_f64(sr.numel() as f64))
}

/// Gradient of [`l1_loss`] with respect to `sr`: `sign(sr - hr) / numel`.
pub fn l1_loss_grad<T: Scalar>(sr: &Tensor<T>, hr: &Tensor<T>) -> Result<Tensor<T>> {
    if sr.shape() != hr.shape() {
        return Err(Error::shape(
            "l1_loss_grad",
            format!("{:?} vs {:?}", sr.shape(), hr.shape()),
        ));
    }
    let inv = T::ONE / T::from_f64(sr.numel() as f64);
    sr.zip_with(hr, |a, b| {
        if a > b {
            inv
        } else if a < b {
            T::ZERO - inv
        } else {
            T::ZERO
        }
    })
}
