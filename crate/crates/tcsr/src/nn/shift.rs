use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Grouped spatial-shift specification: channel group `g` is translated by
/// `directions[g]` pixels, vacated borders are zero-filled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftSpec {
    pub stride: usize,
    pub directions: Vec<(i32, i32)>,
}

impl ShiftSpec {
    pub fn new(stride: usize, directions: Vec<(i32, i32)>) -> Result<Self> {
        for &(dy, dx) in &directions {
            if dy.unsigned_abs() as usize > stride || dx.unsigned_abs() as usize > stride {
                return Err(Error::Config(format!(
                    "shift direction ({dy}, {dx}) exceeds stride {stride}"
                )));
            }
        }
        if directions.is_empty() {
            return Err(Error::Config("shift needs at least one group".into()));
        }
        Ok(ShiftSpec { stride, directions })
    }

    /// Eight groups moved one pixel each along the 3x3 neighborhood minus its
    /// center, row-major order. This ordering is part of the checkpoint
    /// contract.
    pub fn default_8() -> Self {
        ShiftSpec {
            stride: 1,
            directions: vec![
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }

    pub fn groups(&self) -> usize {
        self.directions.len()
    }

    fn negated(&self) -> ShiftSpec {
        ShiftSpec {
            stride: self.stride,
            directions: self.directions.iter().map(|&(y, x)| (-y, -x)).collect(),
        }
    }
}

/// Translate each channel group by its direction: a value at `(i, j)` in
/// group `g` moves to `(i + dy, j + dx)`; positions shifted in from outside
/// the image are zero. Parameter-free, pure data movement.
pub fn spatial_shift<T: Scalar>(x: &Tensor<T>, spec: &ShiftSpec) -> Result<Tensor<T>> {
    let s = x.shape4()?;
    let groups = spec.groups();
    if s.c % groups != 0 {
        return Err(Error::Config(format!(
            "{} channels not divisible into {groups} shift groups",
            s.c
        )));
    }
    let per = s.c / groups;
    let mut out = Tensor::zeros(x.shape());
    let xd = x.data();
    let od = out.data_mut();
    for b in 0..s.n {
        for (g, &(dy, dx)) in spec.directions.iter().enumerate() {
            let ch0 = g * per;
            for i in 0..s.h {
                let si = i as isize - dy as isize;
                if si < 0 || si >= s.h as isize {
                    continue; // whole destination row vacated for this group
                }
                let si = si as usize;
                let (j_lo, j_hi) = (
                    (dx.max(0)) as usize,
                    (s.w as isize + dx.min(0) as isize) as usize,
                );
                for j in j_lo..j_hi {
                    let sj = (j as isize - dx as isize) as usize;
                    let dst = ((b * s.h + i) * s.w + j) * s.c + ch0;
                    let src = ((b * s.h + si) * s.w + sj) * s.c + ch0;
                    od[dst..dst + per].copy_from_slice(&xd[src..src + per]);
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`spatial_shift`]: the same shift with every direction negated.
pub fn spatial_shift_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    spec: &ShiftSpec,
) -> Result<Tensor<T>> {
    spatial_shift(grad_out, &spec.negated())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CounterRng;

    #[test]
    fn zero_input_stays_zero() {
        let x = Tensor::<f64>::zeros(&[1, 4, 4, 8]);
        let y = spatial_shift(&x, &ShiftSpec::default_8()).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_value_moves_by_direction() {
        // Group 4 of the default spec moves by (0, +1).
        let spec = ShiftSpec::default_8();
        assert_eq!(spec.directions[4], (0, 1));
        let mut x = Tensor::<f64>::zeros(&[1, 3, 3, 8]);
        let at = |i: usize, j: usize, ch: usize| ((i * 3) + j) * 8 + ch;
        x.data_mut()[at(1, 1, 4)] = 1.0;
        let y = spatial_shift(&x, &spec).unwrap();
        assert_eq!(y.data()[at(1, 2, 4)], 1.0);
        let total: f64 = y.data().iter().sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn matches_depthwise_one_hot_oracle_bitwise() {
        let spec = ShiftSpec::default_8();
        let mut rng = CounterRng::new(3);
        let x = rng.normal_tensor::<f64>(&[2, 5, 4, 16], 0.0, 1.0);
        let got = spatial_shift(&x, &spec).unwrap();
        let want = tcsr_oracles::depthwise_shift(x.data(), 2, 5, 4, 16, 1, &spec.directions);
        assert_eq!(got.data(), want.as_slice());
    }

    #[test]
    fn shift_is_linear() {
        let spec = ShiftSpec::default_8();
        let mut rng = CounterRng::new(4);
        let x = rng.normal_tensor::<f64>(&[1, 4, 4, 8], 0.0, 1.0);
        let y = rng.normal_tensor::<f64>(&[1, 4, 4, 8], 0.0, 1.0);
        let (a, b) = (2.5, -1.25);
        let lhs = spatial_shift(&x.scale(a).add(&y.scale(b)).unwrap(), &spec).unwrap();
        let rhs = spatial_shift(&x, &spec)
            .unwrap()
            .scale(a)
            .add(&spatial_shift(&y, &spec).unwrap().scale(b))
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn mass_preserved_away_from_borders() {
        let spec = ShiftSpec::default_8();
        // Support strictly inside: only the center pixel is nonzero.
        let mut x = Tensor::<f64>::zeros(&[1, 5, 5, 8]);
        for ch in 0..8 {
            x.data_mut()[((2 * 5) + 2) * 8 + ch] = 1.0 + ch as f64;
        }
        let y = spatial_shift(&x, &spec).unwrap();
        let l1_in: f64 = x.data().iter().map(|v| v.abs()).sum();
        let l1_out: f64 = y.data().iter().map(|v| v.abs()).sum();
        assert_eq!(l1_in, l1_out);

        // Nonzero values on the border lose mass.
        let mut rng = CounterRng::new(5);
        let x = rng.normal_tensor::<f64>(&[1, 4, 4, 8], 0.0, 1.0);
        let y = spatial_shift(&x, &spec).unwrap();
        let l1_in: f64 = x.data().iter().map(|v| v.abs()).sum();
        let l1_out: f64 = y.data().iter().map(|v| v.abs()).sum();
        assert!(l1_out <= l1_in);
    }

    #[test]
    fn indivisible_channels_rejected() {
        let x = Tensor::<f64>::zeros(&[1, 4, 4, 9]);
        assert!(spatial_shift(&x, &ShiftSpec::default_8()).is_err());
    }
}
