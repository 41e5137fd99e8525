use crate::error::{Error, Result};
use crate::nn::{
    conv2d_same, conv2d_same_backward, pixelshuffle, pixelunshuffle, ConvGrads, ConvParams,
};
use crate::tensor::{CounterRng, Scalar, Tensor};

use super::block::{BlockCache, BlockGrads, NatBlock};
use super::config::ModelConfig;
use super::params::ParamStore;

/// The full network: a 3x3 shallow feature conv, a stack of attention
/// blocks with one long residual, and a conv + pixelshuffle reconstruction
/// head producing the `scale`-times larger image.
#[derive(Debug, Clone)]
pub struct Tcsr<T: Scalar> {
    pub config: ModelConfig,
    pub shallow: ConvParams<T>,
    pub blocks: Vec<NatBlock<T>>,
    pub recon: ConvParams<T>,
}

/// Gradients mirroring [`Tcsr`]; iteration order matches
/// [`Tcsr::for_each_param`].
#[derive(Debug, Clone)]
pub struct ModelGrads<T: Scalar> {
    pub shallow: ConvGrads<T>,
    pub blocks: Vec<BlockGrads<T>>,
    pub recon: ConvGrads<T>,
}

/// Record of one forward pass: every intermediate the reverse sweep needs.
#[derive(Debug, Clone)]
pub struct GradTape<T: Scalar> {
    block_caches: Vec<BlockCache<T>>,
    /// Input to block `i` (entry 0 is the shallow output).
    block_inputs: Vec<Tensor<T>>,
    recon_in: Tensor<T>,
}

impl<T: Scalar> Tcsr<T> {
    /// Build with truncated-normal (std 0.02) weights, zero biases and zero
    /// bias tables; deterministic in `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = CounterRng::new(seed);
        let c = config.channels;
        let shallow = ConvParams::new(
            rng.trunc_normal_tensor(&[3, 3, 3, c], 0.0, 0.02),
            Tensor::zeros(&[c]),
        )?;
        let mut blocks = Vec::with_capacity(config.blocks);
        for _ in 0..config.blocks {
            blocks.push(NatBlock::init(&config, &mut rng)?);
        }
        let out_c = config.scale * config.scale * 3;
        let recon = ConvParams::new(
            rng.trunc_normal_tensor(&[3, 3, c, out_c], 0.0, 0.02),
            Tensor::zeros(&[out_c]),
        )?;
        Ok(Tcsr {
            config,
            shallow,
            blocks,
            recon,
        })
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape4()?;
        if s.c != 3 {
            return Err(Error::shape(
                "tcsr_forward",
                format!("expected RGB input, got {} channels", s.c),
            ));
        }
        if s.h < self.config.kernel || s.w < self.config.kernel {
            return Err(Error::Config(format!(
                "input {}x{} smaller than attention window {}",
                s.h, s.w, self.config.kernel
            )));
        }
        Ok(())
    }

    /// Shallow features and the deep-extractor output for the same input.
    pub fn features(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        self.check_input(x)?;
        let shallow_out = conv2d_same(x, &self.shallow)?;
        let mut feat = shallow_out.clone();
        for block in &self.blocks {
            feat = block.forward(&feat)?;
        }
        Ok((shallow_out, feat))
    }

    /// Super-resolve `(n, h, w, 3)` into `(n, scale*h, scale*w, 3)`.
    /// Output is unclamped; clamp to `[0, 1]` only when exporting images.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (shallow_out, deep) = self.features(x)?;
        let recon_in = shallow_out.add(&deep)?;
        let pre = conv2d_same(&recon_in, &self.recon)?;
        pixelshuffle(&pre, self.config.scale)
    }

    /// Forward pass recording a [`GradTape`] for [`Tcsr::backward`].
    pub fn forward_with_tape(&self, x: &Tensor<T>) -> Result<(Tensor<T>, GradTape<T>)> {
        self.check_input(x)?;
        let shallow_out = conv2d_same(x, &self.shallow)?;
        let mut block_inputs = Vec::with_capacity(self.blocks.len());
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        let mut feat = shallow_out.clone();
        for block in &self.blocks {
            block_inputs.push(feat.clone());
            let (next, cache) = block.forward_with_cache(&feat)?;
            block_caches.push(cache);
            feat = next;
        }
        let recon_in = shallow_out.add(&feat)?;
        let pre = conv2d_same(&recon_in, &self.recon)?;
        let y = pixelshuffle(&pre, self.config.scale)?;
        Ok((
            y,
            GradTape {
                block_caches,
                block_inputs,
                recon_in,
            },
        ))
    }

    /// Reverse sweep over a recorded tape: gradients for the input and every
    /// learnable tensor.
    pub fn backward(
        &self,
        x: &Tensor<T>,
        tape: &GradTape<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, ModelGrads<T>)> {
        let g_pre = pixelunshuffle(grad_out, self.config.scale)?;
        let (g_recon_in, recon_grads) = conv2d_same_backward(&tape.recon_in, &self.recon, &g_pre)?;

        let mut g = g_recon_in.clone();
        let mut block_grads: Vec<BlockGrads<T>> = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate().rev() {
            let (gx, grads) = block.backward(&tape.block_inputs[i], &tape.block_caches[i], &g)?;
            block_grads.push(grads);
            g = gx;
        }
        block_grads.reverse();

        // Long residual: the reconstruction input also feeds from the
        // shallow features directly.
        let g_shallow_out = g.add(&g_recon_in)?;
        let (gx, shallow_grads) = conv2d_same_backward(x, &self.shallow, &g_shallow_out)?;
        Ok((
            gx,
            ModelGrads {
                shallow: shallow_grads,
                blocks: block_grads,
                recon: recon_grads,
            },
        ))
    }

    /// Whole-image inference with the output clamped to `[0, 1]`.
    pub fn super_resolve(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x)?.map(|v| v.max(T::ZERO).min(T::ONE)))
    }

    /// Tiled inference for memory-constrained runs: the image is processed
    /// in `tile x tile` pieces with `kernel` pixels of context on every
    /// side, and the context is cropped away when stitching. Results can
    /// differ slightly from the whole-image pass near tile seams because
    /// attention windows clamp at the crop borders.
    pub fn super_resolve_tiled(&self, x: &Tensor<T>, tile: usize) -> Result<Tensor<T>> {
        let s = x.shape4()?;
        let k = self.config.kernel;
        if tile < k {
            return Err(Error::Config(format!("tile {tile} smaller than window {k}")));
        }
        let scale = self.config.scale;
        let mut out = Tensor::zeros(&[s.n, scale * s.h, scale * s.w, 3]);
        for ty in (0..s.h).step_by(tile) {
            for tx in (0..s.w).step_by(tile) {
                let (y0, y1) = (ty, (ty + tile).min(s.h));
                let (x0, x1) = (tx, (tx + tile).min(s.w));
                let (cy0, cy1) = (y0.saturating_sub(k), (y1 + k).min(s.h));
                let (cx0, cx1) = (x0.saturating_sub(k), (x1 + k).min(s.w));
                let ctx = x.slice(&[(0, s.n), (cy0, cy1), (cx0, cx1), (0, 3)])?;
                let sr = self.super_resolve(&ctx)?;
                let crop = sr.slice(&[
                    (0, s.n),
                    (scale * (y0 - cy0), scale * (y1 - cy0)),
                    (scale * (x0 - cx0), scale * (x1 - cx0)),
                    (0, 3),
                ])?;
                let ch = crop.shape()[1];
                let cw = crop.shape()[2];
                for b in 0..s.n {
                    for i in 0..ch {
                        for j in 0..cw {
                            for ccc in 0..3 {
                                let src = (((b * ch + i) * cw) + j) * 3 + ccc;
                                let dst = (((b * scale * s.h + scale * y0 + i) * scale * s.w)
                                    + scale * x0
                                    + j)
                                    * 3
                                    + ccc;
                                out.data_mut()[dst] = crop.data()[src];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Visit every learnable tensor in serialization order.
    pub fn for_each_param(&self, mut f: impl FnMut(String, &Tensor<T>)) {
        f("shallow.weight".into(), &self.shallow.weight);
        f("shallow.bias".into(), &self.shallow.bias);
        for (i, b) in self.blocks.iter().enumerate() {
            f(format!("block{i}.norm1.gamma"), &b.norm1.gamma);
            f(format!("block{i}.norm1.beta"), &b.norm1.beta);
            f(format!("block{i}.na.wq"), &b.na.wq);
            f(format!("block{i}.na.wk"), &b.na.wk);
            f(format!("block{i}.na.wv"), &b.na.wv);
            f(format!("block{i}.na.wo"), &b.na.wo);
            f(format!("block{i}.na.bo"), &b.na.bo);
            f(format!("block{i}.na.rpb"), &b.na.rpb);
            f(format!("block{i}.norm2.gamma"), &b.norm2.gamma);
            f(format!("block{i}.norm2.beta"), &b.norm2.beta);
            f(format!("block{i}.effn.w1"), &b.effn.w1);
            f(format!("block{i}.effn.b1"), &b.effn.b1);
            f(format!("block{i}.effn.w2"), &b.effn.w2);
            f(format!("block{i}.effn.b2"), &b.effn.b2);
        }
        f("recon.weight".into(), &self.recon.weight);
        f("recon.bias".into(), &self.recon.bias);
    }

    /// Mutable visit, same order as [`Tcsr::for_each_param`].
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&str, &mut Tensor<T>)) {
        f("shallow.weight", &mut self.shallow.weight);
        f("shallow.bias", &mut self.shallow.bias);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            f(&format!("block{i}.norm1.gamma"), &mut b.norm1.gamma);
            f(&format!("block{i}.norm1.beta"), &mut b.norm1.beta);
            f(&format!("block{i}.na.wq"), &mut b.na.wq);
            f(&format!("block{i}.na.wk"), &mut b.na.wk);
            f(&format!("block{i}.na.wv"), &mut b.na.wv);
            f(&format!("block{i}.na.wo"), &mut b.na.wo);
            f(&format!("block{i}.na.bo"), &mut b.na.bo);
            f(&format!("block{i}.na.rpb"), &mut b.na.rpb);
            f(&format!("block{i}.norm2.gamma"), &mut b.norm2.gamma);
            f(&format!("block{i}.norm2.beta"), &mut b.norm2.beta);
            f(&format!("block{i}.effn.w1"), &mut b.effn.w1);
            f(&format!("block{i}.effn.b1"), &mut b.effn.b1);
            f(&format!("block{i}.effn.w2"), &mut b.effn.w2);
            f(&format!("block{i}.effn.b2"), &mut b.effn.b2);
        }
        f("recon.weight", &mut self.recon.weight);
        f("recon.bias", &mut self.recon.bias);
    }

    pub fn param_count(&self) -> usize {
        let mut total = 0;
        self.for_each_param(|_, t| total += t.numel());
        total
    }

    pub fn to_store(&self) -> ParamStore<T> {
        let mut store = ParamStore::new();
        self.for_each_param(|name, t| store.push(name, t.clone()));
        store
    }

    /// Replace every parameter with the same-named tensor from `store`;
    /// shapes must match exactly.
    pub fn load_store(&mut self, store: &ParamStore<T>) -> Result<()> {
        let mut missing = Vec::new();
        self.for_each_param_mut(|name, t| match store.get(name) {
            Some(src) if src.shape() == t.shape() => *t = src.clone(),
            Some(src) => missing.push(format!(
                "'{name}': shape {:?} in file, {:?} in model",
                src.shape(),
                t.shape()
            )),
            None => missing.push(format!("'{name}': not in file")),
        });
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Checkpoint(missing.join("; ")))
        }
    }
}

impl<T: Scalar> ModelGrads<T> {
    /// Visit gradients in the same order as [`Tcsr::for_each_param`].
    pub fn for_each(&self, mut f: impl FnMut(&Tensor<T>)) {
        f(&self.shallow.weight);
        f(&self.shallow.bias);
        for b in &self.blocks {
            f(&b.norm1_gamma);
            f(&b.norm1_beta);
            f(&b.na.wq);
            f(&b.na.wk);
            f(&b.na.wv);
            f(&b.na.wo);
            f(&b.na.bo);
            f(&b.na.rpb);
            f(&b.norm2_gamma);
            f(&b.norm2_beta);
            f(&b.effn.w1);
            f(&b.effn.b1);
            f(&b.effn.w2);
            f(&b.effn.b2);
        }
        f(&self.recon.weight);
        f(&self.recon.bias);
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|t| ok &= t.all_finite());
        ok
    }

    /// Gradient tensors in [`Tcsr::for_each_param`] order.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        out.push(&self.shallow.weight);
        out.push(&self.shallow.bias);
        for b in &self.blocks {
            out.extend([
                &b.norm1_gamma,
                &b.norm1_beta,
                &b.na.wq,
                &b.na.wk,
                &b.na.wv,
                &b.na.wo,
                &b.na.bo,
                &b.na.rpb,
                &b.norm2_gamma,
                &b.norm2_beta,
                &b.effn.w1,
                &b.effn.b1,
                &b.effn.w2,
                &b.effn.b2,
            ]);
        }
        out.push(&self.recon.weight);
        out.push(&self.recon.bias);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_shape_contract() {
        let model = Tcsr::<f32>::init(ModelConfig::tiny(4), 1).unwrap();
        let x = Tensor::<f32>::full(&[1, 32, 32, 3], 0.5);
        let y = model.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 128, 128, 3]);

        let model3 = Tcsr::<f32>::init(ModelConfig::tiny(3), 1).unwrap();
        let y3 = model3.forward(&x).unwrap();
        assert_eq!(y3.shape(), &[1, 96, 96, 3]);
    }

    #[test]
    fn untrained_output_is_finite_and_deterministic() {
        let a = Tcsr::<f64>::init(ModelConfig::tiny(2), 7).unwrap();
        let b = Tcsr::<f64>::init(ModelConfig::tiny(2), 7).unwrap();
        let mut rng = CounterRng::new(9);
        let x = rng
            .normal_tensor::<f64>(&[1, 16, 16, 3], 0.5, 0.1)
            .map(|v| v.clamp(0.0, 1.0));
        let ya = a.forward(&x).unwrap();
        let yb = b.forward(&x).unwrap();
        assert!(ya.all_finite());
        assert_eq!(ya, yb);
    }

    #[test]
    fn zeroed_branch_terminals_reduce_deep_extractor_to_shallow() {
        let mut model = Tcsr::<f64>::init(ModelConfig::tiny(2), 3).unwrap();
        for b in &mut model.blocks {
            b.na.wo = b.na.wo.zeros_like();
            b.na.bo = b.na.bo.zeros_like();
            b.effn.w2 = b.effn.w2.zeros_like();
            b.effn.b2 = b.effn.b2.zeros_like();
        }
        let mut rng = CounterRng::new(4);
        let x = rng
            .normal_tensor::<f64>(&[1, 12, 12, 3], 0.5, 0.2)
            .map(|v| v.clamp(0.0, 1.0));
        let (shallow, deep) = model.features(&x).unwrap();
        assert_eq!(shallow, deep);
    }

    #[test]
    fn input_smaller_than_window_rejected() {
        let model = Tcsr::<f32>::init(ModelConfig::tiny(2), 1).unwrap();
        let x = Tensor::<f32>::full(&[1, 5, 5, 3], 0.5);
        assert!(model.forward(&x).is_err());
    }

    #[test]
    fn store_roundtrip_restores_parameters() {
        let model = Tcsr::<f64>::init(ModelConfig::tiny(2), 11).unwrap();
        let store = model.to_store();
        let mut other = Tcsr::<f64>::init(ModelConfig::tiny(2), 999).unwrap();
        other.load_store(&store).unwrap();
        let mut same = true;
        model.for_each_param(|name, t| {
            same &= store.get(&name).is_some();
            let mut found = false;
            other.for_each_param(|n2, t2| {
                if n2 == name {
                    found = true;
                    same &= t == t2;
                }
            });
            same &= found;
        });
        assert!(same);
    }

    #[test]
    fn param_and_grad_visit_orders_align() {
        let model = Tcsr::<f64>::init(ModelConfig::tiny(2), 5).unwrap();
        let mut rng = CounterRng::new(6);
        let x = rng
            .normal_tensor::<f64>(&[1, 8, 8, 3], 0.5, 0.1)
            .map(|v| v.clamp(0.0, 1.0));
        let (y, tape) = model.forward_with_tape(&x).unwrap();
        let (_, grads) = model.backward(&x, &tape, &y.zeros_like()).unwrap();

        let mut param_shapes = Vec::new();
        model.for_each_param(|_, t| param_shapes.push(t.shape().to_vec()));
        let mut grad_shapes = Vec::new();
        grads.for_each(|t| grad_shapes.push(t.shape().to_vec()));
        assert_eq!(param_shapes, grad_shapes);
    }

    #[test]
    fn whole_model_backward_matches_finite_differences() {
        // End to end through the tape: shallow conv, both residual paths,
        // the long skip, reconstruction and pixelshuffle.
        let config = ModelConfig {
            channels: 8,
            blocks: 2,
            kernel: 3,
            heads: 2,
            ffn_ratio: 2,
            shift_groups: 8,
            shift_stride: 1,
            scale: 2,
            variant: "micro".into(),
        };
        let mut model = Tcsr::<f64>::init(config, 7).unwrap();
        // Init-scale weights make attention gradients too small for clean
        // finite differences; rescale them.
        let mut rng = CounterRng::new(8);
        model.for_each_param_mut(|name, t| {
            if !name.contains("norm") {
                *t = rng.normal_tensor(t.shape(), 0.0, 0.25);
            }
        });
        let x = rng.normal_tensor::<f64>(&[1, 6, 6, 3], 0.5, 0.2);
        let cot = rng.normal_tensor::<f64>(&[1, 12, 12, 3], 0.0, 1.0);

        let (_, tape) = model.forward_with_tape(&x).unwrap();
        let (gx, _) = model.backward(&x, &tape, &cot).unwrap();

        let loss = |xs: &[f64]| {
            let xt = Tensor::from_vec(x.shape(), xs.to_vec()).unwrap();
            model
                .forward(&xt)
                .unwrap()
                .data()
                .iter()
                .zip(cot.data())
                .map(|(y, g)| y * g)
                .sum::<f64>()
        };
        let fd = tcsr_oracles::central_diff(loss, x.data(), 1e-5);
        for (a, b) in gx.data().iter().zip(&fd) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
            assert!(rel < 1e-4, "{a} vs {b}");
        }
    }
}
