use crate::error::{Error, Result};
use crate::model::Tcsr;
use crate::tensor::{CounterRng, Scalar, Tensor};

use super::adam::{adam_step, AdamState};
use super::data::PatchSampler;
use super::loss::{l1_loss, l1_loss_grad};

/// Optimization hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// HR patch size in pixels.
    pub patch: usize,
    pub batch: usize,
    /// Initial learning rate; halved at 40% and 80% of the run.
    pub lr: f64,
    pub steps: u64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// A checkpoint callback fires every this many steps.
    pub checkpoint_interval: u64,
    /// Random flips/rotations of HR patches.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            patch: 64,
            batch: 32,
            lr: 2e-4,
            steps: 2000,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            checkpoint_interval: 500,
            augment: true,
        }
    }
}

/// One row of the loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

/// Training outcome: the full loss curve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub points: Vec<LossPoint>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,lr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.step, p.loss, p.lr));
        }
        out
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.points.last().map(|p| p.loss)
    }
}

fn lr_at(cfg: &TrainConfig, step: u64) -> f64 {
    let s1 = cfg.steps * 2 / 5;
    let s2 = cfg.steps * 4 / 5;
    if step >= s2 {
        cfg.lr * 0.25
    } else if step >= s1 {
        cfg.lr * 0.5
    } else {
        cfg.lr
    }
}

/// Optimize `model` on random patches from `images`. Each step samples a
/// batch, degrades it bicubically by the model's scale, runs
/// forward/backward and applies one Adam update. Fully deterministic given
/// `cfg.seed`. `on_checkpoint` fires every `checkpoint_interval` steps and
/// once more at the end.
pub fn train<T: Scalar>(
    model: &mut Tcsr<T>,
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
    images: &[Tensor<T>],
    mut on_checkpoint: impl FnMut(u64, &Tcsr<T>, &AdamState<T>) -> Result<()>,
) -> Result<TrainReport> {
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let scale = model.config.scale;
    if cfg.patch < model.config.kernel {
        return Err(Error::Config(format!(
            "patch {} smaller than attention window {}",
            cfg.patch, model.config.kernel
        )));
    }
    if !cfg.patch.is_multiple_of(scale) || cfg.patch / scale < model.config.kernel {
        return Err(Error::Config(format!(
            "patch {} at scale {scale} yields an LR input smaller than window {}",
            cfg.patch, model.config.kernel
        )));
    }
    let sampler = PatchSampler::new(images, cfg.patch, scale, cfg.augment)?;
    let mut rng = CounterRng::new(cfg.seed).fork(0x5a_4d50);

    let mut report = TrainReport::default();
    for step in 0..cfg.steps {
        let lr_now = lr_at(cfg, step);
        let (lr_batch, hr_batch) = sampler.sample_batch(&mut rng, cfg.batch)?;
        let (sr, tape) = model.forward_with_tape(&lr_batch)?;
        let loss = l1_loss(&sr, &hr_batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at step {step}")));
        }
        let g_loss = l1_loss_grad(&sr, &hr_batch)?;
        let (_, grads) = model.backward(&lr_batch, &tape, &g_loss)?;
        adam_step(model, &grads, state, lr_now, cfg.beta1, cfg.beta2, cfg.eps)?;
        report.points.push(LossPoint {
            step: step + 1,
            loss: loss.to_f64(),
            lr: lr_now,
        });
        if cfg.checkpoint_interval > 0 && (step + 1) % cfg.checkpoint_interval == 0 {
            on_checkpoint(step + 1, model, state)?;
        }
    }
    if cfg.steps == 0 || cfg.checkpoint_interval == 0 || !cfg.steps.is_multiple_of(cfg.checkpoint_interval) {
        on_checkpoint(cfg.steps, model, state)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::train::synth::synthetic_rgb_image;

    fn tiny_setup(seed: u64) -> (Tcsr<f64>, AdamState<f64>, Vec<Tensor<f64>>) {
        let mut config = ModelConfig::tiny(2);
        config.blocks = 2; // keep unit tests quick
        let model = Tcsr::init(config, seed).unwrap();
        let state = AdamState::for_model(&model);
        let images = (0..3)
            .map(|i| synthetic_rgb_image(72, 72, 100 + i))
            .collect();
        (model, state, images)
    }

    #[test]
    fn zero_steps_is_a_no_op() {
        let (mut model, mut state, images) = tiny_setup(1);
        let before = model.to_store();
        let cfg = TrainConfig {
            steps: 0,
            batch: 2,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &mut state, &cfg, &images, |_, _, _| Ok(())).unwrap();
        assert!(report.points.is_empty());
        let after = model.to_store();
        for ((n1, t1), (n2, t2)) in before.entries().iter().zip(after.entries()) {
            assert_eq!(n1, n2);
            assert_eq!(t1, t2);
        }
    }

    #[test]
    fn loss_decreases_over_first_steps() {
        let (mut model, mut state, images) = tiny_setup(2);
        let cfg = TrainConfig {
            steps: 10,
            batch: 2,
            lr: 1e-4,
            seed: 3,
            checkpoint_interval: 0,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &mut state, &cfg, &images, |_, _, _| Ok(())).unwrap();
        assert_eq!(report.points.len(), 10);
        let first = report.points[0].loss;
        let last = report.points[9].loss;
        assert!(last < first, "loss did not move: {first} -> {last}");
    }

    #[test]
    fn same_seed_bitwise_identical_curves() {
        let cfg = TrainConfig {
            steps: 5,
            batch: 2,
            seed: 11,
            checkpoint_interval: 0,
            ..TrainConfig::default()
        };
        let (mut m1, mut s1, images) = tiny_setup(4);
        let r1 = train(&mut m1, &mut s1, &cfg, &images, |_, _, _| Ok(())).unwrap();
        let (mut m2, mut s2, _) = tiny_setup(4);
        let r2 = train(&mut m2, &mut s2, &cfg, &images, |_, _, _| Ok(())).unwrap();
        assert_eq!(r1, r2);
        // And the resulting parameters match bit for bit.
        let (st1, st2) = (m1.to_store(), m2.to_store());
        for ((_, a), (_, b)) in st1.entries().iter().zip(st2.entries()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn schedule_halves_at_40_and_80_percent() {
        let cfg = TrainConfig {
            steps: 10,
            lr: 1e-3,
            ..TrainConfig::default()
        };
        assert_eq!(lr_at(&cfg, 0), 1e-3);
        assert_eq!(lr_at(&cfg, 3), 1e-3);
        assert_eq!(lr_at(&cfg, 4), 5e-4);
        assert_eq!(lr_at(&cfg, 7), 5e-4);
        assert_eq!(lr_at(&cfg, 8), 2.5e-4);
    }
}
