//! Finite-difference verification of every hand-written backward pass.
//!
//! Each check wraps an operation in a scalar loss `L = sum(cot * f(x))`
//! with a fixed random cotangent, computes analytic gradients through the
//! operation's backward, and compares against central differences from the
//! oracle crate. All checks run in f64 with step 1e-5 and the relative
//! error metric `|a - b| / max(|a|, |b|, 1e-8)`.

use crate::error::{Error, Result};
use crate::model::{ModelConfig, NatBlock};
use crate::na::{na_backward, na_forward, NaParams};
use crate::nn::{
    conv2d_same, conv2d_same_backward, effn_backward, effn_forward, effn_fwd_cached, gelu,
    gelu_backward, layernorm_backward, layernorm_fwd, linear, linear_backward, pixelshuffle,
    pixelunshuffle, spatial_shift, spatial_shift_backward, ConvParams, EffnParams, LayerNorm,
    ShiftSpec,
};
use crate::tensor::{CounterRng, Tensor};
use crate::train::{l1_loss, l1_loss_grad};

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_THRESHOLD: f64 = 1e-4;

/// Names accepted by [`gradcheck_op`] and the `gradcheck` subcommand.
pub const GRADCHECK_OPS: &[&str] = &[
    "na",
    "conv2d",
    "linear",
    "layernorm",
    "gelu",
    "pixelshuffle",
    "spatial_shift",
    "effn",
    "l1_loss",
    "nat_block",
];

/// Worst finite-difference disagreement for one tensor.
#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub tensor: String,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

/// Per-operation verification outcome, one entry per learnable tensor plus
/// the input gradient.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub op: String,
    pub seed: u64,
    pub step: f64,
    pub threshold: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.max_rel_err <= self.threshold)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "op {:<13} seed {:<3} step {:.0e}  ",
            self.op, self.seed, self.step
        );
        out.push_str(if self.pass() { "PASS\n" } else { "FAIL\n" });
        for e in &self.entries {
            let mark = if e.max_rel_err <= self.threshold { "ok  " } else { "FAIL" };
            out.push_str(&format!(
                "  {mark} {:<24} max rel err {:.3e} (at {})\n",
                e.tensor, e.max_rel_err, e.worst_index
            ));
        }
        out
    }
}

/// Compare an analytic gradient for one tensor against central differences
/// of `eval` at `value`.
fn fd_entry(
    name: &str,
    value: &Tensor<f64>,
    analytic: &Tensor<f64>,
    eval: impl FnMut(&[f64]) -> f64,
) -> GradCheckEntry {
    let mut eval = eval;
    let fd = tcsr_oracles::central_diff(|xs| eval(xs), value.data(), GRADCHECK_STEP);
    let mut max_rel = 0.0f64;
    let mut worst = 0usize;
    for (i, (a, b)) in analytic.data().iter().zip(&fd).enumerate() {
        let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    GradCheckEntry {
        tensor: name.into(),
        max_rel_err: max_rel,
        worst_index: worst,
    }
}

fn dot(cot: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    cot.data().iter().zip(y.data()).map(|(c, v)| c * v).sum()
}

fn with_replaced(t: &Tensor<f64>, data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(t.shape(), data.to_vec()).expect("same element count")
}

fn check_na(seed: u64) -> GradCheckReport {
    let mut entries = Vec::new();
    for kernel in [1usize, 3, 5, 7] {
        let (h, w, c, heads) = (7usize, 7usize, 8usize, 2usize);
        let mut rng = CounterRng::new(seed ^ ((kernel as u64) << 8));
        let side = 2 * kernel - 1;
        let p = NaParams {
            wq: rng.normal_tensor(&[c, c], 0.0, 0.3),
            wk: rng.normal_tensor(&[c, c], 0.0, 0.3),
            wv: rng.normal_tensor(&[c, c], 0.0, 0.3),
            wo: rng.normal_tensor(&[c, c], 0.0, 0.3),
            bo: rng.normal_tensor(&[c], 0.0, 0.1),
            rpb: rng.normal_tensor(&[heads, side, side], 0.0, 0.2),
            heads,
            kernel,
        };
        let x = rng.normal_tensor::<f64>(&[1, h, w, c], 0.0, 1.0);
        let cot = rng.normal_tensor::<f64>(&[1, h, w, c], 0.0, 1.0);
        let (gx, grads) = na_backward(&x, &p, &cot).expect("valid instance");

        let tag = |s: &str| format!("na[k={kernel}].{s}");
        entries.push(fd_entry(&tag("x"), &x, &gx, |xs| {
            dot(&cot, &na_forward(&with_replaced(&x, xs), &p).unwrap())
        }));
        let param_checks: [(&str, &Tensor<f64>, &Tensor<f64>); 6] = [
            ("wq", &p.wq, &grads.wq),
            ("wk", &p.wk, &grads.wk),
            ("wv", &p.wv, &grads.wv),
            ("wo", &p.wo, &grads.wo),
            ("bo", &p.bo, &grads.bo),
            ("rpb", &p.rpb, &grads.rpb),
        ];
        for (name, value, analytic) in param_checks {
            entries.push(fd_entry(&tag(name), value, analytic, |vs| {
                let mut pp = p.clone();
                match name {
                    "wq" => pp.wq = with_replaced(&p.wq, vs),
                    "wk" => pp.wk = with_replaced(&p.wk, vs),
                    "wv" => pp.wv = with_replaced(&p.wv, vs),
                    "wo" => pp.wo = with_replaced(&p.wo, vs),
                    "bo" => pp.bo = with_replaced(&p.bo, vs),
                    _ => pp.rpb = with_replaced(&p.rpb, vs),
                }
                dot(&cot, &na_forward(&x, &pp).unwrap())
            }));
        }
    }
    GradCheckReport {
        op: "na".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

fn check_conv2d(seed: u64) -> GradCheckReport {
    let mut rng = CounterRng::new(seed);
    let x = rng.normal_tensor::<f64>(&[2, 5, 6, 3], 0.0, 1.0);
    let p = ConvParams::new(
        rng.normal_tensor(&[3, 3, 3, 4], 0.0, 0.4),
        rng.normal_tensor(&[4], 0.0, 0.2),
    )
    .unwrap();
    let cot = rng.normal_tensor::<f64>(&[2, 5, 6, 4], 0.0, 1.0);
    let (gx, grads) = conv2d_same_backward(&x, &p, &cot).unwrap();

    let entries = vec![
        fd_entry("x", &x, &gx, |xs| {
            dot(&cot, &conv2d_same(&with_replaced(&x, xs), &p).unwrap())
        }),
        fd_entry("weight", &p.weight, &grads.weight, |ws| {
            let pp = ConvParams::new(with_replaced(&p.weight, ws), p.bias.clone()).unwrap();
            dot(&cot, &conv2d_same(&x, &pp).unwrap())
        }),
        fd_entry("bias", &p.bias, &grads.bias, |bs| {
            let pp = ConvParams::new(p.weight.clone(), with_replaced(&p.bias, bs)).unwrap();
            dot(&cot, &conv2d_same(&x, &pp).unwrap())
        }),
    ];
    GradCheckReport {
        op: "conv2d".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

fn check_linear(seed: u64) -> GradCheckReport {
    let mut rng = CounterRng::new(seed);
    let x = rng.normal_tensor::<f64>(&[3, 7, 5], 0.0, 1.0);
    let w = rng.normal_tensor::<f64>(&[5, 4], 0.0, 0.5);
    let b = rng.normal_tensor::<f64>(&[4], 0.0, 0.2);
    let cot = rng.normal_tensor::<f64>(&[3, 7, 4], 0.0, 1.0);
    let (gx, gw, gb) = linear_backward(&x, &w, &cot).unwrap();

    let entries = vec![
        fd_entry("x", &x, &gx, |xs| {
            dot(&cot, &linear(&with_replaced(&x, xs), &w, &b).unwrap())
        }),
        fd_entry("w", &w, &gw, |ws| {
            dot(&cot, &linear(&x, &with_replaced(&w, ws), &b).unwrap())
        }),
        fd_entry("b", &b, &gb, |bs| {
            dot(&cot, &linear(&x, &w, &with_replaced(&b, bs)).unwrap())
        }),
    ];
    GradCheckReport {
        op: "linear".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

fn check_layernorm(seed: u64) -> GradCheckReport {
    let mut rng = CounterRng::new(seed);
    let p = LayerNorm::<f64> {
        gamma: rng.normal_tensor(&[8], 1.0, 0.2),
        beta: rng.normal_tensor(&[8], 0.0, 0.2),
        eps: 1e-5,
    };
    let x = rng.normal_tensor::<f64>(&[2, 6, 8], 0.0, 1.5);
    let cot = rng.normal_tensor::<f64>(&[2, 6, 8], 0.0, 1.0);
    let (_, cache) = layernorm_fwd(&x, &p).unwrap();
    let (gx, gg, gb) = layernorm_backward(&x, &p, &cache, &cot).unwrap();

    let run = |x: &Tensor<f64>, p: &LayerNorm<f64>| layernorm_fwd(x, p).unwrap().0;
    let entries = vec![
        fd_entry("x", &x, &gx, |xs| dot(&cot, &run(&with_replaced(&x, xs), &p))),
        fd_entry("gamma", &p.gamma, &gg, |gs| {
            let mut pp = p.clone();
            pp.gamma = with_replaced(&p.gamma, gs);
            dot(&cot, &run(&x, &pp))
        }),
        fd_entry("beta", &p.beta, &gb, |bs| {
            let mut pp = p.clone();
            pp.beta = with_replaced(&p.beta, bs);
            dot(&cot, &run(&x, &pp))
        }),
    ];
    GradCheckReport {
        op: "layernorm".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

fn check_gelu(seed: u64) -> GradCheckReport {
    let mut rng = CounterRng::new(seed);
    let x = rng.normal_tensor::<f64>(&[64], 0.0, 2.0);
    let cot = rng.normal_tensor::<f64>(&[64], 0.0, 1.0);
    let gx = gelu_backward(&x, &cot);
    let entries = vec![fd_entry("x", &x, &gx, |xs| {
        dot(&cot, &gelu(&with_replaced(&x, xs)))
    })];
    GradCheckReport {
        op: "gelu".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

fn check_pixelshuffle(seed: u64) -> GradCheckReport {
    let mut rng = CounterRng::new(seed);
    let x = rng.normal_tensor::<f64>(&[1, 3, 4, 12], 0.0, 1.0);
    let cot = rng.normal_tensor::<f64>(&[1, 6, 8, 3], 0.0, 1.0);
    // The adjoint of a permutation is its inverse.
    let gx = pixelunshuffle(&cot, 2).unwrap();
    let entries = vec![fd_entry("x", &x, &gx, |xs| {
        dot(&cot, &pixelshuffle(&with_replaced(&x, xs), 2).unwrap())
    })];
    GradCheckReport {
        op: "pixelshuffle".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

fn check_spatial_shift(seed: u64) -> GradCheckReport {
    let spec = ShiftSpec::default_8();
    let mut rng = CounterRng::new(seed);
    let x = rng.normal_tensor::<f64>(&[1, 5, 6, 16], 0.0, 1.0);
    let cot = rng.normal_tensor::<f64>(&[1, 5, 6, 16], 0.0, 1.0);
    let gx = spatial_shift_backward(&cot, &spec).unwrap();
    let entries = vec![fd_entry("x", &x, &gx, |xs| {
        dot(&cot, &spatial_shift(&with_replaced(&x, xs), &spec).unwrap())
    })];
    GradCheckReport {
        op: "spatial_shift".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

fn check_effn(seed: u64) -> GradCheckReport {
    let mut rng = CounterRng::new(seed);
    let (c, hidden) = (8usize, 16usize);
    let p = EffnParams {
        w1: rng.normal_tensor(&[c, hidden], 0.0, 0.3),
        b1: rng.normal_tensor(&[hidden], 0.0, 0.1),
        w2: rng.normal_tensor(&[hidden, c], 0.0, 0.3),
        b2: rng.normal_tensor(&[c], 0.0, 0.1),
        spec: ShiftSpec::default_8(),
    };
    let x = rng.normal_tensor::<f64>(&[1, 5, 5, c], 0.0, 1.0);
    let cot = rng.normal_tensor::<f64>(&[1, 5, 5, c], 0.0, 1.0);
    let (_, cache) = effn_fwd_cached(&x, &p).unwrap();
    let (gx, grads) = effn_backward(&x, &p, &cache, &cot).unwrap();

    let mut entries = vec![fd_entry("x", &x, &gx, |xs| {
        dot(&cot, &effn_forward(&with_replaced(&x, xs), &p).unwrap())
    })];
    let param_checks: [(&str, &Tensor<f64>, &Tensor<f64>); 4] = [
        ("w1", &p.w1, &grads.w1),
        ("b1", &p.b1, &grads.b1),
        ("w2", &p.w2, &grads.w2),
        ("b2", &p.b2, &grads.b2),
    ];
    for (name, value, analytic) in param_checks {
        entries.push(fd_entry(name, value, analytic, |vs| {
            let mut pp = p.clone();
            match name {
                "w1" => pp.w1 = with_replaced(&p.w1, vs),
                "b1" => pp.b1 = with_replaced(&p.b1, vs),
                "w2" => pp.w2 = with_replaced(&p.w2, vs),
                _ => pp.b2 = with_replaced(&p.b2, vs),
            }
            dot(&cot, &effn_forward(&x, &pp).unwrap())
        }));
    }
    GradCheckReport {
        op: "effn".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

fn check_l1_loss(seed: u64) -> GradCheckReport {
    let mut rng = CounterRng::new(seed);
    let hr = rng.normal_tensor::<f64>(&[4, 6], 0.0, 1.0);
    // Keep every |sr - hr| well away from the kink at zero so central
    // differences stay on one side of it.
    let mut sr = rng.normal_tensor::<f64>(&[4, 6], 0.0, 1.0);
    for (s, h) in sr.data_mut().iter_mut().zip(hr.data()) {
        if (*s - h).abs() < 1e-3 {
            *s = h + 1e-3 * if *s >= *h { 1.0 } else { -1.0 };
        }
    }
    let g = l1_loss_grad(&sr, &hr).unwrap();
    let entries = vec![fd_entry("sr", &sr, &g, |xs| {
        l1_loss(&with_replaced(&sr, xs), &hr).unwrap()
    })];
    GradCheckReport {
        op: "l1_loss".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

fn check_nat_block(seed: u64) -> GradCheckReport {
    let mut config = ModelConfig::tiny(2);
    config.channels = 8;
    config.heads = 2;
    config.kernel = 3;
    let mut rng = CounterRng::new(seed);
    let mut block = NatBlock::<f64>::init(&config, &mut rng).unwrap();
    // Initialization-scale weights make the attention-logit gradients too
    // small to resolve by finite differences; use well-scaled ones instead.
    for w in [
        &mut block.na.wq,
        &mut block.na.wk,
        &mut block.na.wv,
        &mut block.na.wo,
        &mut block.effn.w1,
        &mut block.effn.w2,
    ] {
        *w = rng.normal_tensor(w.shape(), 0.0, 0.3);
    }
    for b in [&mut block.na.bo, &mut block.effn.b1, &mut block.effn.b2] {
        *b = rng.normal_tensor(b.shape(), 0.0, 0.1);
    }
    block.na.rpb = rng.normal_tensor(block.na.rpb.shape(), 0.0, 0.2);
    for g in [&mut block.norm1.gamma, &mut block.norm2.gamma] {
        *g = rng.normal_tensor(g.shape(), 1.0, 0.2);
    }
    for b in [&mut block.norm1.beta, &mut block.norm2.beta] {
        *b = rng.normal_tensor(b.shape(), 0.0, 0.2);
    }
    let x = rng.normal_tensor::<f64>(&[1, 5, 5, 8], 0.0, 1.0);
    let cot = rng.normal_tensor::<f64>(&[1, 5, 5, 8], 0.0, 1.0);
    let (_, cache) = block.forward_with_cache(&x).unwrap();
    let (gx, grads) = block.backward(&x, &cache, &cot).unwrap();

    let run = |block: &NatBlock<f64>, x: &Tensor<f64>| block.forward(x).unwrap();
    let mut entries = vec![fd_entry("x", &x, &gx, |xs| {
        dot(&cot, &run(&block, &with_replaced(&x, xs)))
    })];

    // Every learnable tensor in the block, perturbed one at a time.
    type Field = (
        &'static str,
        fn(&NatBlock<f64>) -> &Tensor<f64>,
        fn(&mut NatBlock<f64>) -> &mut Tensor<f64>,
    );
    let fields: Vec<Field> = vec![
        ("norm1.gamma", |b| &b.norm1.gamma, |b| &mut b.norm1.gamma),
        ("norm1.beta", |b| &b.norm1.beta, |b| &mut b.norm1.beta),
        ("na.wq", |b| &b.na.wq, |b| &mut b.na.wq),
        ("na.wk", |b| &b.na.wk, |b| &mut b.na.wk),
        ("na.wv", |b| &b.na.wv, |b| &mut b.na.wv),
        ("na.wo", |b| &b.na.wo, |b| &mut b.na.wo),
        ("na.bo", |b| &b.na.bo, |b| &mut b.na.bo),
        ("na.rpb", |b| &b.na.rpb, |b| &mut b.na.rpb),
        ("norm2.gamma", |b| &b.norm2.gamma, |b| &mut b.norm2.gamma),
        ("norm2.beta", |b| &b.norm2.beta, |b| &mut b.norm2.beta),
        ("effn.w1", |b| &b.effn.w1, |b| &mut b.effn.w1),
        ("effn.b1", |b| &b.effn.b1, |b| &mut b.effn.b1),
        ("effn.w2", |b| &b.effn.w2, |b| &mut b.effn.w2),
        ("effn.b2", |b| &b.effn.b2, |b| &mut b.effn.b2),
    ];
    let analytic: Vec<&Tensor<f64>> = vec![
        &grads.norm1_gamma,
        &grads.norm1_beta,
        &grads.na.wq,
        &grads.na.wk,
        &grads.na.wv,
        &grads.na.wo,
        &grads.na.bo,
        &grads.na.rpb,
        &grads.norm2_gamma,
        &grads.norm2_beta,
        &grads.effn.w1,
        &grads.effn.b1,
        &grads.effn.w2,
        &grads.effn.b2,
    ];
    for ((name, get, get_mut), analytic) in fields.into_iter().zip(analytic) {
        entries.push(fd_entry(name, get(&block), analytic, |vs| {
            let mut bb = block.clone();
            *get_mut(&mut bb) = with_replaced(get(&block), vs);
            dot(&cot, &run(&bb, &x))
        }));
    }
    GradCheckReport {
        op: "nat_block".into(),
        seed,
        step: GRADCHECK_STEP,
        threshold: GRADCHECK_THRESHOLD,
        entries,
    }
}

/// Run the finite-difference suite for one named operation.
pub fn gradcheck_op(op: &str, seed: u64) -> Result<GradCheckReport> {
    Ok(match op {
        "na" => check_na(seed),
        "conv2d" => check_conv2d(seed),
        "linear" => check_linear(seed),
        "layernorm" => check_layernorm(seed),
        "gelu" => check_gelu(seed),
        "pixelshuffle" => check_pixelshuffle(seed),
        "spatial_shift" => check_spatial_shift(seed),
        "effn" => check_effn(seed),
        "l1_loss" => check_l1_loss(seed),
        "nat_block" => check_nat_block(seed),
        other => {
            return Err(Error::Config(format!(
                "unknown op '{other}'; known: {}",
                GRADCHECK_OPS.join(", ")
            )))
        }
    })
}

/// Run every (optionally filtered) operation across the given seeds.
pub fn run_gradcheck(filter: Option<&str>, seeds: &[u64]) -> Result<Vec<GradCheckReport>> {
    let ops: Vec<&str> = match filter {
        Some(name) => {
            if !GRADCHECK_OPS.contains(&name) {
                return Err(Error::Config(format!(
                    "unknown op '{name}'; known: {}",
                    GRADCHECK_OPS.join(", ")
                )));
            }
            vec![name]
        }
        None => GRADCHECK_OPS.to_vec(),
    };
    let mut reports = Vec::new();
    for op in ops {
        for &seed in seeds {
            reports.push(gradcheck_op(op, seed)?);
        }
    }
    Ok(reports)
}
