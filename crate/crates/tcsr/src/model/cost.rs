use crate::error::Result;
use crate::na::na_param_count;

use super::config::ModelConfig;

/// Module families the asymptotic cost formulas cover. `Conv`, `Swin` and
/// `Na` take square `channels x channels` maps with spatial extent `kernel`;
/// the FFN kinds are two per-pixel linear layers through `hidden`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModuleKind {
    Conv { channels: usize, kernel: usize },
    Swin { channels: usize, kernel: usize },
    Na { channels: usize, kernel: usize },
    Ffn { channels: usize, hidden: usize },
    Effn { channels: usize, hidden: usize },
}

/// Multiply-accumulate count for one module over an `h x w` feature map.
///
/// Conv: `H W C^2 K^2`. Swin and Na: `3 H W C^2 + 2 H W C K^2` (query, key
/// and value projections plus the window attention itself, single-head
/// form). Ffn and Effn: `2 H W C hidden` — the spatial shift moves data but
/// multiplies nothing, so the two are identical.
pub fn estimate_flops(kind: ModuleKind, h: usize, w: usize) -> u64 {
    let hw = (h * w) as u64;
    match kind {
        ModuleKind::Conv { channels, kernel } => {
            let (c, k) = (channels as u64, kernel as u64);
            hw * c * c * k * k
        }
        ModuleKind::Swin { channels, kernel } | ModuleKind::Na { channels, kernel } => {
            let (c, k) = (channels as u64, kernel as u64);
            3 * hw * c * c + 2 * hw * c * k * k
        }
        ModuleKind::Ffn { channels, hidden } | ModuleKind::Effn { channels, hidden } => {
            2 * hw * channels as u64 * hidden as u64
        }
    }
}

/// Learnable scalars for one module; bias-free forms so growth in the
/// kernel size is directly comparable across kinds.
pub fn estimate_params(kind: ModuleKind) -> u64 {
    match kind {
        ModuleKind::Conv { channels, kernel } => (channels * channels * kernel * kernel) as u64,
        ModuleKind::Swin { channels, kernel } | ModuleKind::Na { channels, kernel } => {
            na_param_count(channels, 1, kernel) as u64
        }
        ModuleKind::Ffn { channels, hidden } | ModuleKind::Effn { channels, hidden } => {
            // Two linear layers with biases; the shift adds nothing.
            (channels * hidden + hidden + hidden * channels + channels) as u64
        }
    }
}

/// Weight count of a convolution layer, biases excluded.
pub fn conv_param_count(c_in: usize, c_out: usize, kernel: usize) -> usize {
    kernel * kernel * c_in * c_out
}

/// One line of a [`CostReport`].
#[derive(Debug, Clone)]
pub struct CostRow {
    pub name: String,
    pub params: u64,
    pub flops: u64,
}

/// Itemized parameter and multiply-accumulate counts for a model at a given
/// input extent. FLOPs count projection, attention and convolution MACs;
/// normalization, bias adds, activations and data movement are excluded as
/// lower-order terms.
#[derive(Debug, Clone)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
    pub height: usize,
    pub width: usize,
}

impl CostReport {
    pub fn total_params(&self) -> u64 {
        self.rows.iter().map(|r| r.params).sum()
    }

    pub fn total_flops(&self) -> u64 {
        self.rows.iter().map(|r| r.flops).sum()
    }

    pub fn to_text(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain(["total".len()])
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_w$}  {:>12}  {:>16}\n",
            "layer", "params", "flops"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<name_w$}  {:>12}  {:>16}\n",
                r.name, r.params, r.flops
            ));
        }
        out.push_str(&format!(
            "{:<name_w$}  {:>12}  {:>16}\n",
            "total",
            self.total_params(),
            self.total_flops()
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,params,flops\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.name, r.params, r.flops));
        }
        out.push_str(&format!("total,{},{}\n", self.total_params(), self.total_flops()));
        out
    }
}

/// Exact per-layer parameter counts and MAC estimates for a model at LR
/// extent `h x w`. Totals match `Tcsr::param_count` for the same config.
pub fn model_cost(config: &ModelConfig, h: usize, w: usize) -> Result<CostReport> {
    config.validate()?;
    let c = config.channels;
    let hw = (h * w) as u64;
    let hidden = config.hidden();
    let mut rows = Vec::new();

    rows.push(CostRow {
        name: "shallow_conv".into(),
        params: (3 * 3 * 3 * c + c) as u64,
        flops: hw * 9 * 3 * c as u64,
    });
    for i in 0..config.blocks {
        rows.push(CostRow {
            name: format!("block{i}.norm1"),
            params: 2 * c as u64,
            flops: 0,
        });
        rows.push(CostRow {
            name: format!("block{i}.na"),
            // Four square projections, output bias, one bias table per block.
            params: (4 * c * c
                + c
                + config.heads * (2 * config.kernel - 1) * (2 * config.kernel - 1))
                as u64,
            flops: 4 * hw * (c * c) as u64
                + 2 * hw * (c * config.kernel * config.kernel) as u64,
        });
        rows.push(CostRow {
            name: format!("block{i}.norm2"),
            params: 2 * c as u64,
            flops: 0,
        });
        rows.push(CostRow {
            name: format!("block{i}.effn"),
            params: (c * hidden + hidden + hidden * c + c) as u64,
            flops: 2 * hw * (c * hidden) as u64,
        });
    }
    let out_c = config.scale * config.scale * 3;
    rows.push(CostRow {
        name: "recon_conv".into(),
        params: (3 * 3 * c * out_c + out_c) as u64,
        flops: hw * 9 * (c * out_c) as u64,
    });
    Ok(CostReport {
        rows,
        height: h,
        width: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tcsr;

    #[test]
    fn conv_formula_per_pixel() {
        assert_eq!(estimate_flops(ModuleKind::Conv { channels: 1, kernel: 3 }, 1, 1), 9);
    }

    #[test]
    fn window_13_attention_near_conv3_at_c64() {
        let na = estimate_flops(ModuleKind::Na { channels: 64, kernel: 13 }, 1, 1);
        let conv = estimate_flops(ModuleKind::Conv { channels: 64, kernel: 3 }, 1, 1);
        assert_eq!(na, 33_920);
        assert_eq!(conv, 36_864);
        let ratio = na as f64 / conv as f64;
        assert!((0.85..=1.0).contains(&ratio));
    }

    #[test]
    fn attention_flops_increase_with_kernel() {
        let mut prev = 0;
        for k in [3, 5, 7, 9, 11, 13] {
            let f = estimate_flops(ModuleKind::Na { channels: 64, kernel: k }, 8, 8);
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn conv_beats_attention_growth_for_all_odd_kernels_at_c64() {
        // With C = 64, conv costs more than attention for every K >= 3.
        for k in (3..=31).step_by(2) {
            let na = estimate_flops(ModuleKind::Na { channels: 64, kernel: k }, 1, 1);
            let conv = estimate_flops(ModuleKind::Conv { channels: 64, kernel: k }, 1, 1);
            assert!(conv > na, "K = {k}");
        }
    }

    #[test]
    fn effn_costs_exactly_match_plain_ffn() {
        let (c, hidden) = (64, 128);
        assert_eq!(
            estimate_flops(ModuleKind::Ffn { channels: c, hidden }, 48, 48),
            estimate_flops(ModuleKind::Effn { channels: c, hidden }, 48, 48),
        );
        assert_eq!(
            estimate_params(ModuleKind::Ffn { channels: c, hidden }),
            estimate_params(ModuleKind::Effn { channels: c, hidden }),
        );
    }

    #[test]
    fn shallow_conv_param_arithmetic() {
        let report = model_cost(&ModelConfig::base(4), 64, 64).unwrap();
        assert_eq!(report.rows[0].params, 3 * 3 * 3 * 64 + 64); // 1792
    }

    #[test]
    fn report_totals_match_instantiated_model() {
        for config in [ModelConfig::tiny(2), ModelConfig::base(4), ModelConfig::large(3)] {
            let report = model_cost(&config, 32, 32).unwrap();
            let model = Tcsr::<f32>::init(config, 1).unwrap();
            assert_eq!(report.total_params(), model.param_count() as u64);
            let sum: u64 = report.rows.iter().map(|r| r.params).sum();
            assert_eq!(sum, report.total_params());
        }
    }

    #[test]
    fn kernel_sweep_changes_only_bias_table_term() {
        let base = ModelConfig::tiny(2);
        let at = |k: usize| {
            let mut c = base.clone();
            c.kernel = k;
            model_cost(&c, 32, 32).unwrap()
        };
        let k3 = at(3);
        for k in [5, 7, 9, 11, 13] {
            let rep = at(k);
            let delta = rep.total_params() - k3.total_params();
            let rpb_delta =
                base.blocks as u64 * base.heads as u64 * ((2 * k as u64 - 1).pow(2) - 25);
            assert_eq!(delta, rpb_delta, "k = {k}");
        }
    }
}
