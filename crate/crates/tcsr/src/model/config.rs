use crate::error::{Error, Result};

/// Hyperparameters of one network instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Feature width C.
    pub channels: usize,
    /// Number of attention blocks.
    pub blocks: usize,
    /// Attention window size k (odd).
    pub kernel: usize,
    /// Attention heads.
    pub heads: usize,
    /// Hidden width of the feed-forward network as a multiple of `channels`.
    pub ffn_ratio: usize,
    /// Spatial-shift channel groups.
    pub shift_groups: usize,
    /// Spatial-shift stride in pixels.
    pub shift_stride: usize,
    /// Upscaling factor (2, 3 or 4).
    pub scale: usize,
    /// Human-readable variant name.
    pub variant: String,
}

impl ModelConfig {
    /// 8 blocks, 32 channels, window 7 — the ablation-sized model.
    pub fn tiny(scale: usize) -> Self {
        ModelConfig {
            channels: 32,
            blocks: 8,
            kernel: 7,
            heads: 4,
            ffn_ratio: 2,
            shift_groups: 8,
            shift_stride: 1,
            scale,
            variant: "tiny".into(),
        }
    }

    /// 16 blocks, 64 channels, window 11.
    pub fn base(scale: usize) -> Self {
        ModelConfig {
            channels: 64,
            blocks: 16,
            kernel: 11,
            heads: 4,
            ffn_ratio: 2,
            shift_groups: 8,
            shift_stride: 1,
            scale,
            variant: "B".into(),
        }
    }

    /// 32 blocks, 64 channels, window 11.
    pub fn large(scale: usize) -> Self {
        ModelConfig {
            channels: 64,
            blocks: 32,
            kernel: 11,
            heads: 4,
            ffn_ratio: 2,
            shift_groups: 8,
            shift_stride: 1,
            scale,
            variant: "L".into(),
        }
    }

    pub fn by_variant(name: &str, scale: usize) -> Result<Self> {
        match name {
            "tiny" => Ok(Self::tiny(scale)),
            "B" | "base" => Ok(Self::base(scale)),
            "L" | "large" => Ok(Self::large(scale)),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }

    pub fn hidden(&self) -> usize {
        self.ffn_ratio * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.blocks == 0 || self.heads == 0 {
            return Err(Error::Config("channels, blocks and heads must be >= 1".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel must be odd, got {}", self.kernel)));
        }
        if !self.channels.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "channels {} not divisible by heads {}",
                self.channels, self.heads
            )));
        }
        if !self.hidden().is_multiple_of(self.shift_groups) {
            return Err(Error::Config(format!(
                "hidden width {} not divisible by {} shift groups",
                self.hidden(),
                self.shift_groups
            )));
        }
        if !(2..=4).contains(&self.scale) {
            return Err(Error::Config(format!("scale must be 2, 3 or 4, got {}", self.scale)));
        }
        if self.shift_stride == 0 {
            return Err(Error::Config("shift stride must be >= 1".into()));
        }
        Ok(())
    }
}
