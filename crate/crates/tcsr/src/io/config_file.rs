//! Flat `key=value` configuration files covering the model and training
//! hyperparameters. `#`-prefixed lines are comments; unknown keys are
//! rejected; `parse` inverts `serialize` exactly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::train::TrainConfig;

/// Model plus training settings as read from one config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl ConfigFile {
    pub fn new(model: ModelConfig) -> Self {
        ConfigFile {
            model,
            train: TrainConfig::default(),
        }
    }
}

pub fn serialize_config(cfg: &ConfigFile) -> String {
    let m = &cfg.model;
    let t = &cfg.train;
    format!(
        "# model\n\
         variant={}\n\
         channels={}\n\
         blocks={}\n\
         kernel={}\n\
         heads={}\n\
         ffn_ratio={}\n\
         shift_groups={}\n\
         shift_stride={}\n\
         scale={}\n\
         # training\n\
         patch={}\n\
         batch={}\n\
         lr={}\n\
         steps={}\n\
         seed={}\n\
         beta1={}\n\
         beta2={}\n\
         eps={}\n\
         checkpoint_interval={}\n\
         augment={}\n",
        m.variant,
        m.channels,
        m.blocks,
        m.kernel,
        m.heads,
        m.ffn_ratio,
        m.shift_groups,
        m.shift_stride,
        m.scale,
        t.patch,
        t.batch,
        t.lr,
        t.steps,
        t.seed,
        t.beta1,
        t.beta2,
        t.eps,
        t.checkpoint_interval,
        t.augment,
    )
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut model = ModelConfig {
        channels: 0,
        blocks: 0,
        kernel: 0,
        heads: 0,
        ffn_ratio: 2,
        shift_groups: 8,
        shift_stride: 1,
        scale: 0,
        variant: "custom".into(),
    };
    let mut train = TrainConfig::default();
    let mut saw = std::collections::HashSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        saw.insert(key.to_string());
        let bad = |what: &str| {
            Error::Config(format!("line {}: '{value}' is not a valid {what} for {key}", lineno + 1))
        };
        match key {
            "variant" => model.variant = value.to_string(),
            "channels" => model.channels = value.parse().map_err(|_| bad("integer"))?,
            "blocks" => model.blocks = value.parse().map_err(|_| bad("integer"))?,
            "kernel" => model.kernel = value.parse().map_err(|_| bad("integer"))?,
            "heads" => model.heads = value.parse().map_err(|_| bad("integer"))?,
            "ffn_ratio" => model.ffn_ratio = value.parse().map_err(|_| bad("integer"))?,
            "shift_groups" => model.shift_groups = value.parse().map_err(|_| bad("integer"))?,
            "shift_stride" => model.shift_stride = value.parse().map_err(|_| bad("integer"))?,
            "scale" => model.scale = value.parse().map_err(|_| bad("integer"))?,
            "patch" => train.patch = value.parse().map_err(|_| bad("integer"))?,
            "batch" => train.batch = value.parse().map_err(|_| bad("integer"))?,
            "lr" => train.lr = value.parse().map_err(|_| bad("number"))?,
            "steps" => train.steps = value.parse().map_err(|_| bad("integer"))?,
            "seed" => train.seed = value.parse().map_err(|_| bad("integer"))?,
            "beta1" => train.beta1 = value.parse().map_err(|_| bad("number"))?,
            "beta2" => train.beta2 = value.parse().map_err(|_| bad("number"))?,
            "eps" => train.eps = value.parse().map_err(|_| bad("number"))?,
            "checkpoint_interval" => {
                train.checkpoint_interval = value.parse().map_err(|_| bad("integer"))?
            }
            "augment" => train.augment = value.parse().map_err(|_| bad("bool"))?,
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }

    for required in ["channels", "blocks", "kernel", "heads", "scale"] {
        if !saw.contains(required) {
            return Err(Error::Config(format!("missing required key '{required}'")));
        }
    }
    model.validate()?;
    Ok(ConfigFile { model, train })
}

pub fn load_config_file(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn save_config_file(cfg: &ConfigFile, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_config(cfg)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_all_reference_variants() {
        for model in [
            ModelConfig::tiny(2),
            ModelConfig::base(3),
            ModelConfig::large(4),
        ] {
            let cfg = ConfigFile::new(model);
            let text = serialize_config(&cfg);
            let back = parse_config(&text).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let cfg = ConfigFile::new(ModelConfig::tiny(2));
        let mut text = serialize_config(&cfg);
        text.push_str("mystery=1\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("mystery"));
    }

    #[test]
    fn missing_required_key_rejected() {
        assert!(parse_config("channels=32\nblocks=8\n").is_err());
    }

    #[test]
    fn nondefault_train_values_roundtrip() {
        let mut cfg = ConfigFile::new(ModelConfig::tiny(2));
        cfg.train.lr = 3.5e-5;
        cfg.train.steps = 123;
        cfg.train.augment = false;
        cfg.train.eps = 1e-9;
        let back = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(cfg, back);
    }
}
