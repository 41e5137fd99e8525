//! Binary checkpoint format.
//!
//! ```text
//! magic   4 bytes  "TCSR"
//! version u32 LE   (currently 1)
//! count   u64 LE   number of tensor records
//! record: name_len u32 LE | name UTF-8 | dtype u8 | rank u32 LE
//!         | dims u64 LE x rank | values raw little-endian
//! trailer u64 LE   FNV-1a 64 checksum of everything after the version
//!                  field (count + records)
//! ```
//!
//! Fixed little-endian layout keeps files platform independent; loads
//! reproduce every tensor bit-exactly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ParamStore, Tcsr};
use crate::tensor::{Dtype, Scalar, Tensor};
use crate::train::AdamState;

const MAGIC: &[u8; 4] = b"TCSR";
const VERSION: u32 = 1;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Serialize a store to bytes.
pub fn encode_store<T: Scalar>(store: &ParamStore<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for (name, tensor) in store.entries() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(T::DTYPE.tag());
        buf.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in tensor.data() {
            v.write_le(&mut buf);
        }
    }
    let checksum = fnv1a64(&buf[8..]);
    buf.extend_from_slice(&checksum.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file: wanted {n} bytes at offset {}, {} remain",
                self.at,
                self.bytes.len() - self.at
            )));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64_le(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parse bytes produced by [`encode_store`]. The element type must match
/// the file's dtype tags.
pub fn decode_store<T: Scalar>(bytes: &[u8]) -> Result<ParamStore<T>> {
    if bytes.len() < 20 {
        return Err(Error::Checkpoint("file shorter than header + trailer".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}, this build reads {VERSION}"
        )));
    }
    let payload = &bytes[8..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let actual = fnv1a64(payload);
    if stored != actual {
        return Err(Error::Checkpoint(format!(
            "checksum mismatch: file says {stored:#018x}, payload hashes to {actual:#018x}"
        )));
    }

    let mut r = Reader { bytes: payload, at: 0 };
    let count = r.u64_le()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = r.u32_le()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let tag = r.take(1)?[0];
        let dtype = Dtype::from_tag(tag)
            .ok_or_else(|| Error::Checkpoint(format!("unknown dtype tag {tag}")))?;
        if dtype != T::DTYPE {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}' is {dtype}, load requested {}",
                T::DTYPE
            )));
        }
        let rank = r.u32_le()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64_le()? as usize);
        }
        let numel: usize = shape.iter().product();
        let width = T::DTYPE.byte_width();
        let raw = r.take(numel * width)?;
        let data = raw.chunks_exact(width).map(T::read_le).collect();
        store.push(name, Tensor::from_vec(&shape, data)?);
    }
    if r.at != payload.len() {
        return Err(Error::Checkpoint(format!(
            "{} unread bytes after the last record",
            payload.len() - r.at
        )));
    }
    Ok(store)
}

/// Dtype of the first tensor record, or `None` for an empty store.
pub fn peek_dtype(path: &Path) -> Result<Option<Dtype>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint".into()));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if count == 0 {
        return Ok(None);
    }
    let name_len = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let tag_at = 20 + name_len;
    if tag_at >= bytes.len() {
        return Err(Error::Checkpoint("truncated first record".into()));
    }
    Ok(Dtype::from_tag(bytes[tag_at]))
}

/// Write a store to disk; the file appears atomically via a temp-and-rename.
pub fn save_store<T: Scalar>(store: &ParamStore<T>, path: &Path) -> Result<()> {
    let bytes = encode_store(store);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_store<T: Scalar>(path: &Path) -> Result<ParamStore<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_store(&bytes)
}

// Model checkpoints embed the architecture as a numeric tensor so that
// loading needs no side-channel config file.
const CONFIG_KEY: &str = "config";
const CONFIG_FORMAT: f64 = 1.0;

fn config_tensor<T: Scalar>(c: &ModelConfig) -> Tensor<T> {
    let fields = [
        CONFIG_FORMAT,
        c.channels as f64,
        c.blocks as f64,
        c.kernel as f64,
        c.heads as f64,
        c.ffn_ratio as f64,
        c.shift_groups as f64,
        c.shift_stride as f64,
        c.scale as f64,
    ];
    Tensor::from_vec(&[fields.len()], fields.iter().map(|&v| T::from_f64(v)).collect())
        .expect("fixed-size config vector")
}

fn config_from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<ModelConfig> {
    let v: Vec<usize> = t.data().iter().map(|x| x.to_f64().round() as usize).collect();
    if v.len() != 9 || v[0] != CONFIG_FORMAT as usize {
        return Err(Error::Checkpoint("unrecognized embedded config layout".into()));
    }
    let mut config = ModelConfig {
        channels: v[1],
        blocks: v[2],
        kernel: v[3],
        heads: v[4],
        ffn_ratio: v[5],
        shift_groups: v[6],
        shift_stride: v[7],
        scale: v[8],
        variant: "custom".into(),
    };
    for known in [
        ModelConfig::tiny(config.scale),
        ModelConfig::base(config.scale),
        ModelConfig::large(config.scale),
    ] {
        if (
            known.channels,
            known.blocks,
            known.kernel,
            known.heads,
            known.ffn_ratio,
            known.shift_groups,
            known.shift_stride,
        ) == (
            config.channels,
            config.blocks,
            config.kernel,
            config.heads,
            config.ffn_ratio,
            config.shift_groups,
            config.shift_stride,
        ) {
            config.variant = known.variant;
            break;
        }
    }
    config.validate()?;
    Ok(config)
}

/// Save model parameters (and optimizer state, when given) plus the
/// embedded config.
pub fn save_model<T: Scalar>(
    model: &Tcsr<T>,
    adam: Option<&AdamState<T>>,
    path: &Path,
) -> Result<()> {
    let mut store = ParamStore::new();
    store.push(CONFIG_KEY, config_tensor::<T>(&model.config));
    model.for_each_param(|name, t| store.push(name, t.clone()));
    if let Some(state) = adam {
        store.push(
            "adam.step",
            Tensor::from_vec(&[1], vec![T::from_f64(state.step as f64)])?,
        );
        let mut i = 0;
        model.for_each_param(|name, _| {
            store.push(format!("adam.m.{name}"), state.m[i].clone());
            store.push(format!("adam.v.{name}"), state.v[i].clone());
            i += 1;
        });
    }
    save_store(&store, path)
}

/// Load a model checkpoint; returns the optimizer state too when the file
/// carries one.
pub fn load_model<T: Scalar>(path: &Path) -> Result<(Tcsr<T>, Option<AdamState<T>>)> {
    let mut store = load_store::<T>(path)?;
    let config = config_from_tensor(
        store
            .get(CONFIG_KEY)
            .ok_or_else(|| Error::Checkpoint("no embedded config".into()))?,
    )?;
    let mut model = Tcsr::init(config, 0)?;
    model.load_store(&store)?;

    let adam = if store.get("adam.step").is_some() {
        let step = store.take("adam.step")?.data()[0].to_f64() as u64;
        let mut m = Vec::new();
        let mut v = Vec::new();
        let mut missing = Vec::new();
        model.for_each_param(|name, t| {
            match store.get(&format!("adam.m.{name}")) {
                Some(x) if x.shape() == t.shape() => m.push(x.clone()),
                _ => missing.push(name.clone()),
            }
            match store.get(&format!("adam.v.{name}")) {
                Some(x) if x.shape() == t.shape() => v.push(x.clone()),
                _ => missing.push(name),
            }
        });
        if !missing.is_empty() {
            return Err(Error::Checkpoint(format!(
                "incomplete optimizer state for: {}",
                missing.join(", ")
            )));
        }
        Some(AdamState { m, v, step })
    } else {
        None
    };
    Ok((model, adam))
}

/// Model config stored in a checkpoint without loading the tensors.
pub fn load_config<T: Scalar>(path: &Path) -> Result<ModelConfig> {
    let store = load_store::<T>(path)?;
    config_from_tensor(
        store
            .get(CONFIG_KEY)
            .ok_or_else(|| Error::Checkpoint("no embedded config".into()))?,
    )
}
