//! Parameter checkpoints.
//!
//! Layout (little endian): magic `RMCKPT01`; `u32` format version; `u64`
//! hash of the run configuration; `u32` length and UTF-8 bytes of the
//! configuration text; `u32` tensor count; per tensor a `u32` name length,
//! the name, a `u32` rank, `rank` `u32` extents and the `f64` values; a
//! trailing CRC-32 of everything after the magic.

use std::path::Path;

use relmimic_core::nn::ParamSet;
use relmimic_core::Tensor;

use crate::config::TrainConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RMCKPT01";
pub const VERSION: u32 = 1;

/// Named tensors together with the configuration that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, sets: &[&ParamSet]) -> Checkpoint {
        let tensors = sets
            .iter()
            .flat_map(|s| s.iter().map(|(n, t)| (n.to_string(), t.clone())))
            .collect();
        Checkpoint {
            config: config.clone(),
            tensors,
        }
    }

    /// Copy every tensor of `params` from the checkpoint by name.
    pub fn restore(&self, params: &mut ParamSet) -> Result<()> {
        for id in params.ids().collect::<Vec<_>>() {
            let name = params.name(id).to_string();
            let t = self
                .tensors
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Config(format!("checkpoint lacks parameter `{name}`")))?;
            if t.shape() != params.get(id).shape() {
                return Err(Error::Config(format!(
                    "checkpoint parameter `{name}` has shape {:?}, expected {:?}",
                    t.shape(),
                    params.get(id).shape()
                )));
            }
            *params.get_mut(id) = t.clone();
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::from(&MAGIC[..]);
        let put32 = |o: &mut Vec<u8>, v: usize| o.extend((v as u32).to_le_bytes());
        out.extend(VERSION.to_le_bytes());
        out.extend(self.config.hash().to_le_bytes());
        let text = self.config.to_text();
        put32(&mut out, text.len());
        out.extend(text.as_bytes());
        put32(&mut out, self.tensors.len());
        for (name, t) in &self.tensors {
            put32(&mut out, name.len());
            out.extend(name.as_bytes());
            put32(&mut out, t.rank());
            for &d in t.shape() {
                put32(&mut out, d);
            }
            for v in t.data() {
                out.extend(v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[MAGIC.len()..]);
        out.extend(crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
        let bad = |m: String| Error::format(path, m);
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("not a checkpoint (bad magic)".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
        if stored != crc32fast::hash(&body[MAGIC.len()..]) {
            return Err(bad("checksum mismatch".into()));
        }
        let mut pos = MAGIC.len();
        let mut take = |n: usize| -> Result<&[u8]> {
            if pos + n > body.len() {
                return Err(bad(format!("truncated at byte {pos}")));
            }
            pos += n;
            Ok(&body[pos - n..pos])
        };
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("four bytes")) as usize;
        let version = u32_at(take(4)?);
        if version != VERSION as usize {
            return Err(bad(format!("unsupported version {version}")));
        }
        let hash = u64::from_le_bytes(take(8)?.try_into().expect("eight bytes"));
        let n = u32_at(take(4)?);
        let text = std::str::from_utf8(take(n)?).map_err(|_| bad("configuration is not UTF-8".into()))?;
        let config = TrainConfig::parse_text(text)?;
        if config.hash() != hash {
            return Err(bad("configuration hash mismatch".into()));
        }
        let count = u32_at(take(4)?);
        let mut tensors = Vec::with_capacity(count.min(1 << 12));
        for _ in 0..count {
            let n = u32_at(take(4)?);
            let name = String::from_utf8(take(n)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8".into()))?;
            let rank = u32_at(take(4)?);
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(u32_at(take(4)?));
            }
            let numel: usize = shape.iter().product();
            let raw = take(numel.checked_mul(8).ok_or_else(|| bad("tensor too large".into()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
                .collect();
            tensors.push((name, Tensor::new(&shape, data)?));
        }
        if pos != body.len() {
            return Err(bad("trailing bytes".into()));
        }
        Ok(Checkpoint { config, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&bytes, path)
    }
}
