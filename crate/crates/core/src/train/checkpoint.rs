//! Binary checkpoints, little-endian:
//!
//! ```text
//! "QCKP"  u32 version
//! u32 rank, rank × u64 input shape, u32 class count
//! u8 has_norm, f64 mean, f64 std
//! u64 seed, u32 epochs completed
//! u32 length + UTF-8 config echo (`key = value` lines)
//! u32 block count, then per block: u16 name length, name, u64 length, f64 values
//! u64 FNV-1a hash of everything before it
//! ```
//!
//! Blocks hold every trainable parameter under its model name, batch norm
//! running statistics (`<name>.running_mean`, `.running_var`, `.tracked`),
//! and Adam state (`adam.m.<name>`, `adam.v.<name>`, `adam.step`).

use std::collections::HashMap;
use std::path::Path;

use super::arch::Architecture;
use super::config::KeyValues;
use super::model::{Layer, Model};
use super::run::Optimizer;
use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Optimizer,
    pub norm: Option<NormStats>,
    pub seed: u64,
    pub epochs_completed: usize,
    /// Run configuration echo; architecture keys are always present.
    pub config: KeyValues,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn bn_state_names(model: &Model) -> Vec<(usize, String)> {
    model
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, Layer::BatchNorm(_)))
        .map(|(i, _)| (i, format!("{i}.batchnorm")))
        .collect()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.model.input_shape.len() as u32).to_le_bytes());
        for &d in &self.model.input_shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&(self.model.n_classes as u32).to_le_bytes());
        let norm = self.norm.unwrap_or(NormStats { mean: 0.0, std: 1.0 });
        out.push(self.norm.is_some() as u8);
        out.extend_from_slice(&norm.mean.to_le_bytes());
        out.extend_from_slice(&norm.std.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.epochs_completed as u32).to_le_bytes());

        let mut config = self.config.clone();
        config.merge(&self.model.arch.to_config());
        let text = config.to_text();
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());

        let mut blocks: Vec<(String, Vec<f64>)> = Vec::new();
        let names = self.model.param_names();
        for (name, p) in names.iter().zip(self.model.params()) {
            blocks.push((name.clone(), p.clone()));
        }
        for (i, name) in bn_state_names(&self.model) {
            if let Layer::BatchNorm(b) = &self.model.layers[i] {
                blocks.push((format!("{name}.running_mean"), b.running_mean.clone()));
                blocks.push((format!("{name}.running_var"), b.running_var.clone()));
                blocks.push((format!("{name}.tracked"), vec![if b.tracked { 1.0 } else { 0.0 }]));
            }
        }
        for (name, s) in names.iter().zip(&self.optimizer.states) {
            blocks.push((format!("adam.m.{name}"), s.m.clone()));
            blocks.push((format!("adam.v.{name}"), s.v.clone()));
        }
        blocks.push((
            "adam.step".into(),
            self.optimizer.states.iter().map(|s| s.step as f64).collect(),
        ));
        blocks.push(("adam.lr".into(), vec![self.optimizer.config.lr]));

        out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
        for (name, values) in &blocks {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let hash = fnv1a(&out);
        out.extend_from_slice(&hash.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::format(bytes.len() as u64, "truncated checkpoint header"));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::format(0, "not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion {
                what: "checkpoint",
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 16 {
            return Err(Error::format(bytes.len() as u64, "truncated checkpoint"));
        }
        let body = &bytes[..bytes.len() - 8];
        let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));
        if fnv1a(body) != stored {
            return Err(Error::format(
                body.len() as u64,
                "checkpoint hash mismatch (corrupted file)",
            ));
        }
        let mut r = Cursor { bytes: body, pos: 8 };
        let rank = r.u32()? as usize;
        if !(3..=4).contains(&rank) {
            return Err(Error::format(8, format!("input rank {rank} unsupported")));
        }
        let mut input_shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            input_shape.push(r.u64()? as usize);
        }
        let n_classes = r.u32()? as usize;
        let has_norm = r.take(1)?[0] != 0;
        let mean = r.f64()?;
        let std = r.f64()?;
        let seed = r.u64()?;
        let epochs_completed = r.u32()? as usize;
        let text_at = r.pos as u64;
        let text_len = r.u32()? as usize;
        let text =
            std::str::from_utf8(r.take(text_len)?).map_err(|_| Error::format(text_at, "config echo is not UTF-8"))?;
        let config = KeyValues::parse(text).map_err(|e| Error::format(text_at, e.to_string()))?;
        let arch = Architecture::from_config(&config).map_err(|e| Error::format(text_at, e.to_string()))?;

        let count = r.u32()? as usize;
        let mut blocks: HashMap<String, (u64, Vec<f64>)> = HashMap::new();
        for _ in 0..count {
            let at = r.pos as u64;
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format(at, "block name is not UTF-8"))?
                .to_string();
            let n = r.u64()? as usize;
            if n > body.len() / 8 {
                return Err(Error::format(at, format!("block {name} length {n} exceeds file")));
            }
            let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            blocks.insert(name, (at, values));
        }
        if r.pos != body.len() {
            return Err(Error::format(r.pos as u64, "trailing bytes after blocks"));
        }

        let mut model =
            Model::build_uninit(arch, &input_shape, n_classes).map_err(|e| Error::format(text_at, e.to_string()))?;
        let mut take = |name: &str, len: usize| -> Result<Vec<f64>> {
            match blocks.remove(name) {
                None => Err(Error::format(body.len() as u64, format!("missing block {name}"))),
                Some((at, v)) if v.len() != len => Err(Error::format(
                    at,
                    format!("block {name} has {} values, expected {len}", v.len()),
                )),
                Some((_, v)) => Ok(v),
            }
        };
        let names = model.param_names();
        let lens: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        let mut values = Vec::with_capacity(names.len());
        for (name, &len) in names.iter().zip(&lens) {
            values.push(take(name, len)?);
        }
        for (slot, v) in model.params_mut().into_iter().zip(values) {
            *slot = v;
        }
        for (i, name) in bn_state_names(&model) {
            let c = match &model.layers[i] {
                Layer::BatchNorm(b) => b.channels(),
                _ => unreachable!(),
            };
            let mean = take(&format!("{name}.running_mean"), c)?;
            let var = take(&format!("{name}.running_var"), c)?;
            let tracked = take(&format!("{name}.tracked"), 1)?[0] != 0.0;
            if let Layer::BatchNorm(b) = &mut model.layers[i] {
                b.running_mean = mean;
                b.running_var = var;
                b.tracked = tracked;
            }
        }
        let lr = take("adam.lr", 1)?[0];
        let mut optimizer = Optimizer::new(&model, lr);
        let steps = take("adam.step", names.len())?;
        for ((name, &len), (state, step)) in names.iter().zip(&lens).zip(optimizer.states.iter_mut().zip(steps)) {
            state.m = take(&format!("adam.m.{name}"), len)?;
            state.v = take(&format!("adam.v.{name}"), len)?;
            state.step = step as u64;
        }
        if let Some(extra) = blocks.keys().next() {
            return Err(Error::format(body.len() as u64, format!("unexpected block {extra}")));
        }
        Ok(Self {
            model,
            optimizer,
            norm: has_norm.then_some(NormStats { mean, std }),
            seed,
            epochs_completed,
            config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated: needed {n} more bytes"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
