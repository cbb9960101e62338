//! Labelled image datasets: the QTN1 container, global normalization and
//! seeded synthetic generators.
//!
//! QTN1 layout, all integers little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "QTN1"
//! 4       2           format version (u16, currently 1)
//! 6       2           element type tag (u16, 1 = f64)
//! 8       4           class count (u32)
//! 12      4           item rank r (u32, 2..=4: channels + spatial dims)
//! 16      8           item count (u64)
//! 24      8·r         item shape (u64 each), channels first
//! …       8·count·Π   images, f64, row-major per item
//! …       2·count     labels, u16
//! ```
//!
//! The file ends exactly after the labels.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::nn::Tensor;

pub const MAGIC: &[u8; 4] = b"QTN1";
pub const FORMAT_VERSION: u16 = 1;
pub const ELEMENT_F64: u16 = 1;
const FIXED_HEADER: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    item_shape: Vec<usize>,
    n_classes: usize,
    images: Vec<f64>,
    labels: Vec<u16>,
}

impl Dataset {
    pub fn new(item_shape: Vec<usize>, n_classes: usize, images: Vec<f64>, labels: Vec<u16>) -> Result<Self> {
        if !(2..=4).contains(&item_shape.len()) || item_shape.contains(&0) {
            return Err(Error::config(format!(
                "item shape {item_shape:?} must be (C, spatial…) with 1 to 3 positive spatial dims"
            )));
        }
        if n_classes == 0 || n_classes > u16::MAX as usize + 1 {
            return Err(Error::config(format!("class count {n_classes} unsupported")));
        }
        let item_len: usize = item_shape.iter().product();
        if images.len() != item_len * labels.len() {
            return Err(Error::config(format!(
                "{} image values for {} items of shape {item_shape:?}",
                images.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= n_classes) {
            return Err(Error::config(format!("label {l} not below class count {n_classes}")));
        }
        if images.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite image value"));
        }
        Ok(Self {
            item_shape,
            n_classes,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn item_shape(&self) -> &[usize] {
        &self.item_shape
    }

    pub fn item_len(&self) -> usize {
        self.item_shape.iter().product()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn images(&self) -> &[f64] {
        &self.images
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn item(&self, i: usize) -> &[f64] {
        let len = self.item_len();
        &self.images[i * len..(i + 1) * len]
    }

    /// Items at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut images = Vec::with_capacity(indices.len() * self.item_len());
        for &i in indices {
            images.extend_from_slice(self.item(i));
        }
        Self {
            item_shape: self.item_shape.clone(),
            n_classes: self.n_classes,
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// `(N, C, spatial…)` tensor and class indices for the given items.
    pub fn batch(&self, indices: &[usize]) -> (Tensor<f64>, Vec<usize>) {
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.item_shape);
        let mut data = Vec::with_capacity(indices.len() * self.item_len());
        for &i in indices {
            data.extend_from_slice(self.item(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i] as usize).collect();
        (Tensor::new(shape, data).expect("consistent by construction"), labels)
    }

    /// Fraction of items in the most common class.
    pub fn majority_fraction(&self) -> f64 {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts.into_iter().max().unwrap_or(0) as f64 / self.len().max(1) as f64
    }

    pub fn header_len(&self) -> usize {
        FIXED_HEADER + 8 * self.item_shape.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header_len() + 8 * self.images.len() + 2 * self.labels.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&ELEMENT_F64.to_le_bytes());
        out.extend_from_slice(&(self.n_classes as u32).to_le_bytes());
        out.extend_from_slice(&(self.item_shape.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.labels.len() as u64).to_le_bytes());
        for &d in &self.item_shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &self.images {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::format(0, format!("bad magic {magic:?}, expected \"QTN1\"")));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                what: "QTN1 container",
                found: version as u32,
                expected: FORMAT_VERSION as u32,
            });
        }
        let at = r.pos as u64;
        let tag = r.u16()?;
        if tag != ELEMENT_F64 {
            return Err(Error::format(
                at,
                format!("element type tag {tag}, only 1 (f64) supported"),
            ));
        }
        let at = r.pos as u64;
        let n_classes = r.u32()? as usize;
        if n_classes == 0 || n_classes > u16::MAX as usize + 1 {
            return Err(Error::format(at, format!("class count {n_classes} unsupported")));
        }
        let at = r.pos as u64;
        let rank = r.u32()? as usize;
        if !(2..=4).contains(&rank) {
            return Err(Error::format(at, format!("item rank {rank} outside 2..=4")));
        }
        let count = r.u64()? as usize;
        let mut item_shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let at = r.pos as u64;
            let d = r.u64()? as usize;
            if d == 0 {
                return Err(Error::format(at, "zero-sized item dimension"));
            }
            item_shape.push(d);
        }
        let item_len = item_shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|l| l.checked_mul(count))
            .ok_or_else(|| Error::format(r.pos as u64, "item shape overflows"))?;
        let expected = item_len
            .checked_mul(8)
            .and_then(|b| b.checked_add(2 * count))
            .and_then(|b| b.checked_add(r.pos))
            .ok_or_else(|| Error::format(r.pos as u64, "payload size overflows"))?;
        if bytes.len() < expected {
            return Err(Error::format(
                bytes.len() as u64,
                format!("truncated: {} bytes, header implies {expected}", bytes.len()),
            ));
        }
        if bytes.len() > expected {
            return Err(Error::format(expected as u64, "trailing bytes after labels"));
        }
        let mut images = Vec::with_capacity(item_len);
        for _ in 0..item_len {
            let at = r.pos as u64;
            let v = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(Error::format(at, "non-finite image value"));
            }
            images.push(v);
        }
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let at = r.pos as u64;
            let l = r.u16()?;
            if l as usize >= n_classes {
                return Err(Error::format(
                    at,
                    format!("label {l} not below class count {n_classes}"),
                ));
            }
            labels.push(l);
        }
        Ok(Self {
            item_shape,
            n_classes,
            images,
            labels,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
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
}

/// First `train` items for training, the next `val` for validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: usize,
    pub val: usize,
}

impl SplitSpec {
    pub fn new(train: usize, val: usize) -> Self {
        Self { train, val }
    }

    pub fn apply(&self, data: &Dataset) -> Result<(Dataset, Dataset)> {
        if self.train + self.val > data.len() {
            return Err(Error::config(format!(
                "split {}+{} exceeds {} items",
                self.train,
                self.val,
                data.len()
            )));
        }
        let train: Vec<usize> = (0..self.train).collect();
        let val: Vec<usize> = (self.train..self.train + self.val).collect();
        Ok((data.subset(&train), data.subset(&val)))
    }
}

/// Global mean and (population) standard deviation over every image value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn fit(data: &Dataset) -> Result<Self> {
        let n = data.images.len();
        if n == 0 {
            return Err(Error::config("cannot normalize an empty dataset"));
        }
        let mean = data.images.iter().sum::<f64>() / n as f64;
        let var = data.images.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if !std.is_finite() || std <= 0.0 {
            return Err(Error::config("dataset has zero variance; cannot normalize"));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, data: &mut Dataset) {
        for v in &mut data.images {
            *v = (*v - self.mean) / self.std;
        }
    }
}

/// Fits statistics on `train` and applies them to both splits.
pub fn normalize(train: &mut Dataset, val: Option<&mut Dataset>) -> Result<NormStats> {
    let stats = NormStats::fit(train)?;
    stats.apply(train);
    if let Some(v) = val {
        stats.apply(v);
    }
    Ok(stats)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthKind {
    /// 1×28×28; class 0 horizontal bars, class 1 vertical bars.
    Stripes,
    /// 1×16×16×16; class 1 carries a Gaussian blob, class 0 is noise.
    Blob,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stripes" => Ok(SynthKind::Stripes),
            "blob" | "blobs" => Ok(SynthKind::Blob),
            other => Err(Error::usage(format!(
                "unknown synthetic dataset kind {other:?} (expected stripes or blob)"
            ))),
        }
    }
}

pub fn synthesize(kind: SynthKind, n_items: usize, seed: u64) -> Result<Dataset> {
    match kind {
        SynthKind::Stripes => synth_2d(n_items, seed),
        SynthKind::Blob => synth_3d(n_items, seed),
    }
}

pub const STRIPE_SIDE: usize = 28;
pub const STRIPE_NOISE: f64 = 0.2;

/// Bars on every even row (class 0) or even column (class 1), each bar with
/// its own brightness in [0.5, 1], plus Gaussian noise σ = 0.2. Item `i` has
/// label `i mod 2`.
pub fn synth_2d(n_items: usize, seed: u64) -> Result<Dataset> {
    if n_items == 0 {
        return Err(Error::usage("need at least one item"));
    }
    let side = STRIPE_SIDE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, STRIPE_NOISE).expect("valid sigma");
    let mut images = Vec::with_capacity(n_items * side * side);
    let mut labels = Vec::with_capacity(n_items);
    for i in 0..n_items {
        let label = (i % 2) as u16;
        let bars: Vec<f64> = (0..side).map(|_| rng.gen_range(0.5..1.0)).collect();
        for r in 0..side {
            for c in 0..side {
                let line = if label == 0 { r } else { c };
                let base = if line % 2 == 0 { bars[line] } else { 0.0 };
                images.push(base + noise.sample(&mut rng));
            }
        }
        labels.push(label);
    }
    Dataset::new(vec![1, side, side], 2, images, labels)
}

pub const BLOB_SIDE: usize = 16;
pub const BLOB_AMPLITUDE: f64 = 4.0;
pub const BLOB_NOISE: f64 = 0.5;

/// Gaussian noise σ = 0.5 everywhere; class 1 adds `A·exp(−(d/r)²)` with
/// radius r ∈ [2, 4] centred at least r voxels from every face. Item `i`
/// has label `i mod 2`.
pub fn synth_3d(n_items: usize, seed: u64) -> Result<Dataset> {
    if n_items == 0 {
        return Err(Error::usage("need at least one item"));
    }
    let side = BLOB_SIDE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, BLOB_NOISE).expect("valid sigma");
    let mut images = Vec::with_capacity(n_items * side * side * side);
    let mut labels = Vec::with_capacity(n_items);
    for i in 0..n_items {
        let label = (i % 2) as u16;
        let blob = (label == 1).then(|| {
            let r: f64 = rng.gen_range(2.0..=4.0);
            let hi = side as f64 - 1.0 - r;
            let centre: Vec<f64> = (0..3).map(|_| rng.gen_range(r..=hi)).collect();
            (r, centre)
        });
        for z in 0..side {
            for y in 0..side {
                for x in 0..side {
                    let mut v = noise.sample(&mut rng);
                    if let Some((r, c)) = &blob {
                        let d2 = (z as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (x as f64 - c[2]).powi(2);
                        v += BLOB_AMPLITUDE * (-d2 / (r * r)).exp();
                    }
                    images.push(v);
                }
            }
        }
        labels.push(label);
    }
    Dataset::new(vec![1, side, side, side], 2, images, labels)
}

/// Seeded permutation of `0..n`.
pub fn shuffled_indices(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
