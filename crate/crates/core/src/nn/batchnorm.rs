use super::tensor::{feature_map_dims, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization with learnable scale and offset.
///
/// Running statistics start at mean 0 / variance 1 and follow
/// `r ← (1 − momentum)·r + momentum·batch`, the variance using the unbiased
/// batch estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub scale: Vec<T>,
    pub offset: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    /// Whether running statistics have seen at least one training batch.
    pub tracked: bool,
    /// Set when evaluation ran on untracked statistics.
    pub untracked_eval: bool,
}

/// Saved from a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    normalized: Vec<T>,
    inv_std: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormGrads<T> {
    pub scale: Vec<T>,
    pub offset: Vec<T>,
    pub input: Tensor<T>,
}

/// (batch, channels, spatial volume) of an `(N, C, …)` tensor.
fn layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match shape.len() {
        4 | 5 => {
            let (n, c, e, _) = feature_map_dims(shape)?;
            Ok((n, c, e.volume()))
        }
        2 => Ok((shape[0], shape[1], 1)),
        _ => Err(Error::usage(format!("batch norm cannot take shape {shape:?}"))),
    }
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            scale: vec![T::one(); channels],
            offset: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            tracked: false,
            untracked_eval: false,
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    pub fn param_count(&self) -> usize {
        self.scale.len() + self.offset.len()
    }

    fn check(&self, shape: &[usize]) -> Result<(usize, usize, usize)> {
        let (n, c, vol) = layout(shape)?;
        if c != self.channels() {
            return Err(Error::usage(format!(
                "batch norm has {} channels, input has {c}",
                self.channels()
            )));
        }
        Ok((n, c, vol))
    }

    /// Normalizes with batch statistics and updates the running statistics.
    pub fn forward_train(&mut self, input: &Tensor<T>) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let (n, c, vol) = self.check(input.shape())?;
        let m = n * vol;
        if m < 2 {
            return Err(Error::usage("batch statistics need more than one value per channel"));
        }
        let x = input.data();
        let mf = T::lit(m as f64);
        let eps = T::lit(BN_EPSILON);
        let momentum = T::lit(BN_MOMENTUM);
        let mut out = vec![T::zero(); x.len()];
        let mut normalized = vec![T::zero(); x.len()];
        let mut inv_std = vec![T::zero(); c];
        for ch in 0..c {
            let plane = |i: usize| (i * c + ch) * vol;
            let mut sum = T::zero();
            for i in 0..n {
                sum += x[plane(i)..plane(i) + vol].iter().copied().sum::<T>();
            }
            let mean = sum / mf;
            let mut sq = T::zero();
            for i in 0..n {
                for &v in &x[plane(i)..plane(i) + vol] {
                    sq += (v - mean) * (v - mean);
                }
            }
            let var = sq / mf;
            let istd = T::one() / (var + eps).sqrt();
            inv_std[ch] = istd;
            for i in 0..n {
                for j in plane(i)..plane(i) + vol {
                    let xh = (x[j] - mean) * istd;
                    normalized[j] = xh;
                    out[j] = self.scale[ch] * xh + self.offset[ch];
                }
            }
            let unbiased = sq / T::lit((m - 1) as f64);
            self.running_mean[ch] = (T::one() - momentum) * self.running_mean[ch] + momentum * mean;
            self.running_var[ch] = (T::one() - momentum) * self.running_var[ch] + momentum * unbiased;
        }
        self.tracked = true;
        Ok((
            Tensor::new(input.shape().to_vec(), out)?,
            BatchNormCache { normalized, inv_std },
        ))
    }

    /// Normalizes with running statistics. Before any training batch these
    /// are (0, 1); the layer then logs a warning and sets `untracked_eval`.
    pub fn forward_eval(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, vol) = self.check(input.shape())?;
        if !self.tracked && !self.untracked_eval {
            log::warn!("batch norm evaluated before any training statistics; using mean 0, variance 1");
            self.untracked_eval = true;
        }
        let eps = T::lit(BN_EPSILON);
        let mut out = input.data().to_vec();
        for i in 0..n {
            for ch in 0..c {
                let a = self.scale[ch] / (self.running_var[ch] + eps).sqrt();
                let b = self.offset[ch] - a * self.running_mean[ch];
                let base = (i * c + ch) * vol;
                for v in &mut out[base..base + vol] {
                    *v = a * *v + b;
                }
            }
        }
        Tensor::new(input.shape().to_vec(), out)
    }

    pub fn backward(&self, cache: &BatchNormCache<T>, grad_out: &Tensor<T>) -> Result<BatchNormGrads<T>> {
        let (n, c, vol) = self.check(grad_out.shape())?;
        if cache.normalized.len() != grad_out.len() {
            return Err(Error::usage("batch norm gradient does not match forward input"));
        }
        let dy = grad_out.data();
        let xh = &cache.normalized;
        let mf = T::lit((n * vol) as f64);
        let mut d_scale = vec![T::zero(); c];
        let mut d_offset = vec![T::zero(); c];
        let mut dx = vec![T::zero(); dy.len()];
        for ch in 0..c {
            let mut sum_dy = T::zero();
            let mut sum_dy_xh = T::zero();
            for i in 0..n {
                let base = (i * c + ch) * vol;
                for j in base..base + vol {
                    sum_dy += dy[j];
                    sum_dy_xh += dy[j] * xh[j];
                }
            }
            d_offset[ch] = sum_dy;
            d_scale[ch] = sum_dy_xh;
            let k = self.scale[ch] * cache.inv_std[ch] / mf;
            for i in 0..n {
                let base = (i * c + ch) * vol;
                for j in base..base + vol {
                    dx[j] = k * (mf * dy[j] - sum_dy - xh[j] * sum_dy_xh);
                }
            }
        }
        Ok(BatchNormGrads {
            scale: d_scale,
            offset: d_offset,
            input: Tensor::new(grad_out.shape().to_vec(), dx)?,
        })
    }
}
