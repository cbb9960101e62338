use rand::Rng;
use rayon::prelude::*;

use super::tensor::{feature_map_dims, feature_map_shape, window_output, Extent, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(k^dims · c / g + 1) · n`: weights plus one bias per filter.
pub fn conv_param_count(dims: usize, kernel: usize, in_channels: usize, groups: usize, filters: usize) -> usize {
    (kernel.pow(dims as u32) * in_channels / groups + 1) * filters
}

/// 2D or 3D grouped cross-correlation with bias, no padding.
///
/// Weights are laid out `(out, in/groups, kd, kh, kw)` with `kd = 1` in 2D.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv<T> {
    pub dims: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub groups: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub input: Tensor<T>,
}

impl<T: Scalar> Conv<T> {
    /// Zero-initialized layer.
    pub fn new(
        dims: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        groups: usize,
    ) -> Result<Self> {
        if dims != 2 && dims != 3 {
            return Err(Error::config(format!("convolution must be 2D or 3D, got {dims}D")));
        }
        if kernel == 0 || stride == 0 || in_channels == 0 || out_channels == 0 || groups == 0 {
            return Err(Error::config("convolution sizes must be positive"));
        }
        if !in_channels.is_multiple_of(groups) || !out_channels.is_multiple_of(groups) {
            return Err(Error::config(format!(
                "{in_channels} input / {out_channels} output channels not divisible into {groups} groups"
            )));
        }
        let mut layer = Self {
            dims,
            in_channels,
            out_channels,
            kernel,
            stride,
            groups,
            weight: Vec::new(),
            bias: vec![T::zero(); out_channels],
        };
        layer.weight = vec![T::zero(); out_channels * layer.fan_in()];
        Ok(layer)
    }

    pub fn kernel_volume(&self) -> usize {
        self.kernel.pow(self.dims as u32)
    }

    pub fn fan_in(&self) -> usize {
        self.kernel_volume() * self.in_channels / self.groups
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Uniform on `±sqrt(1/fan_in)` for weights and biases.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let bound = (1.0 / self.fan_in() as f64).sqrt();
        for w in self.weight.iter_mut().chain(self.bias.iter_mut()) {
            *w = T::lit(rng.gen_range(-bound..bound));
        }
    }

    pub fn output_extent(&self, input: Extent) -> Result<Extent> {
        window_output(input, self.kernel, self.stride, self.dims)
    }

    fn geometry(&self, input: &Tensor<T>) -> Result<Geometry> {
        let (n, c, extent, dims) = feature_map_dims(input.shape())?;
        if dims != self.dims {
            return Err(Error::usage(format!(
                "{}D convolution given a {dims}D feature map",
                self.dims
            )));
        }
        if c != self.in_channels {
            return Err(Error::usage(format!(
                "convolution expects {} channels, got {c}",
                self.in_channels
            )));
        }
        let out = self.output_extent(extent)?;
        let kd = if self.dims == 3 { self.kernel } else { 1 };
        let sd = if self.dims == 3 { self.stride } else { 1 };
        let k = self.kernel;
        // Offsets of kernel taps relative to a window origin, per input channel of a group.
        let mut taps = Vec::with_capacity(self.fan_in());
        for ci in 0..self.in_channels / self.groups {
            for a in 0..kd {
                for b in 0..k {
                    for cc in 0..k {
                        taps.push(ci * extent.volume() + (a * extent.h + b) * extent.w + cc);
                    }
                }
            }
        }
        let mut origins = Vec::with_capacity(out.volume());
        for od in 0..out.d {
            for oh in 0..out.h {
                for ow in 0..out.w {
                    origins.push((od * sd * extent.h + oh * self.stride) * extent.w + ow * self.stride);
                }
            }
        }
        Ok(Geometry {
            batch: n,
            input: extent,
            out,
            taps,
            origins,
        })
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geometry(input)?;
        let in_item = self.in_channels * g.input.volume();
        let out_item = self.out_channels * g.out.volume();
        let per_group_in = self.in_channels / self.groups;
        let per_group_out = self.out_channels / self.groups;
        let fan_in = self.fan_in();
        let mut out = vec![T::zero(); g.batch * out_item];
        out.par_chunks_mut(out_item.max(1))
            .zip(input.data().par_chunks(in_item.max(1)))
            .for_each(|(y, x)| {
                for oc in 0..self.out_channels {
                    let group = oc / per_group_out;
                    let x_group = &x[group * per_group_in * g.input.volume()..];
                    let w = &self.weight[oc * fan_in..(oc + 1) * fan_in];
                    let y_c = &mut y[oc * g.out.volume()..(oc + 1) * g.out.volume()];
                    for (yv, &origin) in y_c.iter_mut().zip(&g.origins) {
                        let mut acc = self.bias[oc];
                        for (&wv, &tap) in w.iter().zip(&g.taps) {
                            acc += wv * x_group[origin + tap];
                        }
                        *yv = acc;
                    }
                }
            });
        Tensor::new(feature_map_shape(g.batch, self.out_channels, g.out, self.dims), out)
    }

    /// Exact gradients for weights, bias and input given `∂L/∂output`.
    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<ConvGrads<T>> {
        let g = self.geometry(input)?;
        let expected = feature_map_shape(g.batch, self.out_channels, g.out, self.dims);
        if grad_out.shape() != expected.as_slice() {
            return Err(Error::usage(format!(
                "output gradient shape {:?} does not match {expected:?}",
                grad_out.shape()
            )));
        }
        let in_item = self.in_channels * g.input.volume();
        let out_item = self.out_channels * g.out.volume();
        let per_group_in = self.in_channels / self.groups;
        let per_group_out = self.out_channels / self.groups;
        let fan_in = self.fan_in();

        // Per-item partial gradients, reduced afterwards in batch order.
        let partials: Vec<(Vec<T>, Vec<T>, Vec<T>)> = grad_out
            .data()
            .par_chunks(out_item.max(1))
            .zip(input.data().par_chunks(in_item.max(1)))
            .map(|(dy, x)| {
                let mut dw = vec![T::zero(); self.weight.len()];
                let mut db = vec![T::zero(); self.out_channels];
                let mut dx = vec![T::zero(); in_item];
                for oc in 0..self.out_channels {
                    let group = oc / per_group_out;
                    let base = group * per_group_in * g.input.volume();
                    let w = &self.weight[oc * fan_in..(oc + 1) * fan_in];
                    let dw_c = &mut dw[oc * fan_in..(oc + 1) * fan_in];
                    let dy_c = &dy[oc * g.out.volume()..(oc + 1) * g.out.volume()];
                    for (&d, &origin) in dy_c.iter().zip(&g.origins) {
                        db[oc] += d;
                        for ((dwv, &wv), &tap) in dw_c.iter_mut().zip(w).zip(&g.taps) {
                            let at = base + origin + tap;
                            *dwv += d * x[at];
                            dx[at] += d * wv;
                        }
                    }
                }
                (dw, db, dx)
            })
            .collect();

        let mut weight = vec![T::zero(); self.weight.len()];
        let mut bias = vec![T::zero(); self.out_channels];
        let mut dx_all = Vec::with_capacity(g.batch * in_item);
        for (dw, db, dx) in partials {
            weight.iter_mut().zip(dw).for_each(|(a, b)| *a += b);
            bias.iter_mut().zip(db).for_each(|(a, b)| *a += b);
            dx_all.extend(dx);
        }
        Ok(ConvGrads {
            weight,
            bias,
            input: Tensor::new(input.shape().to_vec(), dx_all)?,
        })
    }
}

struct Geometry {
    batch: usize,
    input: Extent,
    out: Extent,
    taps: Vec<usize>,
    origins: Vec<usize>,
}
