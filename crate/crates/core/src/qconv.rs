//! Quantum convolutional layers: one quantum filter per input channel slid
//! over a 2D or 3D feature map, each qubit's `⟨Z⟩` becoming its own output
//! channel.
//!
//! Input channel `c` feeds output channels `c·n … c·n + n − 1` where
//! `n = kernel^dims` is the qubit count. Patches are flattened row-major
//! (depth, then rows, then columns), which fixes the qubit each pixel lands on.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{feature_map_dims, window_indices, Extent, Tensor};
use crate::qfilter::{self, Ansatz, Encoding, FilterSpec, ShiftRule};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumConv<T> {
    pub dims: usize,
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub filter: FilterSpec<T>,
    /// One angle set per input channel.
    pub params: Vec<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumConvGrads<T> {
    pub params: Vec<Vec<T>>,
    pub input: Option<Tensor<T>>,
}

/// Flattened windows of every `(item, channel)` plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Patches<T> {
    pub batch: usize,
    pub channels: usize,
    pub out: Extent,
    /// Indexed `(n · channels + c) · positions + p`.
    pub patches: Vec<Vec<T>>,
}

impl<T> Patches<T> {
    pub fn positions(&self) -> usize {
        self.out.d * self.out.h * self.out.w
    }

    pub fn get(&self, n: usize, c: usize, p: usize) -> &[T] {
        &self.patches[(n * self.channels + c) * self.positions() + p]
    }
}

pub fn extract_patches<T: Scalar>(input: &Tensor<T>, kernel: usize, stride: usize) -> Result<Patches<T>> {
    let (n, c, extent, dims) = feature_map_dims(input.shape())?;
    let (out, windows) = window_indices(extent, kernel, stride, dims)?;
    let vol = extent.volume();
    let mut patches = Vec::with_capacity(n * c * windows.len());
    for plane in input.data().chunks(vol.max(1)).take(n * c) {
        for w in &windows {
            patches.push(w.iter().map(|&i| plane[i]).collect());
        }
    }
    Ok(Patches {
        batch: n,
        channels: c,
        out,
        patches,
    })
}

impl<T: Scalar> QuantumConv<T> {
    /// Layer with zero angles; `n_qubits = kernel^dims`.
    pub fn new(
        dims: usize,
        kernel: usize,
        stride: usize,
        in_channels: usize,
        encoding: Encoding<T>,
        ansatz: Ansatz,
    ) -> Result<Self> {
        if dims != 2 && dims != 3 {
            return Err(Error::config(format!(
                "quantum convolution must be 2D or 3D, got {dims}D"
            )));
        }
        if kernel == 0 || stride == 0 || in_channels == 0 {
            return Err(Error::config("quantum convolution sizes must be positive"));
        }
        let filter = FilterSpec::new(kernel.pow(dims as u32), encoding, ansatz)?;
        let params = vec![vec![T::zero(); filter.parameter_count()]; in_channels];
        Ok(Self {
            dims,
            kernel,
            stride,
            in_channels,
            filter,
            params,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.filter.n_qubits
    }

    pub fn out_channels(&self) -> usize {
        self.in_channels * self.n_qubits()
    }

    pub fn param_count(&self) -> usize {
        self.in_channels * self.filter.parameter_count()
    }

    /// Fresh uniform `[0, 2π)` angles for every circuit.
    pub fn init_params<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for p in &mut self.params {
            *p = self.filter.random_params(rng);
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, Extent)> {
        let (n, c, extent, dims) = feature_map_dims(input.shape())?;
        if dims != self.dims {
            return Err(Error::usage(format!(
                "{}D quantum convolution given a {dims}D feature map",
                self.dims
            )));
        }
        if c != self.in_channels {
            return Err(Error::usage(format!(
                "quantum convolution expects {} channels, got {c}",
                self.in_channels
            )));
        }
        if self.params.len() != self.in_channels || self.params.iter().any(|p| p.len() != self.filter.parameter_count())
        {
            return Err(Error::usage(
                "quantum convolution parameter sets do not match the filter",
            ));
        }
        Ok((n, extent))
    }

    fn output_shape(&self, n: usize, out: Extent) -> Vec<usize> {
        let c = self.out_channels();
        if self.dims == 2 {
            vec![n, c, out.h, out.w]
        } else {
            vec![n, c, out.d, out.h, out.w]
        }
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, _) = self.check_input(input)?;
        let patches = extract_patches(input, self.kernel, self.stride)?;
        let positions = patches.positions();
        let nq = self.n_qubits();
        let planes: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..self.in_channels).map(move |c| (i, c)))
            .collect();
        // Each (item, channel) yields `nq` output planes of `positions` values.
        let blocks: Vec<Vec<T>> = planes
            .par_iter()
            .map(|&(i, c)| -> Result<Vec<T>> {
                let mut block = vec![T::zero(); nq * positions];
                for p in 0..positions {
                    let z = qfilter::evaluate(&self.filter, &self.params[c], patches.get(i, c, p))?;
                    for (q, v) in z.into_iter().enumerate() {
                        block[q * positions + p] = v;
                    }
                }
                Ok(block)
            })
            .collect::<Result<_>>()?;
        Tensor::new(self.output_shape(n, patches.out), blocks.concat())
    }

    /// Parameter gradients summed over all patches and items; input gradients
    /// (when requested) scattered back and summed where windows overlap.
    pub fn backward(&self, input: &Tensor<T>, upstream: &Tensor<T>, with_input: bool) -> Result<QuantumConvGrads<T>> {
        self.backward_with_rule(input, upstream, with_input, ShiftRule::default())
    }

    pub fn backward_with_rule(
        &self,
        input: &Tensor<T>,
        upstream: &Tensor<T>,
        with_input: bool,
        rule: ShiftRule<T>,
    ) -> Result<QuantumConvGrads<T>> {
        let (n, extent) = self.check_input(input)?;
        let (out, windows) = window_indices(extent, self.kernel, self.stride, self.dims)?;
        if upstream.shape() != self.output_shape(n, out).as_slice() {
            return Err(Error::usage(format!(
                "upstream gradient shape {:?} does not match layer output {:?}",
                upstream.shape(),
                self.output_shape(n, out)
            )));
        }
        let positions = windows.len();
        let nq = self.n_qubits();
        let vol = extent.volume();
        let planes: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..self.in_channels).map(move |c| (i, c)))
            .collect();

        let partials: Vec<(Vec<T>, Vec<T>)> = planes
            .par_iter()
            .map(|&(i, c)| -> Result<(Vec<T>, Vec<T>)> {
                let x_base = (i * self.in_channels + c) * vol;
                let x = &input.data()[x_base..x_base + vol];
                let dy_base = (i * self.out_channels() + c * nq) * positions;
                let dy = &upstream.data()[dy_base..dy_base + nq * positions];
                let mut d_params = vec![T::zero(); self.filter.parameter_count()];
                let mut d_input = if with_input { vec![T::zero(); vol] } else { Vec::new() };
                let mut patch = vec![T::zero(); nq];
                let mut up = vec![T::zero(); nq];
                for (p, window) in windows.iter().enumerate() {
                    for (slot, &idx) in patch.iter_mut().zip(window) {
                        *slot = x[idx];
                    }
                    for (q, u) in up.iter_mut().enumerate() {
                        *u = dy[q * positions + p];
                    }
                    let g = qfilter::gradients(&self.filter, &self.params[c], &patch, &up, with_input, rule)?;
                    d_params.iter_mut().zip(&g.params).for_each(|(a, &b)| *a += b);
                    if let Some(gi) = g.inputs {
                        for (&idx, v) in window.iter().zip(gi) {
                            d_input[idx] += v;
                        }
                    }
                }
                Ok((d_params, d_input))
            })
            .collect::<Result<_>>()?;

        let mut params = vec![vec![T::zero(); self.filter.parameter_count()]; self.in_channels];
        let mut input_grad = Vec::with_capacity(if with_input { input.len() } else { 0 });
        for (&(_, c), (dp, di)) in planes.iter().zip(partials) {
            params[c].iter_mut().zip(dp).for_each(|(a, b)| *a += b);
            input_grad.extend(di);
        }
        let input = if with_input {
            Some(Tensor::new(input.shape().to_vec(), input_grad)?)
        } else {
            None
        };
        Ok(QuantumConvGrads { params, input })
    }
}
