use super::tensor::{feature_map_dims, feature_map_shape, window_indices, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Max pooling with window = stride = `size` over every spatial axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxPool {
    pub size: usize,
}

/// Flat input index of each output's maximum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolIndices(Vec<usize>);

impl MaxPool {
    pub fn new(size: usize) -> Self {
        Self { size }
    }

    pub fn forward<T: Scalar>(&self, input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
        let (n, c, extent, dims) = feature_map_dims(input.shape())?;
        let (out, windows) = window_indices(extent, self.size, self.size, dims)?;
        let vol = extent.volume();
        let mut values = Vec::with_capacity(n * c * out.volume());
        let mut argmax = Vec::with_capacity(values.capacity());
        for plane in 0..n * c {
            let base = plane * vol;
            let x = &input.data()[base..base + vol];
            for window in &windows {
                // first occurrence wins ties
                let mut best = window[0];
                for &i in &window[1..] {
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                values.push(x[best]);
                argmax.push(base + best);
            }
        }
        Ok((
            Tensor::new(feature_map_shape(n, c, out, dims), values)?,
            PoolIndices(argmax),
        ))
    }

    pub fn backward<T: Scalar>(
        &self,
        input_shape: &[usize],
        indices: &PoolIndices,
        grad_out: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        if grad_out.len() != indices.0.len() {
            return Err(Error::usage("pool gradient does not match forward output"));
        }
        let mut dx = Tensor::zeros(input_shape.to_vec());
        let data = dx.data_mut();
        for (&i, &g) in indices.0.iter().zip(grad_out.data()) {
            data[i] += g;
        }
        Ok(dx)
    }
}
