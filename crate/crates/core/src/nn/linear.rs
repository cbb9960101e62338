use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fully connected layer `y = W x + b`, weights `(out, in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrads<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub input: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(in_features: usize, out_features: usize) -> Result<Self> {
        if in_features == 0 || out_features == 0 {
            return Err(Error::config("linear layer sizes must be positive"));
        }
        Ok(Self {
            in_features,
            out_features,
            weight: vec![T::zero(); in_features * out_features],
            bias: vec![T::zero(); out_features],
        })
    }

    pub fn param_count(&self) -> usize {
        (self.in_features + 1) * self.out_features
    }

    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let bound = (1.0 / self.in_features as f64).sqrt();
        for w in self.weight.iter_mut().chain(self.bias.iter_mut()) {
            *w = T::lit(rng.gen_range(-bound..bound));
        }
    }

    fn check(&self, input: &Tensor<T>) -> Result<usize> {
        match *input.shape() {
            [n, f] if f == self.in_features => Ok(n),
            _ => Err(Error::usage(format!(
                "linear layer expects (N, {}), got {:?}",
                self.in_features,
                input.shape()
            ))),
        }
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.check(input)?;
        let mut out = Vec::with_capacity(n * self.out_features);
        for i in 0..n {
            let x = input.item(i);
            for o in 0..self.out_features {
                let w = &self.weight[o * self.in_features..(o + 1) * self.in_features];
                let mut acc = self.bias[o];
                for (&wv, &xv) in w.iter().zip(x) {
                    acc += wv * xv;
                }
                out.push(acc);
            }
        }
        Tensor::new(vec![n, self.out_features], out)
    }

    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<LinearGrads<T>> {
        let n = self.check(input)?;
        if grad_out.shape() != [n, self.out_features] {
            return Err(Error::usage("linear output gradient has the wrong shape"));
        }
        let mut dw = vec![T::zero(); self.weight.len()];
        let mut db = vec![T::zero(); self.out_features];
        let mut dx = vec![T::zero(); input.len()];
        for i in 0..n {
            let x = input.item(i);
            let dy = grad_out.item(i);
            let dx_i = &mut dx[i * self.in_features..(i + 1) * self.in_features];
            for (o, &d) in dy.iter().enumerate() {
                db[o] += d;
                let row = o * self.in_features;
                for k in 0..self.in_features {
                    dw[row + k] += d * x[k];
                    dx_i[k] += d * self.weight[row + k];
                }
            }
        }
        Ok(LinearGrads {
            weight: dw,
            bias: db,
            input: Tensor::new(input.shape().to_vec(), dx)?,
        })
    }
}
