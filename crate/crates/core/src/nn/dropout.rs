use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inverted dropout: survivors are scaled by `1/(1−p)` during training,
/// evaluation is the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

/// Per-element multiplier applied in the forward pass (0 or `1/(1−p)`).
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask<T>(Vec<T>);

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate })
    }

    pub fn forward_train<T: Scalar, R: Rng + ?Sized>(
        &self,
        input: &Tensor<T>,
        rng: &mut R,
    ) -> (Tensor<T>, DropoutMask<T>) {
        if self.rate == 0.0 {
            return (input.clone(), DropoutMask(vec![T::one(); input.len()]));
        }
        let keep = T::lit(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..input.len())
            .map(|_| if rng.gen::<f64>() < self.rate { T::zero() } else { keep })
            .collect();
        let data = input.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        (
            Tensor::new(input.shape().to_vec(), data).expect("same shape"),
            DropoutMask(mask),
        )
    }

    pub fn backward<T: Scalar>(&self, mask: &DropoutMask<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        if mask.0.len() != grad_out.len() {
            return Err(Error::usage("dropout gradient does not match forward input"));
        }
        let data = grad_out.data().iter().zip(&mask.0).map(|(&g, &m)| g * m).collect();
        Tensor::new(grad_out.shape().to_vec(), data)
    }
}
