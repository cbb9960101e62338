//! Hybrid quantum-classical convolutional networks on an exact statevector
//! simulator.
//!
//! The simulator, quantum filters and network layers are generic over
//! [`Scalar`] (`f32` or `f64`); training, datasets and checkpoints use `f64`.
//! The aliases below fix the scalar to `f64`.

#![allow(clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod nn;
pub mod qconv;
pub mod qfilter;
pub mod qsim;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Gate = qsim::Gate<f64>;
pub type Circuit = qsim::Circuit<f64>;
pub type StateVector = qsim::StateVector<f64>;
pub type Encoding = qfilter::Encoding<f64>;
pub type FilterSpec = qfilter::FilterSpec<f64>;
pub type QuantumConv = qconv::QuantumConv<f64>;
pub type Tensor = nn::Tensor<f64>;
pub type Conv = nn::Conv<f64>;
pub type BatchNorm = nn::BatchNorm<f64>;
pub type Linear = nn::Linear<f64>;
