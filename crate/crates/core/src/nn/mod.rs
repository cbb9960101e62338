//! Classical layers with explicit forward/backward passes, the loss and the
//! Adam optimizer. Layers are composed by hand in `train`; there is no graph.

mod activation;
mod adam;
mod batchnorm;
mod conv;
mod dropout;
mod linear;
mod loss;
mod pool;
mod tensor;

pub use activation::{relu, relu_backward};
pub use adam::{adam_step, Adam, AdamState};
pub use batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads, BN_EPSILON, BN_MOMENTUM};
pub use conv::{conv_param_count, Conv, ConvGrads};
pub use dropout::{Dropout, DropoutMask};
pub use linear::{Linear, LinearGrads};
pub use loss::{cross_entropy_per_item, predictions, softmax_cross_entropy};
pub use pool::{MaxPool, PoolIndices};
pub use tensor::{feature_map_dims, window_indices, window_output, Extent, Tensor};
