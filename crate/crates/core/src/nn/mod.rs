//! Tensors, layers with hand-written backward passes, and Adam.

pub mod adam;
pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod loss;
pub mod ops;
pub mod param;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use batchnorm::{BatchNorm, BnCache, Mode};
pub use conv::{same_padding, Conv2d, ConvGrads};
pub use dense::Dense;
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use ops::{global_avgpool, global_avgpool_backward, relu, relu_backward, MaxPool2d, PoolCache};
pub use param::{Param, Parameterized};
pub use tensor::{Scalar, Tensor};
