//! Differentiable building blocks: convolution, maxout, inception, MSE.
//!
//! Every forward op has a matching backward op returning exact gradients.
//! Ops are pure functions of their arguments.

mod conv;
mod inception;
mod loss;
mod maxout;

pub use conv::{conv2d_backward, conv2d_backward_with, conv2d_forward, ConvGrads, ConvLayer};
pub use inception::{inception_backward, inception_forward, InceptionBlock, InceptionGrads};
pub use loss::mse_loss;
pub use maxout::{maxout_backward, maxout_forward, relu_backward, relu_forward, ArgmaxMap, MaxoutUnit};
