//! Numeric primitives and their vector–Jacobian products.

mod activation;
mod conv;
mod linear;
mod norm;
mod pool;

pub use activation::{
    relu, relu_backward, relu_scalar, sigmoid, sigmoid_backward, sigmoid_scalar, softmax, softmax_backward,
};
pub use conv::{conv2d, conv2d_backward, Conv2dGrads, Conv2dSpec};
pub use linear::{linear, linear_backward, LinearGrads};
pub use norm::{batchnorm_infer, BN_EPS};
pub use pool::{avg_pool2d, avg_pool2d_backward};
