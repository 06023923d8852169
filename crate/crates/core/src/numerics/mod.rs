//! Dense tensors, activations and seeded randomness.

mod activation;
mod init;
mod mat;
mod rng;
mod scalar;

pub use activation::{
    argmax, sigmoid, sigmoid_derivative, sigmoid_derivative_from_output, softmax, softmax_in_place, tanh,
    tanh_derivative, tanh_derivative_from_output,
};
pub use init::{init_weights, InitScheme, FORGET_BIAS_INIT};
pub use mat::{check_finite, gemm, Mat};
pub use rng::Rng;
pub use scalar::{lit, Scalar};
