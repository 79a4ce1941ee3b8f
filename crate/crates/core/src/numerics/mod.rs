//! Tensors, reverse-mode differentiation for the convolutional layer set,
//! seeded random streams, Gaussian initialization and plain SGD.

mod graph;
pub mod gradcheck;
mod kernels;
mod params;
mod real;
mod rng;
mod tensor;

pub use gradcheck::{grad_check, max_relative_error};
pub use graph::{Bound, Graph, Var, LOG_CLAMP};
pub use kernels::{conv_out_extent, conv_transpose_out_extent, Activation};
pub use params::{gaussian_init, sgd_step, ParamStore};
pub use real::Real;
pub use rng::Rng;
pub use tensor::Tensor;

use crate::error::Result;

fn unary<T: Real>(build: impl FnOnce(&mut Graph<T>) -> Result<Var>) -> Result<Tensor<T>> {
    let mut g = Graph::new();
    let out = build(&mut g)?;
    Ok(g.value(out).clone())
}

/// Strided 2-D cross-correlation of an NCHW input with an OIHW weight.
pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    unary(|g| {
        let (x, w, b) = (g.constant(input.clone())?, g.constant(weight.clone())?, g.constant(bias.clone())?);
        g.conv2d(x, w, b, stride, pad)
    })
}

/// Adjoint of [`conv2d`] in its data argument, plus bias. The weight is laid
/// out `(Cin, Cout, KH, KW)`, i.e. the same tensor a forward correlation from
/// `Cout` to `Cin` channels would use.
pub fn conv_transpose2d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    unary(|g| {
        let (x, w, b) = (g.constant(input.clone())?, g.constant(weight.clone())?, g.constant(bias.clone())?);
        g.conv_transpose2d(x, w, b, stride, pad)
    })
}

/// Per-sample, per-channel standardization followed by a channel affine map.
pub fn instance_norm<T: Real>(x: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
    unary(|g| {
        let (x, ga, be) = (g.constant(x.clone())?, g.constant(gamma.clone())?, g.constant(beta.clone())?);
        g.instance_norm(x, ga, be, eps)
    })
}

pub fn activation<T: Real>(x: &Tensor<T>, kind: Activation) -> Result<Tensor<T>> {
    unary(|g| {
        let x = g.constant(x.clone())?;
        g.activation(x, kind)
    })
}
