//! Differentiable building blocks.
//!
//! A [`Layer`] runs a forward pass that records what its backward pass needs
//! (the trace) and returns exact vector–Jacobian products for its input and
//! for every parameter, in [`Layer::params`] order.

use crate::error::Result;
use crate::ops::{self, Conv2dSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Gradients<S> {
    pub input: Tensor<S>,
    /// One entry per parameter, same order as [`Layer::params`].
    pub params: Vec<Tensor<S>>,
}

pub trait Layer<S: Scalar> {
    type Trace;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Self::Trace)>;

    fn backward(&self, trace: &Self::Trace, grad_out: &Tensor<S>) -> Result<Gradients<S>>;

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)>;

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>>;

    fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.forward_traced(x).map(|(y, _)| y)
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Convolution with owned weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<S> {
    pub spec: Conv2dSpec,
    pub weight: Tensor<S>,
    pub bias: Option<Tensor<S>>,
}

impl<S: Scalar> Layer<S> for Conv2d<S> {
    type Trace = Tensor<S>;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)> {
        let y = ops::conv2d(x, &self.weight, self.bias.as_ref(), &self.spec)?;
        Ok((y, x.clone()))
    }

    fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        ops::conv2d(x, &self.weight, self.bias.as_ref(), &self.spec)
    }

    fn backward(&self, x: &Tensor<S>, gy: &Tensor<S>) -> Result<Gradients<S>> {
        let g = ops::conv2d_backward(x, &self.weight, &self.spec, gy)?;
        let mut params = vec![g.weight];
        params.extend(g.bias);
        Ok(Gradients { input: g.input, params })
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        let mut p = vec![("weight", &self.weight)];
        if let Some(b) = &self.bias {
            p.push(("bias", b));
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut p = vec![&mut self.weight];
        p.extend(self.bias.as_mut());
        p
    }
}

/// Fully connected map along the last axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<S> {
    pub weight: Tensor<S>,
    pub bias: Option<Tensor<S>>,
}

impl<S: Scalar> Layer<S> for Linear<S> {
    type Trace = Tensor<S>;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)> {
        Ok((ops::linear(x, &self.weight, self.bias.as_ref())?, x.clone()))
    }

    fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        ops::linear(x, &self.weight, self.bias.as_ref())
    }

    fn backward(&self, x: &Tensor<S>, gy: &Tensor<S>) -> Result<Gradients<S>> {
        let g = ops::linear_backward(x, &self.weight, gy)?;
        let mut params = vec![g.weight];
        if self.bias.is_some() {
            params.push(g.bias);
        }
        Ok(Gradients { input: g.input, params })
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        let mut p = vec![("weight", &self.weight)];
        if let Some(b) = &self.bias {
            p.push(("bias", b));
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut p = vec![&mut self.weight];
        p.extend(self.bias.as_mut());
        p
    }
}

/// Parameter-free elementwise or axis-wise transforms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation<S> {
    Relu,
    Sigmoid,
    Softmax { axis: usize, temperature: S },
}

impl<S: Scalar> Layer<S> for Activation<S> {
    /// Input for ReLU, output for sigmoid and softmax.
    type Trace = Tensor<S>;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)> {
        match *self {
            Activation::Relu => Ok((ops::relu(x), x.clone())),
            Activation::Sigmoid => {
                let y = ops::sigmoid(x);
                Ok((y.clone(), y))
            }
            Activation::Softmax { axis, temperature } => {
                let y = ops::softmax(x, axis, temperature)?;
                Ok((y.clone(), y))
            }
        }
    }

    fn backward(&self, trace: &Tensor<S>, gy: &Tensor<S>) -> Result<Gradients<S>> {
        let input = match *self {
            Activation::Relu => ops::relu_backward(trace, gy)?,
            Activation::Sigmoid => ops::sigmoid_backward(trace, gy)?,
            Activation::Softmax { axis, temperature } => ops::softmax_backward(trace, gy, axis, temperature)?,
        };
        Ok(Gradients { input, params: Vec::new() })
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        Vec::new()
    }
}

/// Mean pooling over `(frequency, time)` windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AvgPool2d {
    pub pool_f: usize,
    pub pool_t: usize,
}

impl<S: Scalar> Layer<S> for AvgPool2d {
    type Trace = Vec<usize>;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Vec<usize>)> {
        Ok((ops::avg_pool2d(x, self.pool_f, self.pool_t)?, x.dims().to_vec()))
    }

    fn backward(&self, dims: &Vec<usize>, gy: &Tensor<S>) -> Result<Gradients<S>> {
        Ok(Gradients {
            input: ops::avg_pool2d_backward(dims, gy, self.pool_f, self.pool_t)?,
            params: Vec::new(),
        })
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        Vec::new()
    }
}
