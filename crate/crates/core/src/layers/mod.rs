//! Trainable layers with hand-written backward passes.
//!
//! Feature maps are `C×H×W` row-major. Each layer has a checked public
//! forward/backward pair working on [`Tensor`]s and an unchecked slice-level
//! pair used by the network's training loop.

mod conv;
mod dense;
mod loss;
mod optim;
mod pool;

pub use conv::{conv_backward, conv_forward, ConvLayer};
pub use dense::{dense_backward, dense_forward, DenseLayer};
pub(crate) use loss::softmax_ce_raw as loss_raw;
pub use loss::softmax_cross_entropy;
pub use optim::{sgd_step, Sgd};
pub use pool::{pool_backward, pool_forward, PoolKind, PoolLayer};

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// `(channels, height, width)`; dense outputs are `(K, 1, 1)`.
pub type Shape3 = [usize; 3];

pub(crate) fn shape3(t: &Tensor<impl Scalar>, what: &str) -> Result<Shape3> {
    match *t.shape() {
        [c, h, w] => Ok([c, h, w]),
        ref s => Err(Error::dims(format!("{what} must be C×H×W, got {s:?}"))),
    }
}

/// Gradients of one layer's parameters, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads<S = f64> {
    pub weights: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> ParamGrads<S> {
    pub(crate) fn zeros_like(weights: &Tensor<S>, bias: &Tensor<S>) -> Self {
        ParamGrads {
            weights: Tensor::zeros(weights.shape()),
            bias: Tensor::zeros(bias.shape()),
        }
    }

    pub(crate) fn fill_zero(&mut self) {
        self.weights.values_mut().fill(S::zero());
        self.bias.values_mut().fill(S::zero());
    }
}

/// Which parameter of a layer a gradient belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamName {
    Weights,
    Bias,
}

/// Per-parameter gradients for a whole network, indexed by layer position.
/// Parameter-free layers hold `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle<S = f64> {
    layers: Vec<Option<ParamGrads<S>>>,
}

impl<S: Scalar> GradientBundle<S> {
    pub fn zeros_for(layers: &[Layer<S>]) -> Self {
        GradientBundle {
            layers: layers.iter().map(Layer::zero_grads).collect(),
        }
    }

    pub fn get(&self, layer: usize, name: ParamName) -> Option<&Tensor<S>> {
        let g = self.layers.get(layer)?.as_ref()?;
        Some(match name {
            ParamName::Weights => &g.weights,
            ParamName::Bias => &g.bias,
        })
    }

    pub fn layer(&self, layer: usize) -> Option<&ParamGrads<S>> {
        self.layers.get(layer)?.as_ref()
    }

    pub(crate) fn layer_mut(&mut self, layer: usize) -> Option<&mut ParamGrads<S>> {
        self.layers.get_mut(layer)?.as_mut()
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn clear(&mut self) {
        for g in self.layers.iter_mut().flatten() {
            g.fill_zero();
        }
    }

    /// Adds `other` into `self` parameter by parameter.
    pub fn accumulate(&mut self, other: &GradientBundle<S>) {
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(d), Some(s)) = (dst, src) {
                for (a, &b) in d.weights.values_mut().iter_mut().zip(s.weights.values()) {
                    *a += b;
                }
                for (a, &b) in d.bias.values_mut().iter_mut().zip(s.bias.values()) {
                    *a += b;
                }
            }
        }
    }

    pub fn scale(&mut self, c: S) {
        for g in self.layers.iter_mut().flatten() {
            g.weights.values_mut().iter_mut().for_each(|v| *v *= c);
            g.bias.values_mut().iter_mut().for_each(|v| *v *= c);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<S = f64> {
    Conv(ConvLayer<S>),
    Pool(PoolLayer),
    Dense(DenseLayer<S>),
}

impl<S: Scalar> Layer<S> {
    pub fn output_shape(&self, input: Shape3) -> Result<Shape3> {
        match self {
            Layer::Conv(l) => l.output_shape(input),
            Layer::Pool(l) => l.output_shape(input),
            Layer::Dense(l) => l.output_shape(input),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv(l) => l.weights().len() + l.bias().len(),
            Layer::Pool(_) => 0,
            Layer::Dense(l) => l.weights().len() + l.bias().len(),
        }
    }

    pub fn zero_grads(&self) -> Option<ParamGrads<S>> {
        match self {
            Layer::Conv(l) => Some(ParamGrads::zeros_like(l.weights(), l.bias())),
            Layer::Pool(_) => None,
            Layer::Dense(l) => Some(ParamGrads::zeros_like(l.weights(), l.bias())),
        }
    }

    /// Mutable `(weights, bias)` value slices, if the layer has parameters.
    pub(crate) fn params_mut(&mut self) -> Option<(&mut [S], &mut [S])> {
        match self {
            Layer::Conv(l) => Some(l.params_mut()),
            Layer::Pool(_) => None,
            Layer::Dense(l) => Some(l.params_mut()),
        }
    }

    pub fn params(&self) -> Option<(&Tensor<S>, &Tensor<S>)> {
        match self {
            Layer::Conv(l) => Some((l.weights(), l.bias())),
            Layer::Pool(_) => None,
            Layer::Dense(l) => Some((l.weights(), l.bias())),
        }
    }

    pub(crate) fn forward_raw(&self, input: &[S], in_shape: Shape3, out: &mut [S]) {
        match self {
            Layer::Conv(l) => l.forward_raw(input, in_shape, out),
            Layer::Pool(l) => l.forward_raw(input, in_shape, out),
            Layer::Dense(l) => l.forward_raw(input, out),
        }
    }

    /// Accumulates parameter gradients into `grads` and, when `input_grad` is
    /// given, writes (overwrites) the gradient w.r.t. the input.
    pub(crate) fn backward_raw(
        &self,
        input: &[S],
        in_shape: Shape3,
        output: &[S],
        upstream: &[S],
        grads: Option<&mut ParamGrads<S>>,
        input_grad: Option<&mut [S]>,
    ) {
        match self {
            Layer::Conv(l) => {
                let g = grads.expect("conv layer gradients");
                l.backward_raw(input, in_shape, output, upstream, g, input_grad)
            }
            Layer::Pool(l) => {
                if let Some(ig) = input_grad {
                    l.backward_raw(input, in_shape, upstream, ig)
                }
            }
            Layer::Dense(l) => {
                let g = grads.expect("dense layer gradients");
                l.backward_raw(input, output, upstream, g, input_grad)
            }
        }
    }
}
