use super::{ParamGrads, Shape3};
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, Scalar, Tensor};
use crate::recos::Activation;

/// Affine map `W x + b` with an optional activation. The output layer carries
/// none; softmax is applied by the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<S = f64> {
    weights: Tensor<S>,
    bias: Tensor<S>,
    activation: Option<Activation>,
}

impl<S: Scalar> DenseLayer<S> {
    pub fn new(weights: Tensor<S>, bias: Tensor<S>, activation: Option<Activation>) -> Result<Self> {
        let k_out = match *weights.shape() {
            [k, _] => k,
            ref s => return Err(Error::dims(format!("dense weights must be K_out×K_in, got {s:?}"))),
        };
        if bias.shape() != [k_out] {
            return Err(Error::dims(format!(
                "dense bias shape {:?} does not match {k_out} outputs",
                bias.shape()
            )));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Tensor<S> {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor<S> {
        &self.bias
    }

    pub fn activation(&self) -> Option<Activation> {
        self.activation
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [S], &mut [S]) {
        (self.weights.values_mut(), self.bias.values_mut())
    }

    /// Any input shape whose element count matches is flattened.
    pub fn output_shape(&self, input: Shape3) -> Result<Shape3> {
        let n: usize = input.iter().product();
        if n != self.inputs() {
            return Err(Error::dims(format!(
                "dense layer expects {} inputs, got {input:?}",
                self.inputs()
            )));
        }
        Ok([self.outputs(), 1, 1])
    }

    pub(crate) fn forward_raw(&self, input: &[S], out: &mut [S]) {
        for (k, o) in out.iter_mut().enumerate() {
            let t = dot(self.weights.row(k), input) + self.bias.values()[k];
            *o = match self.activation {
                Some(a) => a.apply(t),
                None => t,
            };
        }
    }

    pub(crate) fn backward_raw(
        &self,
        input: &[S],
        output: &[S],
        upstream: &[S],
        grads: &mut ParamGrads<S>,
        input_grad: Option<&mut [S]>,
    ) {
        let n_in = self.inputs();
        let delta: Vec<S> = match self.activation {
            Some(a) => output
                .iter()
                .zip(upstream)
                .map(|(&y, &g)| g * a.derivative_from_output(y))
                .collect(),
            None => upstream.to_vec(),
        };
        let gw = grads.weights.values_mut();
        for (k, &d) in delta.iter().enumerate() {
            axpy(d, input, &mut gw[k * n_in..(k + 1) * n_in]);
        }
        for (b, &d) in grads.bias.values_mut().iter_mut().zip(&delta) {
            *b += d;
        }
        if let Some(gi) = input_grad {
            gi.fill(S::zero());
            for (k, &d) in delta.iter().enumerate() {
                axpy(d, self.weights.row(k), gi);
            }
        }
    }
}

pub fn dense_forward<S: Scalar>(input: &Tensor<S>, layer: &DenseLayer<S>) -> Result<Tensor<S>> {
    if input.len() != layer.inputs() {
        return Err(Error::dims(format!(
            "dense layer expects {} inputs, got shape {:?}",
            layer.inputs(),
            input.shape()
        )));
    }
    let mut out = vec![S::zero(); layer.outputs()];
    layer.forward_raw(input.values(), &mut out);
    Tensor::vector(out)
}

/// Returns parameter gradients and the input gradient, shaped like `input`.
pub fn dense_backward<S: Scalar>(
    input: &Tensor<S>,
    layer: &DenseLayer<S>,
    upstream: &Tensor<S>,
) -> Result<(ParamGrads<S>, Tensor<S>)> {
    let output = dense_forward(input, layer)?;
    if upstream.len() != layer.outputs() {
        return Err(Error::dims(format!(
            "upstream gradient {:?} does not match {} outputs",
            upstream.shape(),
            layer.outputs()
        )));
    }
    let mut grads = ParamGrads::zeros_like(layer.weights(), layer.bias());
    let mut gi = vec![S::zero(); input.len()];
    layer.backward_raw(
        input.values(),
        output.values(),
        upstream.values(),
        &mut grads,
        Some(&mut gi),
    );
    Ok((grads, Tensor::new(input.shape().to_vec(), gi)?))
}
