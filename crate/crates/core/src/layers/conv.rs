use super::{shape3, ParamGrads, Shape3};
use crate::error::{Error, Result};
use crate::numerics::{axpy, Scalar, Tensor};
use crate::recos::Activation;

/// `K` anchors of shape `C×h×w` slid over the input as a cross-correlation
/// (no kernel flip), valid windows only.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<S = f64> {
    weights: Tensor<S>,
    bias: Tensor<S>,
    stride: usize,
    activation: Activation,
}

impl<S: Scalar> ConvLayer<S> {
    pub fn new(weights: Tensor<S>, bias: Tensor<S>, stride: usize, activation: Activation) -> Result<Self> {
        let k = match *weights.shape() {
            [k, _, _, _] => k,
            ref s => return Err(Error::dims(format!("conv weights must be K×C×h×w, got {s:?}"))),
        };
        if bias.shape() != [k] {
            return Err(Error::dims(format!(
                "conv bias shape {:?} does not match {k} anchors",
                bias.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::dims("conv stride must be positive"));
        }
        Ok(ConvLayer {
            weights,
            bias,
            stride,
            activation,
        })
    }

    /// `(K, C, h, w)`.
    pub fn kernel_dims(&self) -> (usize, usize, usize, usize) {
        let s = self.weights.shape();
        (s[0], s[1], s[2], s[3])
    }

    pub fn weights(&self) -> &Tensor<S> {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor<S> {
        &self.bias
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Flattened anchor `k` (length `C·h·w`).
    pub fn anchor(&self, k: usize) -> &[S] {
        let (_, c, h, w) = self.kernel_dims();
        let n = c * h * w;
        &self.weights.values()[k * n..(k + 1) * n]
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [S], &mut [S]) {
        (self.weights.values_mut(), self.bias.values_mut())
    }

    pub fn output_shape(&self, [c, h, w]: Shape3) -> Result<Shape3> {
        let (k, kc, kh, kw) = self.kernel_dims();
        if c != kc {
            return Err(Error::dims(format!("conv expects {kc} input channels, got {c}")));
        }
        if h < kh || w < kw {
            return Err(Error::dims(format!("input {h}×{w} smaller than kernel {kh}×{kw}")));
        }
        Ok([k, (h - kh) / self.stride + 1, (w - kw) / self.stride + 1])
    }

    pub(crate) fn forward_raw(&self, input: &[S], in_shape: Shape3, out: &mut [S]) {
        let [c_in, h_in, w_in] = in_shape;
        let (k_out, _, kh, kw) = self.kernel_dims();
        let s = self.stride;
        let ho = (h_in - kh) / s + 1;
        let wo = (w_in - kw) / s + 1;
        let w = self.weights.values();
        out.fill(S::zero());
        for k in 0..k_out {
            let dst = &mut out[k * ho * wo..(k + 1) * ho * wo];
            for c in 0..c_in {
                let plane = &input[c * h_in * w_in..(c + 1) * h_in * w_in];
                for ki in 0..kh {
                    for kj in 0..kw {
                        let wt = w[((k * c_in + c) * kh + ki) * kw + kj];
                        for i in 0..ho {
                            let row = &plane[(i * s + ki) * w_in..];
                            let d = &mut dst[i * wo..(i + 1) * wo];
                            if s == 1 {
                                axpy(wt, &row[kj..kj + wo], d);
                            } else {
                                for (j, dv) in d.iter_mut().enumerate() {
                                    *dv += wt * row[j * s + kj];
                                }
                            }
                        }
                    }
                }
            }
            let b = self.bias.values()[k];
            for v in dst.iter_mut() {
                *v = self.activation.apply(*v + b);
            }
        }
    }

    pub(crate) fn backward_raw(
        &self,
        input: &[S],
        in_shape: Shape3,
        output: &[S],
        upstream: &[S],
        grads: &mut ParamGrads<S>,
        input_grad: Option<&mut [S]>,
    ) {
        let [c_in, h_in, w_in] = in_shape;
        let (k_out, _, kh, kw) = self.kernel_dims();
        let s = self.stride;
        let ho = (h_in - kh) / s + 1;
        let wo = (w_in - kw) / s + 1;

        let delta: Vec<S> = output
            .iter()
            .zip(upstream)
            .map(|(&y, &g)| g * self.activation.derivative_from_output(y))
            .collect();

        let gw = grads.weights.values_mut();
        for k in 0..k_out {
            let dk = &delta[k * ho * wo..(k + 1) * ho * wo];
            for c in 0..c_in {
                let plane = &input[c * h_in * w_in..(c + 1) * h_in * w_in];
                for ki in 0..kh {
                    for kj in 0..kw {
                        let mut acc = [S::zero(); 4];
                        for i in 0..ho {
                            let row = &plane[(i * s + ki) * w_in..];
                            let drow = &dk[i * wo..(i + 1) * wo];
                            if s == 1 {
                                lane_dot(&mut acc, drow, &row[kj..kj + wo]);
                            } else {
                                for (j, &d) in drow.iter().enumerate() {
                                    acc[0] += d * row[j * s + kj];
                                }
                            }
                        }
                        gw[((k * c_in + c) * kh + ki) * kw + kj] += (acc[0] + acc[1]) + (acc[2] + acc[3]);
                    }
                }
            }
        }
        let gb = grads.bias.values_mut();
        for k in 0..k_out {
            gb[k] += delta[k * ho * wo..(k + 1) * ho * wo].iter().copied().sum::<S>();
        }

        if let Some(gi) = input_grad {
            gi.fill(S::zero());
            let w = self.weights.values();
            for k in 0..k_out {
                let dk = &delta[k * ho * wo..(k + 1) * ho * wo];
                for c in 0..c_in {
                    let plane = &mut gi[c * h_in * w_in..(c + 1) * h_in * w_in];
                    for ki in 0..kh {
                        for kj in 0..kw {
                            let wt = w[((k * c_in + c) * kh + ki) * kw + kj];
                            for i in 0..ho {
                                let drow = &dk[i * wo..(i + 1) * wo];
                                let row = &mut plane[(i * s + ki) * w_in..];
                                if s == 1 {
                                    axpy(wt, drow, &mut row[kj..kj + wo]);
                                } else {
                                    for (j, &d) in drow.iter().enumerate() {
                                        row[j * s + kj] += wt * d;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Four interleaved partial sums; fixed lane assignment keeps it deterministic.
#[inline]
fn lane_dot<S: Scalar>(acc: &mut [S; 4], a: &[S], b: &[S]) {
    let chunks = a.len() / 4;
    for q in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * q + l] * b[4 * q + l];
        }
    }
    for r in 4 * chunks..a.len() {
        acc[r % 4] += a[r] * b[r];
    }
}

pub fn conv_forward<S: Scalar>(input: &Tensor<S>, layer: &ConvLayer<S>) -> Result<Tensor<S>> {
    let in_shape = shape3(input, "conv input")?;
    let out_shape = layer.output_shape(in_shape)?;
    let mut out = vec![S::zero(); out_shape.iter().product()];
    layer.forward_raw(input.values(), in_shape, &mut out);
    Tensor::new(out_shape.to_vec(), out)
}

/// Returns parameter gradients and the gradient w.r.t. `input`.
pub fn conv_backward<S: Scalar>(
    input: &Tensor<S>,
    layer: &ConvLayer<S>,
    upstream: &Tensor<S>,
) -> Result<(ParamGrads<S>, Tensor<S>)> {
    let in_shape = shape3(input, "conv input")?;
    let out_shape = layer.output_shape(in_shape)?;
    if upstream.shape() != out_shape {
        return Err(Error::dims(format!(
            "upstream gradient {:?} does not match conv output {out_shape:?}",
            upstream.shape()
        )));
    }
    let output = conv_forward(input, layer)?;
    let mut grads = ParamGrads::zeros_like(layer.weights(), layer.bias());
    let mut gi = vec![S::zero(); input.len()];
    layer.backward_raw(
        input.values(),
        in_shape,
        output.values(),
        upstream.values(),
        &mut grads,
        Some(&mut gi),
    );
    Ok((grads, Tensor::new(input.shape().to_vec(), gi)?))
}
