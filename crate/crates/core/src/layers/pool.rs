use std::fmt;
use std::str::FromStr;

use super::{shape3, Shape3};
use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Average,
    Max,
}

impl PoolKind {
    pub fn code(self) -> u32 {
        match self {
            PoolKind::Average => 0,
            PoolKind::Max => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(PoolKind::Average),
            1 => Ok(PoolKind::Max),
            _ => Err(Error::Config(format!("unknown pooling code {code}"))),
        }
    }
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolKind::Average => "average",
            PoolKind::Max => "max",
        })
    }
}

impl FromStr for PoolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "average" | "avg" => Ok(PoolKind::Average),
            "max" => Ok(PoolKind::Max),
            other => Err(Error::Config(format!("unknown pooling {other:?}"))),
        }
    }
}

/// Non-overlapping pooling: the window equals the stride.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolLayer {
    kind: PoolKind,
    window: usize,
}

impl PoolLayer {
    pub fn new(kind: PoolKind, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::dims("pool window must be positive"));
        }
        Ok(PoolLayer { kind, window })
    }

    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn stride(&self) -> usize {
        self.window
    }

    pub fn output_shape(&self, [c, h, w]: Shape3) -> Result<Shape3> {
        let s = self.window;
        if h % s != 0 || w % s != 0 {
            return Err(Error::dims(format!("pool stride {s} does not divide input {h}×{w}")));
        }
        Ok([c, h / s, w / s])
    }

    pub(crate) fn forward_raw<S: Scalar>(&self, input: &[S], [c, h, w]: Shape3, out: &mut [S]) {
        let s = self.window;
        let (ho, wo) = (h / s, w / s);
        let inv = S::one() / S::lit((s * s) as f64);
        for ch in 0..c {
            let plane = &input[ch * h * w..(ch + 1) * h * w];
            for i in 0..ho {
                for j in 0..wo {
                    let mut acc = match self.kind {
                        PoolKind::Average => S::zero(),
                        PoolKind::Max => S::neg_infinity(),
                    };
                    for di in 0..s {
                        for dj in 0..s {
                            let v = plane[(i * s + di) * w + j * s + dj];
                            match self.kind {
                                PoolKind::Average => acc += v,
                                PoolKind::Max => {
                                    if v > acc {
                                        acc = v
                                    }
                                }
                            }
                        }
                    }
                    if self.kind == PoolKind::Average {
                        acc *= inv;
                    }
                    out[(ch * ho + i) * wo + j] = acc;
                }
            }
        }
    }

    /// Average spreads each gradient uniformly over its window; max routes it
    /// to the first maximal position in row-major order.
    pub(crate) fn backward_raw<S: Scalar>(&self, input: &[S], [c, h, w]: Shape3, upstream: &[S], input_grad: &mut [S]) {
        let s = self.window;
        let (ho, wo) = (h / s, w / s);
        let inv = S::one() / S::lit((s * s) as f64);
        input_grad.fill(S::zero());
        for ch in 0..c {
            let base = ch * h * w;
            for i in 0..ho {
                for j in 0..wo {
                    let g = upstream[(ch * ho + i) * wo + j];
                    match self.kind {
                        PoolKind::Average => {
                            for di in 0..s {
                                for dj in 0..s {
                                    input_grad[base + (i * s + di) * w + j * s + dj] += g * inv;
                                }
                            }
                        }
                        PoolKind::Max => {
                            let mut best = base + (i * s) * w + j * s;
                            for di in 0..s {
                                for dj in 0..s {
                                    let idx = base + (i * s + di) * w + j * s + dj;
                                    if input[idx] > input[best] {
                                        best = idx;
                                    }
                                }
                            }
                            input_grad[best] += g;
                        }
                    }
                }
            }
        }
    }
}

pub fn pool_forward<S: Scalar>(input: &Tensor<S>, layer: &PoolLayer) -> Result<Tensor<S>> {
    let in_shape = shape3(input, "pool input")?;
    let out_shape = layer.output_shape(in_shape)?;
    let mut out = vec![S::zero(); out_shape.iter().product()];
    layer.forward_raw(input.values(), in_shape, &mut out);
    Tensor::new(out_shape.to_vec(), out)
}

pub fn pool_backward<S: Scalar>(input: &Tensor<S>, layer: &PoolLayer, upstream: &Tensor<S>) -> Result<Tensor<S>> {
    let in_shape = shape3(input, "pool input")?;
    let out_shape = layer.output_shape(in_shape)?;
    if upstream.shape() != out_shape {
        return Err(Error::dims(format!(
            "upstream gradient {:?} does not match pool output {out_shape:?}",
            upstream.shape()
        )));
    }
    let mut gi = vec![S::zero(); input.len()];
    layer.backward_raw(input.values(), in_shape, upstream.values(), &mut gi);
    Tensor::new(input.shape().to_vec(), gi)
}
