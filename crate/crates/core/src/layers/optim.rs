use super::{GradientBundle, Layer};
use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// One momentum step over a flat parameter slice:
/// `v ← momentum·v − lr·g; p ← p + v`.
pub fn sgd_step<S: Scalar>(params: &mut [S], grads: &[S], velocity: &mut [S], lr: S, momentum: S) {
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
}

/// Momentum SGD holding one velocity buffer per parameter tensor.
#[derive(Clone, Debug)]
pub struct Sgd<S = f64> {
    lr: S,
    momentum: S,
    velocity: Vec<Option<(Vec<S>, Vec<S>)>>,
}

impl<S: Scalar> Sgd<S> {
    pub fn new(layers: &[Layer<S>], lr: f64, momentum: f64) -> Result<Self> {
        if lr.is_nan() || lr <= 0.0 {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        let velocity = layers
            .iter()
            .map(|l| {
                l.params()
                    .map(|(w, b)| (vec![S::zero(); w.len()], vec![S::zero(); b.len()]))
            })
            .collect();
        Ok(Sgd {
            lr: S::lit(lr),
            momentum: S::lit(momentum),
            velocity,
        })
    }

    pub fn step(&mut self, layers: &mut [Layer<S>], grads: &GradientBundle<S>) {
        for (i, (layer, vel)) in layers.iter_mut().zip(&mut self.velocity).enumerate() {
            let (Some((w, b)), Some((vw, vb)), Some(g)) = (layer.params_mut(), vel.as_mut(), grads.layer(i)) else {
                continue;
            };
            sgd_step(w, g.weights.values(), vw, self.lr, self.momentum);
            sgd_step(b, g.bias.values(), vb, self.lr, self.momentum);
        }
    }
}
