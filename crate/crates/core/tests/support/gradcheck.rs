//! Central finite differences against the hand-written backward passes.
//!
//! Each instance draws a small random layer and input, projects the layer
//! output onto a random vector `r` to get a scalar `f = rᵀ·out`, and compares
//! every analytic partial with `(f(θ+ε) − f(θ−ε)) / 2ε`. Instances whose
//! pre-activations (or max-pool margins) come within `KINK_MARGIN` of a kink
//! are redrawn, since the derivative is undefined there.

use recos::layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, pool_backward, pool_forward, softmax_cross_entropy,
    ConvLayer, DenseLayer, PoolKind, PoolLayer,
};
use recos::{Activation, Rng, Tensor};

pub const EPS: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Denominator floor so that partials near zero are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;
const KINK_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, Default)]
pub struct LayerCheck {
    pub name: &'static str,
    pub instances: usize,
    pub partials: usize,
    pub max_rel_error: f64,
    pub redrawn: usize,
}

impl LayerCheck {
    fn new(name: &'static str) -> Self {
        LayerCheck {
            name,
            ..Default::default()
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        self.partials += 1;
        if rel > self.max_rel_error || rel.is_nan() {
            self.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
        }
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOL && self.partials > 0
    }
}

fn project(out: &Tensor, r: &[f64]) -> f64 {
    out.values().iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Numeric partial of `f` with respect to `values[i]`.
fn central(values: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = values[i];
    values[i] = orig + EPS;
    let up = f(values);
    values[i] = orig - EPS;
    let down = f(values);
    values[i] = orig;
    (up - down) / (2.0 * EPS)
}

fn activation_for(i: usize) -> Activation {
    match i % 3 {
        0 => Activation::Relu,
        1 => Activation::Sigmoid,
        _ => Activation::leaky_relu(0.1).unwrap(),
    }
}

fn has_kink(act: Activation) -> bool {
    !matches!(act, Activation::Sigmoid)
}

/// Pre-activations of a valid cross-correlation, computed directly.
fn conv_preactivations(x: &Tensor, w: &Tensor, b: &[f64], stride: usize) -> Vec<f64> {
    let [c, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2]];
    let [k, _, kh, kw] = [w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]];
    let (ho, wo) = ((h - kh) / stride + 1, (wd - kw) / stride + 1);
    let (xv, wv) = (x.values(), w.values());
    let mut out = Vec::new();
    for kk in 0..k {
        for i in 0..ho {
            for j in 0..wo {
                let mut s = b[kk];
                for cc in 0..c {
                    for p in 0..kh {
                        for q in 0..kw {
                            s += wv[((kk * c + cc) * kh + p) * kw + q]
                                * xv[(cc * h + i * stride + p) * wd + j * stride + q];
                        }
                    }
                }
                out.push(s);
            }
        }
    }
    out
}

pub fn check_conv(instances: usize, rng: &mut Rng) -> LayerCheck {
    let mut rep = LayerCheck::new("conv");
    let mut done = 0;
    while done < instances {
        let act = activation_for(done);
        let (c, k) = (1 + rng.below(3), 1 + rng.below(3));
        let (kh, kw) = (1 + rng.below(3), 1 + rng.below(3));
        let stride = 1 + rng.below(2);
        let (h, w) = (kh + rng.below(5), kw + rng.below(5));
        let x = Tensor::new(vec![c, h, w], rng.uniform_vec(c * h * w, -1.0, 1.0)).unwrap();
        let wt = Tensor::new(vec![k, c, kh, kw], rng.uniform_vec(k * c * kh * kw, -1.0, 1.0)).unwrap();
        let b = Tensor::vector(rng.uniform_vec(k, -0.5, 0.5)).unwrap();
        if has_kink(act)
            && conv_preactivations(&x, &wt, b.values(), stride)
                .iter()
                .any(|t| t.abs() < KINK_MARGIN)
        {
            rep.redrawn += 1;
            continue;
        }
        let layer = ConvLayer::new(wt.clone(), b.clone(), stride, act).unwrap();
        let out = conv_forward(&x, &layer).unwrap();
        let r: Vec<f64> = rng.uniform_vec(out.len(), -1.0, 1.0);
        let upstream = Tensor::new(out.shape().to_vec(), r.clone()).unwrap();
        let (grads, gx) = conv_backward(&x, &layer, &upstream).unwrap();

        let f_w = |wv: &[f64]| {
            let l = ConvLayer::new(
                Tensor::new(wt.shape().to_vec(), wv.to_vec()).unwrap(),
                b.clone(),
                stride,
                act,
            )
            .unwrap();
            project(&conv_forward(&x, &l).unwrap(), &r)
        };
        let mut wv = wt.values().to_vec();
        for i in 0..wv.len() {
            let n = central(&mut wv, i, f_w);
            rep.record(grads.weights.values()[i], n);
        }
        let mut bv = b.values().to_vec();
        for i in 0..bv.len() {
            let n = central(&mut bv, i, |bb| {
                let l = ConvLayer::new(wt.clone(), Tensor::vector(bb.to_vec()).unwrap(), stride, act).unwrap();
                project(&conv_forward(&x, &l).unwrap(), &r)
            });
            rep.record(grads.bias.values()[i], n);
        }
        let mut xv = x.values().to_vec();
        for i in 0..xv.len() {
            let n = central(&mut xv, i, |xx| {
                project(
                    &conv_forward(&Tensor::new(x.shape().to_vec(), xx.to_vec()).unwrap(), &layer).unwrap(),
                    &r,
                )
            });
            rep.record(gx.values()[i], n);
        }
        rep.instances += 1;
        done += 1;
    }
    rep
}

pub fn check_pool(instances: usize, rng: &mut Rng) -> LayerCheck {
    let mut rep = LayerCheck::new("pool");
    let mut done = 0;
    while done < instances {
        let kind = if done % 2 == 0 {
            PoolKind::Average
        } else {
            PoolKind::Max
        };
        let s = 1 + rng.below(3);
        let (c, h, w) = (1 + rng.below(3), s * (1 + rng.below(3)), s * (1 + rng.below(3)));
        let xv: Vec<f64> = rng.uniform_vec(c * h * w, -1.0, 1.0);
        if kind == PoolKind::Max && !max_windows_separated(&xv, [c, h, w], s) {
            rep.redrawn += 1;
            continue;
        }
        let x = Tensor::new(vec![c, h, w], xv.clone()).unwrap();
        let layer = PoolLayer::new(kind, s).unwrap();
        let out = pool_forward(&x, &layer).unwrap();
        let r: Vec<f64> = rng.uniform_vec(out.len(), -1.0, 1.0);
        let gx = pool_backward(&x, &layer, &Tensor::new(out.shape().to_vec(), r.clone()).unwrap()).unwrap();
        let mut xv = xv;
        for i in 0..xv.len() {
            let n = central(&mut xv, i, |xx| {
                project(
                    &pool_forward(&Tensor::new(vec![c, h, w], xx.to_vec()).unwrap(), &layer).unwrap(),
                    &r,
                )
            });
            rep.record(gx.values()[i], n);
        }
        rep.instances += 1;
        done += 1;
    }
    rep
}

/// True when every window's maximum beats the runner-up by the kink margin.
fn max_windows_separated(x: &[f64], [c, h, w]: [usize; 3], s: usize) -> bool {
    for ch in 0..c {
        for i in 0..h / s {
            for j in 0..w / s {
                let mut vals: Vec<f64> = (0..s * s)
                    .map(|q| x[(ch * h + i * s + q / s) * w + j * s + q % s])
                    .collect();
                vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if vals.len() > 1 && vals[0] - vals[1] < KINK_MARGIN {
                    return false;
                }
            }
        }
    }
    true
}

pub fn check_dense(instances: usize, rng: &mut Rng) -> LayerCheck {
    let mut rep = LayerCheck::new("dense");
    let mut done = 0;
    while done < instances {
        let act = if done % 4 == 3 {
            None
        } else {
            Some(activation_for(done))
        };
        let (n_in, n_out) = (1 + rng.below(8), 1 + rng.below(6));
        let x = Tensor::vector(rng.uniform_vec(n_in, -1.0, 1.0)).unwrap();
        let wt = Tensor::matrix(n_out, n_in, rng.uniform_vec(n_in * n_out, -1.0, 1.0)).unwrap();
        let b = Tensor::vector(rng.uniform_vec(n_out, -0.5, 0.5)).unwrap();
        if act.is_some_and(has_kink) {
            let pre: Vec<f64> = (0..n_out)
                .map(|k| b.values()[k] + (0..n_in).map(|i| wt.at(k, i) * x.values()[i]).sum::<f64>())
                .collect();
            if pre.iter().any(|t| t.abs() < KINK_MARGIN) {
                rep.redrawn += 1;
                continue;
            }
        }
        let layer = DenseLayer::new(wt.clone(), b.clone(), act).unwrap();
        let out = dense_forward(&x, &layer).unwrap();
        let r: Vec<f64> = rng.uniform_vec(out.len(), -1.0, 1.0);
        let (grads, gx) = dense_backward(&x, &layer, &Tensor::vector(r.clone()).unwrap()).unwrap();
        let mut wv = wt.values().to_vec();
        for i in 0..wv.len() {
            let n = central(&mut wv, i, |ww| {
                let l = DenseLayer::new(Tensor::matrix(n_out, n_in, ww.to_vec()).unwrap(), b.clone(), act).unwrap();
                project(&dense_forward(&x, &l).unwrap(), &r)
            });
            rep.record(grads.weights.values()[i], n);
        }
        let mut bv = b.values().to_vec();
        for i in 0..bv.len() {
            let n = central(&mut bv, i, |bb| {
                let l = DenseLayer::new(wt.clone(), Tensor::vector(bb.to_vec()).unwrap(), act).unwrap();
                project(&dense_forward(&x, &l).unwrap(), &r)
            });
            rep.record(grads.bias.values()[i], n);
        }
        let mut xv = x.values().to_vec();
        for i in 0..xv.len() {
            let n = central(&mut xv, i, |xx| {
                project(
                    &dense_forward(&Tensor::vector(xx.to_vec()).unwrap(), &layer).unwrap(),
                    &r,
                )
            });
            rep.record(gx.values()[i], n);
        }
        rep.instances += 1;
        done += 1;
    }
    rep
}

pub fn check_softmax_ce(instances: usize, rng: &mut Rng) -> LayerCheck {
    let mut rep = LayerCheck::new("softmax_ce");
    for _ in 0..instances {
        let m = 2 + rng.below(9);
        let label = rng.below(m);
        let z: Vec<f64> = rng.uniform_vec(m, -3.0, 3.0);
        let (_, g) = softmax_cross_entropy(&Tensor::vector(z.clone()).unwrap(), label).unwrap();
        let mut zv = z;
        for i in 0..m {
            let n = central(&mut zv, i, |zz| {
                softmax_cross_entropy(&Tensor::vector(zz.to_vec()).unwrap(), label)
                    .unwrap()
                    .0
            });
            rep.record(g.values()[i], n);
        }
        rep.instances += 1;
    }
    rep
}

/// All layer types, `instances` each, from one seed.
pub fn check_all(instances: usize, seed: u64) -> Vec<LayerCheck> {
    let mut rng = Rng::new(seed);
    vec![
        check_conv(instances, &mut rng),
        check_pool(instances, &mut rng),
        check_dense(instances, &mut rng),
        check_softmax_ce(instances, &mut rng),
    ]
}
