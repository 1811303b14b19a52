use std::fmt;
use std::path::Path;

use super::spec::{LeNetSpec, RowPlan};
use crate::container::{read_sidecar, Container};
use crate::error::{Error, Result};
use crate::layers::{
    loss_raw, softmax_cross_entropy, ConvLayer, DenseLayer, GradientBundle, Layer, PoolKind, PoolLayer, Shape3,
};
use crate::numerics::{Rng, Scalar, Tensor};
use crate::recos::Activation;

/// Checkpoint format revision written to the metadata sidecar.
pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkMeta {
    pub seed: u64,
    pub epoch: usize,
    /// `none`, or the transforms applied since training, joined by `+`.
    pub transform: String,
    pub activation: Activation,
    pub pooling: PoolKind,
}

impl NetworkMeta {
    pub(crate) fn push_transform(&mut self, tag: &str) {
        self.transform = match self.transform.as_str() {
            "none" => tag.to_owned(),
            t if t == tag => "none".to_owned(),
            t => match t.strip_suffix(tag).and_then(|r| r.strip_suffix('+')) {
                Some(rest) => rest.to_owned(),
                None => format!("{t}+{tag}"),
            },
        };
    }

    fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("format".into(), CHECKPOINT_FORMAT.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("epoch".into(), self.epoch.to_string()),
            ("transform".into(), self.transform.clone()),
            ("activation".into(), self.activation.to_string()),
            ("pooling".into(), self.pooling.to_string()),
        ]
    }
}

/// A feed-forward stack over `1×H×W` images ending in class logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<S = f64> {
    layers: Vec<Layer<S>>,
    /// `shapes[i]` is the input of layer `i`; the last entry is the output.
    shapes: Vec<Shape3>,
    pub meta: NetworkMeta,
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub pooling: PoolKind,
    pub activation: Activation,
    /// Evaluate sequentially instead of on the thread pool. Results are the
    /// same either way.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            momentum: 0.9,
            batch: 32,
            epochs: 10,
            seed: 1,
            pooling: PoolKind::Average,
            activation: Activation::Relu,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be positive".into()));
        }
        Ok(())
    }
}

/// Realizes `spec` with uniform `±√(6/fan_in)` weights and zero biases, drawn
/// layer by layer from `rng`. The output layer has no activation.
pub fn build_lenet<S: Scalar>(spec: &LeNetSpec, cfg: &TrainConfig, rng: &mut Rng) -> Result<Network<S>> {
    cfg.validate()?;
    let plans = spec.plan()?;
    let last = plans.len() - 1;
    let mut layers = Vec::new();
    for (i, ((row, plan), &pool)) in spec.arch.rows.iter().zip(&plans).zip(&spec.pool_after).enumerate() {
        let fan_in = row.window_len();
        let bound = (6.0 / fan_in as f64).sqrt();
        let weights: Vec<S> = rng.uniform_vec(row.anchors * fan_in, -bound, bound);
        let bias = Tensor::zeros(&[row.anchors]);
        match plan {
            RowPlan::Conv { .. } => {
                let w = Tensor::new(vec![row.anchors, row.channels, row.window, row.window], weights)?;
                layers.push(Layer::Conv(ConvLayer::new(w, bias, 1, cfg.activation)?));
            }
            RowPlan::Dense { .. } => {
                let w = Tensor::matrix(row.anchors, fan_in, weights)?;
                let act = (i != last).then_some(cfg.activation);
                layers.push(Layer::Dense(DenseLayer::new(w, bias, act)?));
            }
        }
        if pool > 1 {
            layers.push(Layer::Pool(PoolLayer::new(cfg.pooling, pool)?));
        }
    }
    let meta = NetworkMeta {
        seed: rng.seed(),
        epoch: 0,
        transform: "none".into(),
        activation: cfg.activation,
        pooling: cfg.pooling,
    };
    Network::new(layers, [1, spec.input_side, spec.input_side], meta)
}

impl<S: Scalar> Network<S> {
    pub fn new(layers: Vec<Layer<S>>, input: Shape3, meta: NetworkMeta) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Structure("network has no layers".into()));
        }
        let mut shapes = vec![input];
        for (i, l) in layers.iter().enumerate() {
            let next = l
                .output_shape(*shapes.last().expect("non-empty"))
                .map_err(|e| Error::Structure(format!("layer {i}: {e}")))?;
            shapes.push(next);
        }
        Ok(Network { layers, shapes, meta })
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<S>] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> Shape3 {
        self.shapes[0]
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().expect("non-empty").iter().product()
    }

    /// Input shape of each layer followed by the output shape.
    pub fn shapes(&self) -> &[Shape3] {
        &self.shapes
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// `(N, K)` for every parameterized layer: anchor length and anchor count.
    pub fn recos_dims(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv(c) => {
                    let (k, ch, h, w) = c.kernel_dims();
                    Some((ch * h * w, k))
                }
                Layer::Dense(d) => Some((d.inputs(), d.outputs())),
                Layer::Pool(_) => None,
            })
            .collect()
    }

    /// Layer positions of the convolutional layers, in order.
    pub fn conv_positions(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| matches!(self.layers[i], Layer::Conv(_)))
            .collect()
    }

    fn check_input(&self, image: &[S]) -> Result<()> {
        let n: usize = self.shapes[0].iter().product();
        if image.len() != n {
            return Err(Error::dims(format!(
                "network expects {:?} ({n} values), got {}",
                self.shapes[0],
                image.len()
            )));
        }
        Ok(())
    }

    /// Outputs of every layer, starting with the input itself.
    pub fn trace(&self, image: &[S]) -> Result<Vec<Vec<S>>> {
        self.check_input(image)?;
        let mut ws = Workspace::for_network(self);
        ws.acts[0].copy_from_slice(image);
        self.forward_ws(&mut ws, self.layers.len());
        Ok(ws.acts)
    }

    /// Output of layer `upto - 1` (the first `upto` layers applied).
    pub fn forward_prefix(&self, image: &[S], upto: usize) -> Result<Tensor<S>> {
        if upto == 0 || upto > self.layers.len() {
            return Err(Error::Range {
                index: upto,
                valid: format!("1..={}", self.layers.len()),
            });
        }
        self.check_input(image)?;
        let mut ws = Workspace::for_network(self);
        ws.acts[0].copy_from_slice(image);
        self.forward_ws(&mut ws, upto);
        Tensor::new(self.shapes[upto].to_vec(), std::mem::take(&mut ws.acts[upto]))
    }

    pub fn logits(&self, image: &[S]) -> Result<Vec<S>> {
        self.check_input(image)?;
        let mut ws = Workspace::for_network(self);
        Ok(self.logits_ws(image, &mut ws).to_vec())
    }

    pub fn forward(&self, image: &Tensor<S>) -> Result<Tensor<S>> {
        if image.shape() != self.shapes[0] {
            return Err(Error::dims(format!(
                "network expects {:?}, got {:?}",
                self.shapes[0],
                image.shape()
            )));
        }
        Tensor::vector(self.logits(image.values())?)
    }

    pub(crate) fn logits_ws<'a>(&self, image: &[S], ws: &'a mut Workspace<S>) -> &'a [S] {
        ws.acts[0].copy_from_slice(image);
        self.forward_ws(ws, self.layers.len());
        ws.acts.last().expect("non-empty")
    }

    fn forward_ws(&self, ws: &mut Workspace<S>, upto: usize) {
        for i in 0..upto {
            let (prev, next) = ws.acts.split_at_mut(i + 1);
            self.layers[i].forward_raw(&prev[i], self.shapes[i], &mut next[0]);
        }
    }

    /// Adds this sample's parameter gradients into `grads` and returns its loss.
    pub(crate) fn accumulate_gradient(
        &self,
        image: &[S],
        label: usize,
        ws: &mut Workspace<S>,
        grads: &mut GradientBundle<S>,
    ) -> Result<S> {
        let n = self.layers.len();
        ws.acts[0].copy_from_slice(image);
        self.forward_ws(ws, n);
        let loss = loss_raw(&ws.acts[n], label, &mut ws.grads[n])?;
        for i in (0..n).rev() {
            let (lower, upper) = ws.grads.split_at_mut(i + 1);
            let input_grad = (i > 0).then(|| &mut lower[i][..]);
            self.layers[i].backward_raw(
                &ws.acts[i],
                self.shapes[i],
                &ws.acts[i + 1],
                &upper[0],
                grads.layer_mut(i),
                input_grad,
            );
        }
        Ok(loss)
    }

    /// Loss and full gradient bundle for one labelled image.
    pub fn loss_and_gradients(&self, image: &Tensor<S>, label: usize) -> Result<(S, GradientBundle<S>)> {
        self.check_input(image.values())?;
        let mut ws = Workspace::for_network(self);
        let mut grads = GradientBundle::zeros_for(&self.layers);
        let loss = self.accumulate_gradient(image.values(), label, &mut ws, &mut grads)?;
        Ok((loss, grads))
    }

    /// Loss alone; pairs with [`Network::loss_and_gradients`] for checks.
    pub fn loss(&self, image: &Tensor<S>, label: usize) -> Result<S> {
        Ok(softmax_cross_entropy(&self.forward(image)?, label)?.0)
    }

    /// Mutable access to layer `i`'s `(weights, bias)` values.
    pub fn params_mut(&mut self, i: usize) -> Option<(&mut [S], &mut [S])> {
        self.layers.get_mut(i)?.params_mut()
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::default();
        c.push(
            "input_shape",
            vec![3],
            self.shapes[0].iter().map(|&d| d as f64).collect(),
        );
        let f = |t: &Tensor<S>| t.values().iter().map(|v| v.as_f64()).collect::<Vec<_>>();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(l) => {
                    c.push(format!("{i}.conv.weight"), l.weights().shape().to_vec(), f(l.weights()));
                    c.push(format!("{i}.conv.bias"), l.bias().shape().to_vec(), f(l.bias()));
                    let a = l.activation();
                    c.push(
                        format!("{i}.conv.config"),
                        vec![3],
                        vec![l.stride() as f64, a.code() as f64, a.slope()],
                    );
                }
                Layer::Pool(l) => {
                    c.push(
                        format!("{i}.pool.config"),
                        vec![2],
                        vec![l.kind().code() as f64, l.window() as f64],
                    );
                }
                Layer::Dense(l) => {
                    c.push(
                        format!("{i}.dense.weight"),
                        l.weights().shape().to_vec(),
                        f(l.weights()),
                    );
                    c.push(format!("{i}.dense.bias"), l.bias().shape().to_vec(), f(l.bias()));
                    let (code, slope) = l.activation().map_or((0, 0.0), |a| (a.code(), a.slope()));
                    c.push(format!("{i}.dense.config"), vec![2], vec![code as f64, slope]);
                }
            }
        }
        c
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().write(path, &self.meta.to_pairs())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::read(path)?;
        let meta = read_sidecar(path)?;
        Network::from_container(&c, &meta, path)
    }

    pub fn from_container(c: &Container, meta: &[(String, String)], path: &Path) -> Result<Self> {
        let fmt_err = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let entry = |name: &str| c.get(name).ok_or_else(|| fmt_err(format!("no {name} entry")));
        let tensor = |name: &str| -> Result<Tensor<S>> {
            let e = entry(name)?;
            Tensor::new(e.shape.clone(), e.values.iter().map(|&v| S::lit(v)).collect())
                .map_err(|err| fmt_err(format!("{name}: {err}")))
        };
        let code = |v: f64| -> Result<u32> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(fmt_err(format!("bad integer field {v}")))
            }
        };

        let input = entry("input_shape")?;
        let input: Shape3 = match input.values[..] {
            [a, b, d] => [code(a)? as usize, code(b)? as usize, code(d)? as usize],
            _ => return Err(fmt_err("input_shape must have 3 values".into())),
        };
        let mut layers = Vec::new();
        for i in 0.. {
            let layer = if let Some(cfg) = c.get(&format!("{i}.conv.config")) {
                let [stride, act, slope] = cfg.values[..] else {
                    return Err(fmt_err(format!("{i}.conv.config must have 3 values")));
                };
                Layer::Conv(ConvLayer::new(
                    tensor(&format!("{i}.conv.weight"))?,
                    tensor(&format!("{i}.conv.bias"))?,
                    code(stride)? as usize,
                    Activation::from_code(code(act)?, slope)?,
                )?)
            } else if let Some(cfg) = c.get(&format!("{i}.pool.config")) {
                let [kind, window] = cfg.values[..] else {
                    return Err(fmt_err(format!("{i}.pool.config must have 2 values")));
                };
                Layer::Pool(PoolLayer::new(
                    PoolKind::from_code(code(kind)?)?,
                    code(window)? as usize,
                )?)
            } else if let Some(cfg) = c.get(&format!("{i}.dense.config")) {
                let [act, slope] = cfg.values[..] else {
                    return Err(fmt_err(format!("{i}.dense.config must have 2 values")));
                };
                let act = match code(act)? {
                    0 => None,
                    a => Some(Activation::from_code(a, slope)?),
                };
                Layer::Dense(DenseLayer::new(
                    tensor(&format!("{i}.dense.weight"))?,
                    tensor(&format!("{i}.dense.bias"))?,
                    act,
                )?)
            } else {
                break;
            };
            layers.push(layer);
        }
        let get = |k: &str| meta.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let parse_u64 = |k: &str| -> Result<u64> {
            get(k)
                .ok_or_else(|| fmt_err(format!("metadata lacks {k}")))?
                .parse()
                .map_err(|_| fmt_err(format!("metadata {k} is not an integer")))
        };
        let meta = NetworkMeta {
            seed: parse_u64("seed")?,
            epoch: parse_u64("epoch")? as usize,
            transform: get("transform").unwrap_or("none").to_owned(),
            activation: get("activation")
                .ok_or_else(|| fmt_err("metadata lacks activation".into()))?
                .parse()?,
            pooling: get("pooling")
                .ok_or_else(|| fmt_err("metadata lacks pooling".into()))?
                .parse()?,
        };
        Network::new(layers, input, meta)
    }
}

impl<S: Scalar> fmt::Display for Network<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.layers.iter().enumerate() {
            let kind = match l {
                Layer::Conv(c) => {
                    let (k, ch, h, w) = c.kernel_dims();
                    format!("conv {k}@{ch}×{h}×{w} {}", c.activation())
                }
                Layer::Pool(p) => format!("{} pool {}", p.kind(), p.window()),
                Layer::Dense(d) => format!(
                    "dense {}→{} {}",
                    d.inputs(),
                    d.outputs(),
                    d.activation().map_or("linear".to_string(), |a| a.to_string())
                ),
            };
            writeln!(f, "{i}: {kind} {:?} → {:?}", self.shapes[i], self.shapes[i + 1])?;
        }
        write!(f, "parameters: {}", self.param_count())
    }
}

/// Per-layer activation and gradient buffers, reused across samples.
pub(crate) struct Workspace<S> {
    acts: Vec<Vec<S>>,
    grads: Vec<Vec<S>>,
}

impl<S: Scalar> Workspace<S> {
    pub(crate) fn for_network(net: &Network<S>) -> Self {
        let bufs: Vec<Vec<S>> = net.shapes.iter().map(|s| vec![S::zero(); s.iter().product()]).collect();
        Workspace {
            grads: bufs.clone(),
            acts: bufs,
        }
    }
}
