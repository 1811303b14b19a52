//! A single RECOS unit: inputs and anchors on a (translated) unit sphere,
//! correlated and rectified.
//!
//! An anchor set stores its anchors as the columns of an `N×K` matrix, the
//! layout used by the cascade analysis as well. Augmentation prepends one
//! element at index 0: the patch mean for inputs, the negated coordinate sum
//! for anchors. The augmented dot product then equals the mean-removed
//! correlation `aᵀ(x − μ1)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{dot, l2_norm, Scalar, Tensor};

pub const DEFAULT_LEAK_SLOPE: f64 = 0.01;

const UNIT_TOL: f64 = 1e-12;

/// Clipping nonlinearity applied to a correlation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    Sigmoid,
    LeakyRelu { slope: f64 },
}

impl Activation {
    pub fn leaky_relu(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::Config(format!("leak slope must lie in (0, 1), got {slope}")));
        }
        Ok(Activation::LeakyRelu { slope })
    }

    #[inline]
    pub fn apply<S: Scalar>(self, t: S) -> S {
        match self {
            Activation::Relu => t.max(S::zero()),
            Activation::Sigmoid => S::one() / (S::one() + (-t).exp()),
            Activation::LeakyRelu { slope } => {
                if t >= S::zero() {
                    t
                } else {
                    S::lit(slope) * t
                }
            }
        }
    }

    /// Derivative expressed through the activation's output. For relu the
    /// subgradient at a zero output is 0.
    #[inline]
    pub fn derivative_from_output<S: Scalar>(self, y: S) -> S {
        match self {
            Activation::Relu => {
                if y > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Sigmoid => y * (S::one() - y),
            Activation::LeakyRelu { slope } => {
                if y >= S::zero() {
                    S::one()
                } else {
                    S::lit(slope)
                }
            }
        }
    }

    /// Stable numeric code used in checkpoints.
    pub fn code(self) -> u32 {
        match self {
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::LeakyRelu { .. } => 3,
        }
    }

    pub fn slope(self) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => slope,
            _ => 0.0,
        }
    }

    pub fn from_code(code: u32, slope: f64) -> Result<Self> {
        match code {
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Sigmoid),
            3 => Activation::leaky_relu(slope),
            _ => Err(Error::Config(format!("unknown activation code {code}"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Sigmoid => write!(f, "sigmoid"),
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu:{slope}"),
        }
    }
}

/// Accepts `relu`, `sigmoid`, `leaky_relu` and `leaky_relu:<slope>`.
impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "leaky_relu" => Activation::leaky_relu(DEFAULT_LEAK_SLOPE),
            other => match other.strip_prefix("leaky_relu:") {
                Some(slope) => {
                    let slope = slope
                        .parse()
                        .map_err(|_| Error::Config(format!("bad leak slope {slope:?}")))?;
                    Activation::leaky_relu(slope)
                }
                None => Err(Error::Config(format!("unknown activation {other:?}"))),
            },
        }
    }
}

pub fn rectify<S: Scalar>(t: S, act: Activation) -> S {
    act.apply(t)
}

/// An input vector tagged with its augmentation state.
#[derive(Clone, Debug, PartialEq)]
pub struct InputVector<S = f64> {
    values: Tensor<S>,
    augmented: bool,
}

impl<S: Scalar> InputVector<S> {
    pub fn plain(values: Tensor<S>) -> Self {
        InputVector {
            values,
            augmented: false,
        }
    }

    pub fn values(&self) -> &[S] {
        self.values.values()
    }

    pub fn tensor(&self) -> &Tensor<S> {
        &self.values
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn scaled(&self, c: S) -> Result<Self> {
        Ok(InputVector {
            values: self.values.scale(c)?,
            augmented: self.augmented,
        })
    }
}

/// `(μ, x_1, …, x_N)` with `μ` the mean of `x`.
pub fn augment_input<S: Scalar>(x: &Tensor<S>) -> Result<InputVector<S>> {
    let v = x.values();
    if v.is_empty() {
        return Err(Error::dims("cannot augment an empty input"));
    }
    let mean = v.iter().copied().sum::<S>() / S::lit(v.len() as f64);
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push(mean);
    out.extend_from_slice(v);
    Ok(InputVector {
        values: Tensor::vector(out)?,
        augmented: true,
    })
}

/// `(a_0, a_1, …, a_N)` with `a_0 = −Σ a_n`.
pub fn augment_anchor<S: Scalar>(a: &Tensor<S>) -> Result<Tensor<S>> {
    let v = a.values();
    if v.is_empty() {
        return Err(Error::dims("cannot augment an empty anchor"));
    }
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push(-v.iter().copied().sum::<S>());
    out.extend_from_slice(v);
    Tensor::vector(out)
}

/// Splits `v` into its direction and length.
pub fn normalize<S: Scalar>(v: &Tensor<S>) -> Result<(Tensor<S>, S)> {
    let n = l2_norm(v.values())?;
    if n == S::zero() {
        return Err(Error::Normalization);
    }
    Ok((v.map(|x| x / n)?, n))
}

/// Angle between two nonzero vectors in degrees, in `[0, 180]`.
pub fn geodesic_angle<S: Scalar>(xi: &Tensor<S>, xj: &Tensor<S>) -> Result<S> {
    if xi.len() != xj.len() {
        return Err(Error::dims(format!(
            "angle between vectors of length {} and {}",
            xi.len(),
            xj.len()
        )));
    }
    let (ui, _) = normalize(xi).map_err(|_| Error::UndefinedAngle("zero vector"))?;
    let (uj, _) = normalize(xj).map_err(|_| Error::UndefinedAngle("zero vector"))?;
    let c = dot(ui.values(), uj.values()).max(-S::one()).min(S::one());
    Ok(c.acos().to_degrees())
}

/// `K` anchors of dimension `N`, stored as the columns of an `N×K` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorSet<S = f64> {
    vectors: Tensor<S>,
    augmented: bool,
    normalized: bool,
    norms: Vec<S>,
}

impl<S: Scalar> AnchorSet<S> {
    /// Raw anchors, taken as-is. `norms` are all 1.
    pub fn new(vectors: Tensor<S>, augmented: bool) -> Result<Self> {
        let k = match vectors.shape() {
            [_, k] => *k,
            s => return Err(Error::dims(format!("anchor matrix must be N×K, got {s:?}"))),
        };
        let set = AnchorSet {
            vectors,
            augmented,
            normalized: false,
            norms: vec![S::one(); k],
        };
        set.check_augmentation()?;
        Ok(set)
    }

    pub fn from_columns(columns: &[Tensor<S>], augmented: bool) -> Result<Self> {
        let n = columns
            .first()
            .map(Tensor::len)
            .ok_or_else(|| Error::dims("anchor set needs at least one anchor"))?;
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::dims("anchors of different lengths"));
        }
        let k = columns.len();
        let mut m = vec![S::zero(); n * k];
        for (j, c) in columns.iter().enumerate() {
            for (i, &v) in c.values().iter().enumerate() {
                m[i * k + j] = v;
            }
        }
        AnchorSet::new(Tensor::matrix(n, k, m)?, augmented)
    }

    /// Normalizes every column to unit length and records the original norms.
    pub fn normalized(raw: &AnchorSet<S>) -> Result<Self> {
        let k = raw.count();
        let mut cols = Vec::with_capacity(k);
        let mut norms = Vec::with_capacity(k);
        for j in 0..k {
            let (unit, n) = normalize(&raw.anchor(j))?;
            cols.push(unit);
            norms.push(n * raw.norms[j]);
        }
        let mut set = AnchorSet::from_columns(&cols, false)?;
        set.augmented = raw.augmented;
        set.normalized = true;
        set.norms = norms;
        Ok(set)
    }

    /// Augments every anchor with its negated coordinate sum.
    pub fn augmented(&self) -> Result<Self> {
        if self.augmented {
            return Err(Error::Mode("anchor set is already augmented".into()));
        }
        let cols = (0..self.count())
            .map(|j| augment_anchor(&self.anchor(j)))
            .collect::<Result<Vec<_>>>()?;
        AnchorSet::from_columns(&cols, true)
    }

    fn check_augmentation(&self) -> Result<()> {
        if !self.augmented {
            return Ok(());
        }
        for j in 0..self.count() {
            let col = self.vectors.column(j);
            let rest: S = col[1..].iter().copied().sum();
            if (col[0] + rest).abs() > S::lit(UNIT_TOL) * (S::one() + rest.abs()) {
                return Err(Error::dims(format!(
                    "augmented anchor {j}: leading element {} is not -{}",
                    col[0], rest
                )));
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> &Tensor<S> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    pub fn count(&self) -> usize {
        self.vectors.cols()
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norms(&self) -> &[S] {
        &self.norms
    }

    pub fn anchor(&self, k: usize) -> Tensor<S> {
        Tensor::from_parts(vec![self.dim()], self.vectors.column(k))
    }

    pub fn negated(&self) -> Result<Self> {
        let mut out = self.clone();
        out.vectors = self.vectors.map(|v| -v)?;
        Ok(out)
    }

    fn check_input(&self, x: &InputVector<S>) -> Result<()> {
        if x.augmented != self.augmented || x.values.len() != self.dim() {
            let tag = |aug: bool| if aug { "augmented" } else { "plain" };
            return Err(Error::dims(format!(
                "expected {} input of length {}, got {} input of length {}",
                tag(self.augmented),
                self.dim(),
                tag(x.augmented),
                x.values.len()
            )));
        }
        Ok(())
    }
}

/// `y_k = act(a_kᵀ x)` for every anchor.
pub fn recos_forward<S: Scalar>(x: &InputVector<S>, anchors: &AnchorSet<S>, act: Activation) -> Result<Tensor<S>> {
    anchors.check_input(x)?;
    let y = crate::numerics::matvec_t(&anchors.vectors, x.values())?;
    Tensor::vector(y.into_iter().map(|t| act.apply(t)).collect())
}

/// Output for inputs and anchors off the unit sphere:
/// `y_k = ‖x‖·‖a_k‖·act(a'_kᵀ x')` with primes denoting unit directions.
///
/// A pre-normalized anchor set contributes its stored norms; a raw set is
/// normalized column by column.
pub fn recos_forward_general<S: Scalar>(
    x_raw: &InputVector<S>,
    anchors_raw: &AnchorSet<S>,
    act: Activation,
) -> Result<Tensor<S>> {
    anchors_raw.check_input(x_raw)?;
    let (x_unit, x_norm) = normalize(&x_raw.values)?;
    let mut out = Vec::with_capacity(anchors_raw.count());
    for k in 0..anchors_raw.count() {
        let (a_unit, a_norm) = if anchors_raw.normalized {
            (anchors_raw.anchor(k), anchors_raw.norms[k])
        } else {
            normalize(&anchors_raw.anchor(k))?
        };
        out.push(x_norm * a_norm * act.apply(dot(a_unit.values(), x_unit.values())));
    }
    Tensor::vector(out)
}
