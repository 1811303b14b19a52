//! Dense tensors and the seeded random stream shared by every other module.
//!
//! All reductions run in a fixed order (row-major, left to right) so reruns
//! are bit-stable. Nothing here spawns threads.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use rand_chacha::rand_core::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Real scalar the library is generic over.
pub trait Scalar: Float + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal. Never fails for the implemented types.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense row-major array.
///
/// Public constructors reject non-finite values and shapes whose product does
/// not match the value count.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S = f64> {
    shape: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, values: Vec<S>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::dims(format!("zero-sized axis in shape {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::dims(format!(
                "shape {shape:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::dims(format!("non-finite value at flat index {i}")));
        }
        Ok(Tensor { shape, values })
    }

    /// Builds without the finiteness scan. Shape still has to match.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<S>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor { shape, values }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor::from_parts(shape.to_vec(), vec![S::zero(); n])
    }

    pub fn vector(values: Vec<S>) -> Result<Self> {
        Tensor::new(vec![values.len()], values)
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<S>) -> Result<Self> {
        Tensor::new(vec![rows, cols], values)
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dims("ragged rows"));
        }
        Tensor::matrix(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.values[i * n + i] = S::one();
        }
        t
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> S) -> Result<Self> {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(&mut f).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.values.len() {
            return Err(Error::dims(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        Ok(Tensor {
            shape,
            values: self.values,
        })
    }

    fn matrix_dims(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::dims(format!(
                "{what} must be a matrix, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    /// Element `(i, j)` of a matrix.
    pub fn at(&self, i: usize, j: usize) -> S {
        self.values[i * self.cols() + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows()).map(|i| self.at(i, j)).collect()
    }

    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.matrix_dims("transpose operand")?;
        let mut out = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                out.push(self.values[i * c + j]);
            }
        }
        Ok(Tensor::from_parts(vec![c, r], out))
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Result<Self> {
        Tensor::new(self.shape.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: S) -> Result<Self> {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::dims(format!(
                "elementwise shapes differ: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Tensor::new(self.shape.clone(), values)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<S> {
        if self.shape != other.shape {
            return Err(Error::dims(format!(
                "shapes differ: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(max_abs_diff(&self.values, &other.values))
    }
}

/// Standard matrix product `a · b`, accumulated row-major.
pub fn matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (m, k) = a.matrix_dims("left matmul operand")?;
    let (k2, l) = b.matrix_dims("right matmul operand")?;
    if k != k2 {
        return Err(Error::dims(format!(
            "matmul inner dimensions disagree: {:?} x {:?}",
            a.shape, b.shape
        )));
    }
    let mut out = vec![S::zero(); m * l];
    for i in 0..m {
        let dst = &mut out[i * l..(i + 1) * l];
        for p in 0..k {
            let aip = a.values[i * k + p];
            axpy(aip, &b.values[p * l..(p + 1) * l], dst);
        }
    }
    Tensor::new(vec![m, l], out)
}

/// `mᵀ · x` for an `N×K` matrix and an `N`-vector, the correlation of `x`
/// against every column of `m`.
pub fn matvec_t<S: Scalar>(m: &Tensor<S>, x: &[S]) -> Result<Vec<S>> {
    let (n, k) = m.matrix_dims("anchor matrix")?;
    if x.len() != n {
        return Err(Error::dims(format!(
            "vector of length {} against matrix {:?}",
            x.len(),
            m.shape
        )));
    }
    let mut out = vec![S::zero(); k];
    for (i, &xi) in x.iter().enumerate() {
        axpy(xi, &m.values[i * k..(i + 1) * k], &mut out);
    }
    Ok(out)
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `dst += alpha * src`.
#[inline]
pub(crate) fn axpy<S: Scalar>(alpha: S, src: &[S], dst: &mut [S]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

/// Largest elementwise `|a − b|` over the common length.
pub fn max_abs_diff<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).fold(S::zero(), S::max)
}

pub fn l2_norm<S: Scalar>(v: &[S]) -> Result<S> {
    if v.is_empty() {
        return Err(Error::dims("norm of an empty vector"));
    }
    Ok(dot(v, v).sqrt())
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax<S: Scalar>(v: &[S]) -> Result<usize> {
    let mut it = v.iter().enumerate();
    let (mut best, mut best_v) = match it.next() {
        Some((i, &x)) => (i, x),
        None => return Err(Error::dims("argmax of an empty vector")),
    };
    for (i, &x) in it {
        if x > best_v {
            best = i;
            best_v = x;
        }
    }
    Ok(best)
}

/// Seeded ChaCha8 stream.
///
/// The seed is expanded to a 256-bit ChaCha key by `rand_core`'s documented
/// `seed_from_u64` (PCG32 expansion). Derived draws use fixed, portable maps:
/// `uniform` takes the top 53 bits of `next_u64`, `normal` is Box–Muller on two
/// uniforms, `below` is rejection sampling on `next_u64`.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher–Yates, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn uniform_vec<S: Scalar>(&mut self, n: usize, lo: f64, hi: f64) -> Vec<S> {
        (0..n).map(|_| S::lit(self.uniform_in(lo, hi))).collect()
    }

    pub fn normal_vec<S: Scalar>(&mut self, n: usize) -> Vec<S> {
        (0..n).map(|_| S::lit(self.normal())).collect()
    }

    pub fn normal_tensor<S: Scalar>(&mut self, shape: &[usize]) -> Tensor<S> {
        let n = shape.iter().product();
        Tensor::from_parts(shape.to_vec(), self.normal_vec(n))
    }
}
