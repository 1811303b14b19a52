//! Algebra of two cascaded RECOS layers.
//!
//! With anchor matrices `A ∈ R^{N×K}` and `B ∈ R^{K×L}`, the unrectified
//! cascade is `z = Bᵀ Aᵀ x = Cᵀ x` for the compound `C = AB`, whose entry
//! `c_{n,l}` is the dot product of row `n` of `A` (its anchor-position vector)
//! with column `l` of `B`. Rectifying `C` elementwise gives `C′`, and running
//! both layers with their own rectification gives `z″`. In many-to-one mode `P`
//! first-layer units share `A` and `B` has `P·K` rows, one `K`-block per unit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{matmul, matvec_t, max_abs_diff, Scalar, Tensor};
use crate::recos::{recos_forward, Activation, AnchorSet, InputVector};

/// Elements of the three outputs agreeing within this are counted as equal.
pub const AGREEMENT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CascadeMode {
    OneToOne,
    ManyToOne(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorMatrixPair<S = f64> {
    a: Tensor<S>,
    b: Tensor<S>,
    mode: CascadeMode,
}

impl<S: Scalar> AnchorMatrixPair<S> {
    pub fn one_to_one(a: Tensor<S>, b: Tensor<S>) -> Result<Self> {
        let (_, k) = dims(&a, "A")?;
        let (kb, _) = dims(&b, "B")?;
        if k != kb {
            return Err(Error::dims(format!("A has {k} anchors but B has {kb} rows")));
        }
        Ok(AnchorMatrixPair {
            a,
            b,
            mode: CascadeMode::OneToOne,
        })
    }

    pub fn many_to_one(a: Tensor<S>, b: Tensor<S>, p: usize) -> Result<Self> {
        let (_, k) = dims(&a, "A")?;
        let (rows, _) = dims(&b, "B")?;
        if p == 0 || rows != p * k {
            return Err(Error::dims(format!("B has {rows} rows, expected P·K = {p}·{k}")));
        }
        Ok(AnchorMatrixPair {
            a,
            b,
            mode: CascadeMode::ManyToOne(p),
        })
    }

    pub fn a(&self) -> &Tensor<S> {
        &self.a
    }

    pub fn b(&self) -> &Tensor<S> {
        &self.b
    }

    pub fn mode(&self) -> CascadeMode {
        self.mode
    }

    /// Block `p` of a many-to-one `B` (rows `p·K .. (p+1)·K`), as a
    /// one-to-one pair with `A`.
    pub fn block(&self, p: usize) -> Result<AnchorMatrixPair<S>> {
        let CascadeMode::ManyToOne(count) = self.mode else {
            return Err(Error::Mode("block() needs a many-to-one pair".into()));
        };
        if p >= count {
            return Err(Error::Range {
                index: p,
                valid: format!("0..{count}"),
            });
        }
        let k = self.a.cols();
        let l = self.b.cols();
        let rows = self.b.values()[p * k * l..(p + 1) * k * l].to_vec();
        AnchorMatrixPair::one_to_one(self.a.clone(), Tensor::matrix(k, l, rows)?)
    }

    fn require_one_to_one(&self) -> Result<()> {
        match self.mode {
            CascadeMode::OneToOne => Ok(()),
            CascadeMode::ManyToOne(p) => Err(Error::Mode(format!(
                "operation needs a one-to-one pair, got many-to-one with P={p}"
            ))),
        }
    }
}

fn dims<S: Scalar>(t: &Tensor<S>, name: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [r, c] => Ok((r, c)),
        ref s => Err(Error::dims(format!("{name} must be a matrix, got {s:?}"))),
    }
}

/// `C = A·B`.
pub fn compound<S: Scalar>(pair: &AnchorMatrixPair<S>) -> Result<Tensor<S>> {
    pair.require_one_to_one()?;
    matmul(&pair.a, &pair.b)
}

/// `C′ = max(0, A·B)` elementwise.
pub fn rectified_compound<S: Scalar>(pair: &AnchorMatrixPair<S>) -> Result<Tensor<S>> {
    compound(pair)?.map(|c| c.max(S::zero()))
}

/// Row `n` of `A`, i.e. `Aᵀ e_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorPositionVector<S = f64> {
    pub index: usize,
    pub values: Tensor<S>,
}

pub fn anchor_position<S: Scalar>(a: &Tensor<S>, n: usize) -> Result<AnchorPositionVector<S>> {
    let (rows, _) = dims(a, "A")?;
    if n >= rows {
        return Err(Error::Range {
            index: n,
            valid: format!("0..{rows}"),
        });
    }
    Ok(AnchorPositionVector {
        index: n,
        values: Tensor::vector(a.row(n).to_vec())?,
    })
}

fn anchors_of<S: Scalar>(m: &Tensor<S>) -> Result<AnchorSet<S>> {
    AnchorSet::new(m.clone(), false)
}

fn plain<S: Scalar>(v: Vec<S>) -> Result<InputVector<S>> {
    Ok(InputVector::plain(Tensor::vector(v)?))
}

/// `y_p = act(Aᵀ x_p)`, `ỹ = (y_1, …, y_P)`, `z = act(Bᵀ ỹ)`.
pub fn many_to_one<S: Scalar>(xs: &[Tensor<S>], a: &Tensor<S>, b: &Tensor<S>, act: Activation) -> Result<Tensor<S>> {
    if xs.is_empty() {
        return Err(Error::dims("many-to-one cascade needs P ≥ 1 inputs"));
    }
    let pair = AnchorMatrixPair::many_to_one(a.clone(), b.clone(), xs.len())?;
    let first = anchors_of(&pair.a)?;
    let mut stacked = Vec::with_capacity(b.rows());
    for x in xs {
        let y = recos_forward(&InputVector::plain(x.clone()), &first, act)?;
        stacked.extend_from_slice(y.values());
    }
    recos_forward(&plain(stacked)?, &anchors_of(&pair.b)?, act)
}

/// `z = act(Dᵀ x)` for a single anchor matrix `D ∈ R^{N×L}`.
pub fn one_layer_reference<S: Scalar>(d: &Tensor<S>, x: &Tensor<S>, act: Activation) -> Result<Tensor<S>> {
    recos_forward(&InputVector::plain(x.clone()), &anchors_of(d)?, act)
}

/// The three cascade outputs side by side.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeReport<S = f64> {
    /// `Cᵀ x`, no rectification.
    pub z: Tensor<S>,
    /// `C′ᵀ x`, rectified compound.
    pub z_prime: Tensor<S>,
    /// `act(Bᵀ act(Aᵀ x))`, rectification at both layers.
    pub z_dprime: Tensor<S>,
    pub agreement_mask: Vec<bool>,
}

impl<S: Scalar> CascadeReport<S> {
    pub fn agreement_fraction(&self) -> f64 {
        if self.agreement_mask.is_empty() {
            return 0.0;
        }
        self.agreement_mask.iter().filter(|&&m| m).count() as f64 / self.agreement_mask.len() as f64
    }
}

fn agreement<S: Scalar>(z: &[S], zp: &[S], zpp: &[S]) -> Vec<bool> {
    let tol = S::lit(AGREEMENT_TOL);
    z.iter()
        .zip(zp)
        .zip(zpp)
        .map(|((&a, &b), &c)| (a - b).abs() <= tol && (b - c).abs() <= tol && (a - c).abs() <= tol)
        .collect()
}

pub fn compare_paths<S: Scalar>(
    x: &Tensor<S>,
    pair: &AnchorMatrixPair<S>,
    act: Activation,
) -> Result<CascadeReport<S>> {
    let c = compound(pair)?;
    let c_rect = c.map(|v| v.max(S::zero()))?;
    let z = matvec_t(&c, x.values())?;
    let z_prime = matvec_t(&c_rect, x.values())?;
    let y = recos_forward(&InputVector::plain(x.clone()), &anchors_of(&pair.a)?, act)?;
    let z_dprime = recos_forward(&InputVector::plain(y), &anchors_of(&pair.b)?, act)?;
    let mask = agreement(&z, &z_prime, z_dprime.values());
    Ok(CascadeReport {
        z: Tensor::vector(z)?,
        z_prime: Tensor::vector(z_prime)?,
        z_dprime,
        agreement_mask: mask,
    })
}

/// Many-to-one counterpart of [`compare_paths`]: `z = Σ_p C_pᵀ x_p`,
/// `z′ = Σ_p C′_pᵀ x_p` with `C_p = A·B_p`, and `z″` from [`many_to_one`].
pub fn compare_paths_many_to_one<S: Scalar>(
    xs: &[Tensor<S>],
    pair: &AnchorMatrixPair<S>,
    act: Activation,
) -> Result<CascadeReport<S>> {
    let CascadeMode::ManyToOne(p) = pair.mode else {
        return compare_paths(xs.first().ok_or_else(|| Error::dims("no inputs"))?, pair, act);
    };
    if xs.len() != p {
        return Err(Error::dims(format!("{} inputs for a P={p} cascade", xs.len())));
    }
    let l = pair.b.cols();
    let mut z = vec![S::zero(); l];
    let mut zp = vec![S::zero(); l];
    for (i, x) in xs.iter().enumerate() {
        let c = compound(&pair.block(i)?)?;
        let zi = matvec_t(&c, x.values())?;
        let zpi = matvec_t(&c.map(|v| v.max(S::zero()))?, x.values())?;
        for j in 0..l {
            z[j] += zi[j];
            zp[j] += zpi[j];
        }
    }
    let zpp = many_to_one(xs, &pair.a, &pair.b, act)?;
    let mask = agreement(&z, &zp, zpp.values());
    Ok(CascadeReport {
        z: Tensor::vector(z)?,
        z_prime: Tensor::vector(zp)?,
        z_dprime: zpp,
        agreement_mask: mask,
    })
}

/// Checks `Bᵀ(Aᵀx) == (AB)ᵀx`; returns the max absolute deviation.
pub fn linear_collapse_error<S: Scalar>(x: &Tensor<S>, pair: &AnchorMatrixPair<S>) -> Result<S> {
    let y = matvec_t(&pair.a, x.values())?;
    let two_step = matvec_t(&pair.b, &y)?;
    let one_step = matvec_t(&compound(pair)?, x.values())?;
    Ok(max_abs_diff(&two_step, &one_step))
}

/// Plain-text matrix dump: one row per line, values space-separated with 17
/// significant digits.
pub fn format_matrix<S: Scalar>(m: &Tensor<S>) -> String {
    let (rows, cols) = (m.rows(), m.cols());
    let mut out = String::with_capacity(rows * cols * 25);
    for i in 0..rows {
        for j in 0..cols {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.16e}", m.values()[i * cols + j].as_f64());
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<Tensor<f64>> {
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Data(format!("bad number {t:?}"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor::from_rows(&rows)
}

pub fn write_matrix<S: Scalar>(path: &Path, m: &Tensor<S>) -> Result<()> {
    fs::write(path, format_matrix(m)).map_err(|e| Error::io(path, e))
}
