//! Randomized checks of the cascade algebra against loop oracles.

use recos::cascade::{anchor_position, compare_paths, compound, many_to_one, rectified_compound, AnchorMatrixPair};
use recos::{Activation, Rng, Tensor};

pub const TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default)]
pub struct CascadeSuite {
    pub instances: usize,
    /// (a) `Bᵀ(Aᵀx)` from loops vs `(AB)ᵀx`.
    pub collapse_max_err: f64,
    /// (b) `c_{n,l}` vs `α_nᵀ b_l`.
    pub entry_max_err: f64,
    /// (c) count of entries where `c′ ≠ max(0, c)`.
    pub rect_mismatches: usize,
    /// (d) count of P=1 many-to-one outputs not bitwise equal to one-to-one.
    pub p1_mismatches: usize,
    /// General-P many-to-one vs the loop oracle.
    pub many_max_err: f64,
    /// (e) witnesses with equal `z` but different `z″`.
    pub witnesses_ok: usize,
    pub witnesses: usize,
}

impl CascadeSuite {
    pub fn collapse_ok(&self) -> bool {
        self.collapse_max_err < TOL
    }
    pub fn entries_ok(&self) -> bool {
        self.entry_max_err < TOL
    }
    pub fn rect_ok(&self) -> bool {
        self.rect_mismatches == 0
    }
    pub fn p1_ok(&self) -> bool {
        self.p1_mismatches == 0
    }
    pub fn many_ok(&self) -> bool {
        self.many_max_err < TOL
    }
    pub fn witness_ok(&self) -> bool {
        self.witnesses > 0 && self.witnesses_ok == self.witnesses
    }
    pub fn passed(&self) -> bool {
        self.collapse_ok() && self.entries_ok() && self.rect_ok() && self.p1_ok() && self.many_ok() && self.witness_ok()
    }
}

fn mat(rng: &mut Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, rng.uniform_vec(r * c, -1.0, 1.0)).unwrap()
}

fn loop_mat_t_vec(m: &Tensor, x: &[f64]) -> Vec<f64> {
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m.at(i, j) * x[i]).sum())
        .collect()
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub fn run(instances: usize, seed: u64) -> CascadeSuite {
    let mut rng = Rng::new(seed);
    let mut s = CascadeSuite::default();
    for _ in 0..instances {
        let (n, k, l, p) = (1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(8));
        let a = mat(&mut rng, n, k);
        let b = mat(&mut rng, k, l);
        let x: Vec<f64> = rng.uniform_vec(n, -1.0, 1.0);
        let xt = Tensor::vector(x.clone()).unwrap();
        let pair = AnchorMatrixPair::one_to_one(a.clone(), b.clone()).unwrap();

        let oracle = loop_mat_t_vec(&b, &loop_mat_t_vec(&a, &x));
        let report = compare_paths(&xt, &pair, Activation::Relu).unwrap();
        for (o, z) in oracle.iter().zip(report.z.values()) {
            s.collapse_max_err = s.collapse_max_err.max((o - z).abs());
        }

        let c = compound(&pair).unwrap();
        for nn in 0..n {
            let alpha = anchor_position(&a, nn).unwrap();
            for ll in 0..l {
                let direct: f64 = (0..k).map(|kk| alpha.values.values()[kk] * b.at(kk, ll)).sum();
                s.entry_max_err = s.entry_max_err.max((c.at(nn, ll) - direct).abs());
            }
        }

        let cr = rectified_compound(&pair).unwrap();
        s.rect_mismatches += c
            .values()
            .iter()
            .zip(cr.values())
            .filter(|(&v, &r)| r != v.max(0.0))
            .count();

        let single = many_to_one(std::slice::from_ref(&xt), &a, &b, Activation::Relu).unwrap();
        let bitwise = single
            .values()
            .iter()
            .zip(report.z_dprime.values())
            .all(|(u, v)| u.to_bits() == v.to_bits());
        s.p1_mismatches += usize::from(!bitwise);

        let bp = mat(&mut rng, p * k, l);
        let xs: Vec<Tensor> = (0..p)
            .map(|_| Tensor::vector(rng.uniform_vec(n, -1.0, 1.0)).unwrap())
            .collect();
        let z = many_to_one(&xs, &a, &bp, Activation::Relu).unwrap();
        let stacked: Vec<f64> = xs
            .iter()
            .flat_map(|xi| loop_mat_t_vec(&a, xi.values()).into_iter().map(relu))
            .collect();
        let expect: Vec<f64> = loop_mat_t_vec(&bp, &stacked).into_iter().map(relu).collect();
        for (e, g) in expect.iter().zip(z.values()) {
            s.many_max_err = s.many_max_err.max((e - g).abs());
        }
        s.instances += 1;
    }

    // A = I, B = (−1, 1)ᵀ: x1 = s(−1, 0) and x2 = s(0, 1) give z = s for both,
    // but rectifying the first layer zeroes x1 entirely.
    for i in 0..instances.max(1) {
        let scale = if i == 0 { 1.0 } else { rng.uniform_in(0.1, 10.0) };
        let pair =
            AnchorMatrixPair::one_to_one(Tensor::identity(2), Tensor::matrix(2, 1, vec![-1.0, 1.0]).unwrap()).unwrap();
        let r1 = compare_paths(&Tensor::vector(vec![-scale, 0.0]).unwrap(), &pair, Activation::Relu).unwrap();
        let r2 = compare_paths(&Tensor::vector(vec![0.0, scale]).unwrap(), &pair, Activation::Relu).unwrap();
        let same_z = r1.z.values() == r2.z.values();
        let differ = r1.z_dprime.values()[0] == 0.0 && r2.z_dprime.values()[0] == scale;
        s.witnesses += 1;
        s.witnesses_ok += usize::from(same_z && differ);
    }
    s
}
