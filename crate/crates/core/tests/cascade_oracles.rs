mod support;

use recos::cascade::{compare_paths_many_to_one, linear_collapse_error, AnchorMatrixPair};
use recos::{Activation, Rng, Tensor};

#[test]
fn thousand_random_instances() {
    let s = support::cascade_suite::run(1000, 2024);
    assert_eq!(s.instances, 1000);
    assert!(s.collapse_ok(), "collapse error {:e}", s.collapse_max_err);
    assert!(s.entries_ok(), "entry error {:e}", s.entry_max_err);
    assert!(s.rect_ok(), "{} rectification mismatches", s.rect_mismatches);
    assert!(s.p1_ok(), "{} P=1 mismatches", s.p1_mismatches);
    assert!(s.many_ok(), "many-to-one error {:e}", s.many_max_err);
    assert!(s.witness_ok(), "{}/{} witnesses", s.witnesses_ok, s.witnesses);
}

#[test]
fn many_to_one_report_sums_blocks() {
    let mut rng = Rng::new(5);
    let (n, k, l, p) = (4, 3, 2, 3);
    let a = Tensor::matrix(n, k, rng.uniform_vec(n * k, -1.0, 1.0)).unwrap();
    let b = Tensor::matrix(p * k, l, rng.uniform_vec(p * k * l, -1.0, 1.0)).unwrap();
    let xs: Vec<Tensor> = (0..p)
        .map(|_| Tensor::vector(rng.uniform_vec(n, -1.0, 1.0)).unwrap())
        .collect();
    let pair = AnchorMatrixPair::many_to_one(a.clone(), b.clone(), p).unwrap();
    let r = compare_paths_many_to_one(&xs, &pair, Activation::Relu).unwrap();
    // z = Σ_p B_pᵀ Aᵀ x_p by loops
    for ll in 0..l {
        let mut z = 0.0;
        for (pi, x) in xs.iter().enumerate() {
            for kk in 0..k {
                let y: f64 = (0..n).map(|nn| a.at(nn, kk) * x.values()[nn]).sum();
                z += b.at(pi * k + kk, ll) * y;
            }
        }
        assert!((r.z.values()[ll] - z).abs() < 1e-12);
    }
    assert_eq!(r.agreement_mask.len(), l);
    let frac = r.agreement_fraction();
    assert!((0.0..=1.0).contains(&frac));
}

#[test]
fn collapse_error_is_tiny() {
    let mut rng = Rng::new(1);
    let a = Tensor::<f64>::matrix(8, 8, rng.uniform_vec(64, -1.0, 1.0)).unwrap();
    let b = Tensor::matrix(8, 8, rng.uniform_vec(64, -1.0, 1.0)).unwrap();
    let x = Tensor::vector(rng.uniform_vec(8, -1.0, 1.0)).unwrap();
    let pair = AnchorMatrixPair::one_to_one(a, b).unwrap();
    assert!(linear_collapse_error(&x, &pair).unwrap() < 1e-12);
}
