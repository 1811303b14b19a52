//! A conv layer evaluates one RECOS unit per output position.

use recos::layers::{conv_forward, ConvLayer};
use recos::recos::{augment_input, recos_forward};
use recos::{Activation, AnchorSet, InputVector, Rng, Tensor};

fn patch(x: &Tensor, c: usize, kh: usize, kw: usize, i: usize, j: usize) -> Vec<f64> {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let mut p = Vec::new();
    for cc in 0..c {
        for a in 0..kh {
            for b in 0..kw {
                p.push(x.values()[(cc * h + i + a) * w + j + b]);
            }
        }
    }
    p
}

#[test]
fn conv_equals_recos_per_patch() {
    let mut rng = Rng::new(77);
    for _ in 0..50 {
        let (c, k, kh, kw) = (1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4));
        let (h, w) = (kh + rng.below(6), kw + rng.below(6));
        let x = Tensor::new(vec![c, h, w], rng.uniform_vec(c * h * w, -1.0, 1.0)).unwrap();
        let weights = Tensor::new(vec![k, c, kh, kw], rng.uniform_vec(k * c * kh * kw, -1.0, 1.0)).unwrap();
        let layer = ConvLayer::new(weights.clone(), Tensor::zeros(&[k]), 1, Activation::Relu).unwrap();
        let out = conv_forward(&x, &layer).unwrap();
        let n = c * kh * kw;
        let cols: Vec<Tensor> = (0..k)
            .map(|kk| Tensor::vector(weights.values()[kk * n..(kk + 1) * n].to_vec()).unwrap())
            .collect();
        let anchors = AnchorSet::from_columns(&cols, false).unwrap();
        let (ho, wo) = (out.shape()[1], out.shape()[2]);
        for i in 0..ho {
            for j in 0..wo {
                let xin = InputVector::plain(Tensor::vector(patch(&x, c, kh, kw, i, j)).unwrap());
                let y = recos_forward(&xin, &anchors, Activation::Relu).unwrap();
                for kk in 0..k {
                    let got = out.values()[(kk * ho + i) * wo + j];
                    assert!((got - y.values()[kk]).abs() < 1e-12);
                }
            }
        }
    }
}

/// With the augmented anchors, a conv on mean-removed patches is the RECOS
/// output on augmented inputs.
#[test]
fn augmented_path_matches_mean_removed_conv() {
    let mut rng = Rng::new(78);
    let (kh, kw, k) = (5, 5, 6);
    let x = Tensor::new(vec![1, 9, 9], rng.uniform_vec(81, 0.0, 1.0)).unwrap();
    let weights = Tensor::new(vec![k, 1, kh, kw], rng.uniform_vec(k * 25, -1.0, 1.0)).unwrap();
    let raw = AnchorSet::from_columns(
        &(0..k)
            .map(|kk| Tensor::vector(weights.values()[kk * 25..(kk + 1) * 25].to_vec()).unwrap())
            .collect::<Vec<_>>(),
        false,
    )
    .unwrap();
    let aug = raw.augmented().unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let p = patch(&x, 1, kh, kw, i, j);
            let mu = p.iter().sum::<f64>() / 25.0;
            let y = recos_forward(
                &augment_input(&Tensor::vector(p.clone()).unwrap()).unwrap(),
                &aug,
                Activation::Relu,
            )
            .unwrap();
            for kk in 0..k {
                let direct: f64 = (0..25).map(|q| weights.values()[kk * 25 + q] * (p[q] - mu)).sum();
                assert!((y.values()[kk] - direct.max(0.0)).abs() < 1e-12);
            }
        }
    }
}
