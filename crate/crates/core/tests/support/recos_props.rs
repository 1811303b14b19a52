//! Property checks of the RECOS unit, driven by a seeded proptest runner.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use recos::recos::{augment_anchor, augment_input, geodesic_angle, recos_forward, recos_forward_general};
use recos::{Activation, AnchorSet, InputVector, Tensor};

pub const TOL: f64 = 1e-12;
/// `acos` near ±1 turns a 1-ulp dot-product error into ~1e-6 degrees.
pub const ANGLE_TOL_DEG: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct PropOutcome {
    pub name: &'static str,
    pub cases: u32,
    pub result: Result<(), String>,
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        max_global_rejects: cases.saturating_mul(4),
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn vec_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_len).prop_flat_map(|n| proptest::collection::vec(-1.0f64..1.0, n))
}

fn nonzero(v: &[f64]) -> bool {
    v.iter().map(|x| x * x).sum::<f64>() > 1e-6
}

fn anchors_from(cols: &[Vec<f64>]) -> AnchorSet {
    let cols: Vec<Tensor> = cols.iter().map(|c| Tensor::vector(c.clone()).unwrap()).collect();
    AnchorSet::from_columns(&cols, false).unwrap()
}

fn run(name: &'static str, cases: u32, f: impl FnOnce(&mut TestRunner) -> Result<(), String>) -> PropOutcome {
    let mut r = runner(cases);
    PropOutcome {
        name,
        cases,
        result: f(&mut r),
    }
}

/// Mean-removed correlation through augmented vectors equals the direct
/// `relu(aᵀ(x − μ1))`.
pub fn augmentation_equivalence(cases: u32) -> PropOutcome {
    run("augmentation equivalence", cases, |r| {
        let strat = (1usize..=25, 1usize..=4).prop_flat_map(|(n, k)| {
            (
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, n), k),
            )
        });
        r.run(&strat, |(x, anchors)| {
            let mu = x.iter().sum::<f64>() / x.len() as f64;
            let xin = augment_input(&Tensor::vector(x.clone()).unwrap()).unwrap();
            let aug: Vec<Vec<f64>> = anchors
                .iter()
                .map(|a| {
                    augment_anchor(&Tensor::vector(a.clone()).unwrap())
                        .unwrap()
                        .into_values()
                })
                .collect();
            let cols: Vec<Tensor> = aug.iter().map(|c| Tensor::vector(c.clone()).unwrap()).collect();
            let set = AnchorSet::from_columns(&cols, true).unwrap();
            let y = recos_forward(&xin, &set, Activation::Relu).unwrap();
            for (a, &got) in anchors.iter().zip(y.values()) {
                let direct: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * (xi - mu)).sum();
                prop_assert!((got - direct.max(0.0)).abs() < TOL, "{got} vs {direct}");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    })
}

/// `f(c·x) = c·f(x)` for `c > 0` under relu.
pub fn positive_homogeneity(cases: u32) -> PropOutcome {
    run("positive homogeneity", cases, |r| {
        let strat = (1usize..=16, 1usize..=4).prop_flat_map(|(n, k)| {
            (
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, n), k),
                0.01f64..10.0,
            )
        });
        r.run(&strat, |(x, anchors, c)| {
            prop_assume!(nonzero(&x) && anchors.iter().all(|a| nonzero(a)));
            let set = anchors_from(&anchors);
            let xt = Tensor::vector(x.clone()).unwrap();
            let base = recos_forward_general(&InputVector::plain(xt.clone()), &set, Activation::Relu).unwrap();
            let scaled =
                recos_forward_general(&InputVector::plain(xt.scale(c).unwrap()), &set, Activation::Relu).unwrap();
            for (b, s) in base.values().iter().zip(scaled.values()) {
                prop_assert!((s - c * b).abs() < TOL, "{s} vs {c}·{b}");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    })
}

/// 0° to itself, 180° to its negation, 90° to a Gram–Schmidt orthogonal vector.
pub fn geodesic_trivial_cases(cases: u32) -> PropOutcome {
    run("geodesic trivial cases", cases, |r| {
        let strat = (2usize..=16).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(-1.0f64..1.0, n),
            )
        });
        r.run(&strat, |(x, y)| {
            prop_assume!(nonzero(&x));
            let xt = Tensor::vector(x.clone()).unwrap();
            let same = geodesic_angle(&xt, &xt).unwrap();
            let anti = geodesic_angle(&xt, &xt.scale(-1.0).unwrap()).unwrap();
            prop_assert!(same.abs() < ANGLE_TOL_DEG, "self angle {same}");
            prop_assert!((anti - 180.0).abs() < ANGLE_TOL_DEG, "antipodal angle {anti}");
            let xx: f64 = x.iter().map(|v| v * v).sum();
            let proj: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / xx;
            let orth: Vec<f64> = y.iter().zip(&x).map(|(b, a)| b - proj * a).collect();
            prop_assume!(nonzero(&orth));
            let right = geodesic_angle(&xt, &Tensor::vector(orth).unwrap()).unwrap();
            prop_assert!((right - 90.0).abs() < 1e-9, "orthogonal angle {right}");
            Ok(())
        })
        .map_err(|e| e.to_string())
    })
}

/// Relu outputs are never negative, and an anchor at `−x` gives exactly 0.
pub fn rectified_nonnegativity(cases: u32) -> PropOutcome {
    run("rectified non-negativity", cases, |r| {
        let strat = (1usize..=16, 1usize..=6).prop_flat_map(|(n, k)| {
            (
                proptest::collection::vec(-10.0f64..10.0, n),
                proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, n), k),
            )
        });
        r.run(&strat, |(x, anchors)| {
            let xin = InputVector::plain(Tensor::vector(x.clone()).unwrap());
            let y = recos_forward(&xin, &anchors_from(&anchors), Activation::Relu).unwrap();
            prop_assert!(y.values().iter().all(|&v| v >= 0.0));
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let z = recos_forward(&xin, &anchors_from(&[neg]), Activation::Relu).unwrap();
            prop_assert!(z.values()[0] == 0.0);
            Ok(())
        })
        .map_err(|e| e.to_string())
    })
}

/// For unit vectors within 90°, higher correlation means a smaller angle.
pub fn monotone_similarity(cases: u32) -> PropOutcome {
    run("monotone similarity", cases, |r| {
        let strat = (vec_strategy(8)).prop_flat_map(|x| {
            let n = x.len();
            (
                Just(x),
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(-1.0f64..1.0, n),
            )
        });
        r.run(&strat, |(x, a, b)| {
            prop_assume!(nonzero(&x) && nonzero(&a) && nonzero(&b));
            let unit = |v: &[f64]| {
                let n = v.iter().map(|t| t * t).sum::<f64>().sqrt();
                v.iter().map(|t| t / n).collect::<Vec<_>>()
            };
            let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
            // flip anchors into the hemisphere around x
            let x = unit(&x);
            let toward = |v: &[f64]| {
                let u = unit(v);
                if dot(&x, &u) < 0.0 {
                    u.iter().map(|t| -t).collect()
                } else {
                    u
                }
            };
            let (a, b) = (toward(&a), toward(&b));
            let (ca, cb) = (dot(&x, &a), dot(&x, &b));
            prop_assume!((ca - cb).abs() > 1e-9);
            let t = |v: Vec<f64>| Tensor::vector(v).unwrap();
            let xa = geodesic_angle(&t(x.clone()), &t(a)).unwrap();
            let xb = geodesic_angle(&t(x), &t(b)).unwrap();
            prop_assert_eq!(ca > cb, xa < xb);
            Ok(())
        })
        .map_err(|e| e.to_string())
    })
}

pub fn all(cases: u32) -> Vec<PropOutcome> {
    vec![
        augmentation_equivalence(cases),
        positive_homogeneity(cases),
        geodesic_trivial_cases(cases),
        rectified_nonnegativity(cases),
        monotone_similarity(cases),
    ]
}
