//! Spherical k-means for initializing anchors from image patches.
//!
//! Patches are mean-removed and projected onto the unit sphere, then clustered
//! by cosine similarity. Centroids are the normalized sums of their members.

use crate::error::{Error, Result};
use crate::numerics::{dot, l2_norm, Rng, Scalar, Tensor};
use crate::recos::AnchorSet;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Clone, Debug)]
pub struct KMeansOutcome<S = f64> {
    pub anchors: AnchorSet<S>,
    pub assignments: Vec<usize>,
    /// Total cosine similarity of points to their assigned centroid, one
    /// entry per assignment pass.
    pub objective_history: Vec<S>,
    pub iterations: usize,
    pub reseeded: usize,
}

fn to_unit_zero_mean<S: Scalar>(patch: &[S]) -> Result<Vec<S>> {
    let n = S::lit(patch.len() as f64);
    let mean = patch.iter().copied().sum::<S>() / n;
    let centered: Vec<S> = patch.iter().map(|&v| v - mean).collect();
    let norm = l2_norm(&centered)?;
    if norm == S::zero() {
        return Err(Error::Data("constant patch has no direction after mean removal".into()));
    }
    Ok(centered.into_iter().map(|v| v / norm).collect())
}

fn unit<S: Scalar>(v: &[S]) -> Option<Vec<S>> {
    let n = l2_norm(v).ok()?;
    (n > S::zero()).then(|| v.iter().map(|&x| x / n).collect())
}

/// Runs [`spherical_kmeans`] and returns only the anchors.
pub fn kmeans_anchor_init<S: Scalar>(patches: &[Tensor<S>], k: usize, rng: &mut Rng) -> Result<AnchorSet<S>> {
    Ok(spherical_kmeans(patches, k, rng)?.anchors)
}

/// Farthest-first seeding (first seed drawn from `rng`), then Lloyd passes
/// until the assignment stops changing or [`MAX_ITERATIONS`] is reached.
pub fn spherical_kmeans<S: Scalar>(patches: &[Tensor<S>], k: usize, rng: &mut Rng) -> Result<KMeansOutcome<S>> {
    if k == 0 {
        return Err(Error::Data("k-means needs at least one cluster".into()));
    }
    if patches.len() < k {
        return Err(Error::Data(format!(
            "{} patches cannot seed {k} clusters",
            patches.len()
        )));
    }
    let dim = patches[0].len();
    if patches.iter().any(|p| p.len() != dim) {
        return Err(Error::dims("patches of different lengths"));
    }
    let points = patches
        .iter()
        .map(|p| to_unit_zero_mean(p.values()))
        .collect::<Result<Vec<_>>>()?;

    let mut centers = vec![points[rng.below(points.len())].clone()];
    let mut nearest: Vec<S> = points.iter().map(|p| dot(p, &centers[0])).collect();
    while centers.len() < k {
        let far = argmin(&nearest);
        let c = points[far].clone();
        for (s, p) in nearest.iter_mut().zip(&points) {
            *s = s.max(dot(p, &c));
        }
        centers.push(c);
    }
    spherical_kmeans_from(&points, centers)
}

fn argmin<S: Scalar>(v: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Lloyd iterations from explicit initial centers. `points` must already be
/// unit vectors. A cluster left empty (or whose members cancel) is reseeded
/// with the point least similar to its current centroid.
pub fn spherical_kmeans_from<S: Scalar>(points: &[Vec<S>], mut centers: Vec<Vec<S>>) -> Result<KMeansOutcome<S>> {
    let k = centers.len();
    let mut assignments: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut reseeded = 0;
    let mut iterations = 0;

    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let mut sims = Vec::with_capacity(points.len());
        let next: Vec<usize> = points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_s = dot(p, &centers[0]);
                for (j, c) in centers.iter().enumerate().skip(1) {
                    let s = dot(p, c);
                    if s > best_s {
                        best = j;
                        best_s = s;
                    }
                }
                sims.push(best_s);
                best
            })
            .collect();
        history.push(sims.iter().copied().sum::<S>());
        if next == assignments {
            break;
        }
        assignments = next;

        let dim = points[0].len();
        let mut sums = vec![vec![S::zero(); dim]; k];
        for (p, &a) in points.iter().zip(&assignments) {
            for (s, &v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut taken: Vec<usize> = Vec::new();
        for (j, sum) in sums.iter().enumerate() {
            match unit(sum) {
                Some(c) => centers[j] = c,
                None => {
                    let far = (0..points.len())
                        .filter(|i| !taken.contains(i))
                        .min_by(|&a, &b| {
                            sims[a]
                                .partial_cmp(&sims[b])
                                .unwrap_or(std::cmp::Ordering::Equal)
                                .then(a.cmp(&b))
                        })
                        .expect("at least k points");
                    taken.push(far);
                    centers[j] = points[far].clone();
                    reseeded += 1;
                }
            }
        }
    }

    let cols = centers
        .iter()
        .map(|c| Tensor::vector(c.clone()))
        .collect::<Result<Vec<_>>>()?;
    let anchors = AnchorSet::normalized(&AnchorSet::from_columns(&cols, false)?)?;
    Ok(KMeansOutcome {
        anchors,
        assignments,
        objective_history: history,
        iterations,
        reseeded,
    })
}
