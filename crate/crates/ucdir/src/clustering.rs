//! Spherical k-means over unit-norm features with cosine distance.
//!
//! Used once per epoch per domain to produce pseudo-labels and centroids.
//! Everything is deterministic for a fixed seed: k-means++ seeding draws from
//! a seeded generator, mean updates run in ascending sample order, and ties
//! always resolve to the lowest index.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Domain;
use crate::diffmath::DenseArray;
use crate::encoder::FeatureVector;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Result of clustering one domain's feature bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// `k` unit-norm centroids.
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input sample, aligned with the input order.
    pub assignments: Vec<usize>,
    /// Sum of cosine distances from each sample to its centroid.
    pub inertia: f64,
    /// Which domain's bank these clusters describe, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<Domain>,
}

impl ClusterModel {
    /// Returns the same model labeled with its source domain.
    pub fn tagged(mut self, domain: Domain) -> Self {
        self.domain_tag = Some(domain);
        self
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Centroids stacked as a `(k, d)` matrix.
    pub fn centroid_matrix(&self) -> DenseArray {
        DenseArray::from_rows(&self.centroids)
    }

    /// Centroids transposed into a `(d, k)` matrix, the layout the soft
    /// cluster-probability op multiplies against.
    pub fn centroid_matrix_t(&self) -> DenseArray {
        let (k, d) = (self.k(), self.dim());
        let mut data = vec![0.0; k * d];
        for (u, c) in self.centroids.iter().enumerate() {
            for (j, &v) in c.iter().enumerate() {
                data[j * k + u] = v;
            }
        }
        DenseArray::matrix(d, k, data)
    }
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

fn check_features(features: &[FeatureVector], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Clustering("k must be at least 1".into()));
    }
    if features.len() < k {
        return Err(Error::Clustering(format!(
            "need at least k = {k} samples, got {}",
            features.len()
        )));
    }
    let d = features[0].len();
    for (i, f) in features.iter().enumerate() {
        if f.len() != d {
            return Err(Error::Clustering(format!(
                "sample {i} has dimension {} but sample 0 has {d}",
                f.len()
            )));
        }
        let norm: f64 = f.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Clustering(format!(
                "sample {i} is not unit-norm (norm = {norm})"
            )));
        }
    }
    Ok(d)
}

/// k-means++ seeding under cosine distance: the first centroid is uniform,
/// each further one is drawn proportionally to the squared distance to the
/// nearest already-chosen centroid.
fn seed_centroids(features: &[FeatureVector], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = features.len();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut min_dist: Vec<f64> = features
        .iter()
        .map(|f| cosine_distance(f.as_slice(), features[chosen[0]].as_slice()))
        .collect();

    while chosen.len() < k {
        let weights: Vec<f64> = min_dist.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut picked = None;
            for (i, &w) in weights.iter().enumerate() {
                cum += w;
                if r < cum {
                    picked = Some(i);
                    break;
                }
            }
            // Floating-point shortfall at the end of the scan: take the last
            // positive-weight index.
            picked.unwrap_or_else(|| {
                weights
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .expect("total > 0 implies a positive weight")
            })
        } else {
            // Every remaining point coincides with a chosen centroid; fall
            // back to the lowest-index unchosen point.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (d, f) in min_dist.iter_mut().zip(features) {
            let nd = cosine_distance(f.as_slice(), features[next].as_slice());
            if nd < *d {
                *d = nd;
            }
        }
    }
    chosen
        .into_iter()
        .map(|i| features[i].as_slice().to_vec())
        .collect()
}

fn nearest_centroid(feature: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (u, c) in centroids.iter().enumerate() {
        let dot: f64 = feature.iter().zip(c).map(|(x, y)| x * y).sum();
        if dot > best_dot {
            best_dot = dot;
            best = u;
        }
    }
    best
}

fn assign_all(features: &[FeatureVector], centroids: &[Vec<f64>]) -> Vec<usize> {
    // An order-preserving parallel map: output order equals input order, so
    // the result is independent of thread scheduling.
    features
        .par_iter()
        .map(|f| nearest_centroid(f.as_slice(), centroids))
        .collect()
}

fn inertia_of(features: &[FeatureVector], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    features
        .iter()
        .zip(assignments)
        .map(|(f, &a)| cosine_distance(f.as_slice(), &centroids[a]))
        .sum()
}

/// Claims members for empty clusters by moving each one's centroid onto the
/// point currently farthest from its own centroid. Only points from clusters
/// with at least two members are taken, so no fresh empties appear.
fn repair_empty(
    features: &[FeatureVector],
    centroids: &mut [Vec<f64>],
    assignments: &[usize],
) -> bool {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    let mut taken = vec![false; features.len()];
    let mut repaired = false;
    for u in 0..k {
        if sizes[u] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, f) in features.iter().enumerate() {
            if taken[i] || sizes[assignments[i]] < 2 {
                continue;
            }
            let d = cosine_distance(f.as_slice(), &centroids[assignments[i]]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            centroids[u] = features[i].as_slice().to_vec();
            sizes[assignments[i]] -= 1;
            sizes[u] += 1; // the point will claim u on the next assignment pass
            taken[i] = true;
            repaired = true;
        }
    }
    repaired
}

/// Spherical k-means with default iteration cap and tolerance.
pub fn kmeans(features: &[FeatureVector], k: usize, seed: u64) -> Result<ClusterModel> {
    kmeans_detailed(features, k, seed, DEFAULT_MAX_ITER, DEFAULT_TOL).map(|(m, _)| m)
}

/// Spherical k-means that also returns the inertia after each iteration
/// (first entry: after seeding). The final assignment pass always runs
/// against the final centroids, so nearest-centroid consistency holds on
/// return.
pub fn kmeans_detailed(
    features: &[FeatureVector],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(ClusterModel, Vec<f64>)> {
    check_features(features, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(features, k, &mut rng);
    let mut assignments = settle_assignments(features, &mut centroids)?;
    let mut trace = vec![inertia_of(features, &centroids, &assignments)];

    for _ in 0..max_iter {
        let new_centroids = update_centroids(features, &centroids, &assignments, k);
        let shift = centroids
            .iter()
            .zip(&new_centroids)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        centroids = new_centroids;
        assignments = settle_assignments(features, &mut centroids)?;
        trace.push(inertia_of(features, &centroids, &assignments));
        if shift < tol {
            break;
        }
    }

    let inertia = *trace.last().expect("trace is never empty");
    Ok((
        ClusterModel {
            centroids,
            assignments,
            inertia,
            domain_tag: None,
        },
        trace,
    ))
}

/// Assigns every point to its nearest centroid, repairing empty clusters and
/// re-assigning until the partition is stable (bounded by k rounds).
fn settle_assignments(
    features: &[FeatureVector],
    centroids: &mut [Vec<f64>],
) -> Result<Vec<usize>> {
    let k = centroids.len();
    let mut assignments = assign_all(features, centroids);
    for _ in 0..=k {
        if !repair_empty(features, centroids, &assignments) {
            return Ok(assignments);
        }
        assignments = assign_all(features, centroids);
    }
    // Repair kept cycling: only possible when distinct points are scarcer
    // than clusters (duplicate-heavy data).
    Err(Error::Clustering(
        "could not populate every cluster; fewer distinct points than clusters".into(),
    ))
}

fn update_centroids(
    features: &[FeatureVector],
    old: &[Vec<f64>],
    assignments: &[usize],
    k: usize,
) -> Vec<Vec<f64>> {
    let d = features[0].len();
    let mut sums = vec![vec![0.0; d]; k];
    // Ascending sample order fixes the floating-point accumulation order.
    for (f, &a) in features.iter().zip(assignments) {
        for (s, &x) in sums[a].iter_mut().zip(f.as_slice()) {
            *s += x;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(u, s)| {
            let norm: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                // Degenerate mean (empty cluster or cancelling members):
                // keep the previous centroid and let repair handle it.
                old[u].clone()
            } else {
                s.into_iter().map(|x| x / norm).collect()
            }
        })
        .collect()
}

/// Nearest centroid for a single feature; ties go to the lowest index.
pub fn assign(model: &ClusterModel, feature: &[f64]) -> Result<usize> {
    if feature.len() != model.dim() {
        return Err(Error::Clustering(format!(
            "feature has dimension {}, centroids have {}",
            feature.len(),
            model.dim()
        )));
    }
    Ok(nearest_centroid(feature, &model.centroids))
}

/// Relabels clusters: centroid `u` moves to slot `perm[u]` and assignments
/// follow. The partition itself — and therefore the inertia — is unchanged.
pub fn permute_centroids(model: &ClusterModel, perm: &[usize]) -> Result<ClusterModel> {
    let k = model.k();
    if perm.len() != k {
        return Err(Error::Clustering(format!(
            "permutation has length {}, expected {k}",
            perm.len()
        )));
    }
    let mut seen = vec![false; k];
    for &p in perm {
        if p >= k || seen[p] {
            return Err(Error::Clustering(format!(
                "not a permutation of 0..{k}: {perm:?}"
            )));
        }
        seen[p] = true;
    }
    let mut centroids = vec![Vec::new(); k];
    for (u, c) in model.centroids.iter().enumerate() {
        centroids[perm[u]] = c.clone();
    }
    Ok(ClusterModel {
        centroids,
        assignments: model.assignments.iter().map(|&a| perm[a]).collect(),
        inertia: model.inertia,
        domain_tag: model.domain_tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: Vec<f64>) -> FeatureVector {
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        FeatureVector::new(v.into_iter().map(|x| x / n).collect())
    }

    fn random_units(n: usize, d: usize, seed: u64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| unit((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect()
    }

    #[test]
    fn single_cluster_centroid_is_normalized_mean() {
        let feats = vec![unit(vec![1.0, 0.1]), unit(vec![1.0, -0.1]), unit(vec![0.9, 0.05])];
        let model = kmeans(&feats, 1, 7).unwrap();
        let mut mean = [0.0; 2];
        for f in &feats {
            mean[0] += f.as_slice()[0];
            mean[1] += f.as_slice()[1];
        }
        let n = (mean[0] * mean[0] + mean[1] * mean[1]).sqrt();
        assert!((model.centroids[0][0] - mean[0] / n).abs() < 1e-12);
        assert!((model.centroids[0][1] - mean[1] / n).abs() < 1e-12);
        assert_eq!(model.assignments, vec![0, 0, 0]);
    }

    #[test]
    fn separates_two_orthogonal_bundles() {
        let mut feats = Vec::new();
        for i in 0..5 {
            feats.push(unit(vec![1.0, 0.01 * i as f64, 0.0]));
        }
        for i in 0..5 {
            feats.push(unit(vec![0.0, 0.01 * i as f64, 1.0]));
        }
        let model = kmeans(&feats, 2, 21).unwrap();
        let first = model.assignments[0];
        assert!(model.assignments[..5].iter().all(|&a| a == first));
        assert!(model.assignments[5..].iter().all(|&a| a != first));
        assert!(model.inertia < 0.01);
    }

    #[test]
    fn same_seed_reproduces_and_different_seed_may_differ() {
        let feats = random_units(40, 6, 5);
        let a = kmeans(&feats, 4, 11).unwrap();
        let b = kmeans(&feats, 4, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inertia_trace_never_increases() {
        for seed in 0..5 {
            let feats = random_units(60, 5, seed);
            let (_, trace) = kmeans_detailed(&feats, 4, seed * 13 + 1, 100, 0.0).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "trace increased: {trace:?}");
            }
        }
    }

    #[test]
    fn final_assignments_are_nearest_centroids() {
        let feats = random_units(80, 6, 17);
        let model = kmeans(&feats, 5, 3).unwrap();
        for (f, &a) in feats.iter().zip(&model.assignments) {
            let assigned: f64 = f.as_slice().iter().zip(&model.centroids[a]).map(|(x, y)| x * y).sum();
            for c in &model.centroids {
                let other: f64 = f.as_slice().iter().zip(c).map(|(x, y)| x * y).sum();
                assert!(assigned >= other - 1e-12);
            }
        }
        for c in &model.centroids {
            let norm: f64 = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn assign_breaks_ties_toward_lowest_index() {
        let model = ClusterModel {
            centroids: vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            assignments: vec![],
            inertia: 0.0,
            domain_tag: None,
        };
        assert_eq!(assign(&model, &[1.0, 0.0]).unwrap(), 0);
        assert_eq!(assign(&model, &[0.0, 1.0]).unwrap(), 2);
        assert!(assign(&model, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn permutation_relabels_without_changing_the_partition() {
        let feats = random_units(30, 4, 2);
        let model = kmeans(&feats, 3, 9).unwrap();

        let same = permute_centroids(&model, &[0, 1, 2]).unwrap();
        assert_eq!(same, model);

        let swapped = permute_centroids(&model, &[1, 0, 2]).unwrap();
        assert_eq!(swapped.centroids[1], model.centroids[0]);
        assert_eq!(swapped.centroids[0], model.centroids[1]);
        assert_eq!(swapped.inertia, model.inertia);
        let back = permute_centroids(&swapped, &[1, 0, 2]).unwrap();
        assert_eq!(back, model);

        assert!(permute_centroids(&model, &[0, 0, 1]).is_err());
        assert!(permute_centroids(&model, &[0, 1]).is_err());
    }

    #[test]
    fn input_validation() {
        let feats = random_units(4, 3, 1);
        assert!(kmeans(&feats, 0, 1).is_err());
        assert!(kmeans(&feats, 5, 1).is_err());
        assert!(kmeans(&[], 1, 1).is_err());
        let bad = vec![FeatureVector::new(vec![2.0, 0.0, 0.0])];
        assert!(kmeans(&bad, 1, 1).is_err());
    }
}
