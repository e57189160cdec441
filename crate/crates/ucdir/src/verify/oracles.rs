//! Independent reference implementations used to cross-check the tape-based
//! losses, the clusterer, and the retrieval metric.
//!
//! Everything here is an explicit loop over a defining formula and shares no
//! code with the implementations under test. Numerically naive on purpose:
//! plain `exp`/`ln`, no max-subtraction, no matrix identities — at the small
//! sizes the property suite uses, the naive forms are exact enough to serve
//! as ground truth.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One domain's instance-discrimination term as a raw sum: for each query
/// feature, `ln(sum_j exp(q . neg_j / tau)) - q . view / tau` where `view` is
/// the query's own momentum embedding.
pub fn instance_wise(feats: &[Vec<f64>], views: &[Vec<f64>], negatives: &[Vec<f64>], tau: f64) -> f64 {
    let mut total = 0.0;
    for (f, v) in feats.iter().zip(views) {
        let denom: f64 = negatives.iter().map(|n| (dot(f, n) / tau).exp()).sum();
        total += denom.ln() - dot(f, v) / tau;
    }
    total
}

/// One domain's cluster-positive term as a raw sum, written exactly as the
/// defining average of per-positive log-softmax terms:
/// `-(1/|P(i)|) * sum_{p in P(i)} ln(exp(q . bank_p / tau) / sum_j exp(q . bank_j / tau))`.
/// `positive_rows[i]` lists the bank rows sharing sample `i`'s pseudo-label.
pub fn cluster_wise(
    feats: &[Vec<f64>],
    bank: &[Vec<f64>],
    positive_rows: &[Vec<usize>],
    tau: f64,
) -> f64 {
    let mut total = 0.0;
    for (f, pos) in feats.iter().zip(positive_rows) {
        let denom: f64 = bank.iter().map(|n| (dot(f, n) / tau).exp()).sum();
        let mut sample = 0.0;
        for &p in pos {
            sample -= ((dot(f, &bank[p]) / tau).exp() / denom).ln();
        }
        total += sample / pos.len() as f64;
    }
    total
}

/// Soft cluster probabilities: naive softmax of `feat . c_u / phi` over the
/// centroids.
pub fn soft_probs(feat: &[f64], centroids: &[Vec<f64>], phi: f64) -> Vec<f64> {
    let exps: Vec<f64> = centroids.iter().map(|c| (dot(feat, c) / phi).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// Cosine distance between two probability vectors.
pub fn cosine_distance(p: &[f64], q: &[f64]) -> f64 {
    let np = dot(p, p).sqrt();
    let nq = dot(q, q).sqrt();
    1.0 - dot(p, q) / (np * nq)
}

/// Shannon entropy in nats with the `0 ln 0 = 0` convention.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

/// Distance-structure discrepancy for ONE batch side as a raw sum over
/// ordered pairs `(i, j), i != j`: the squared difference between the pair's
/// probability-space cosine distance under domain A's centroids and under
/// domain B's centroids.
pub fn dd_one_side(
    feats: &[Vec<f64>],
    cents_a: &[Vec<f64>],
    cents_b: &[Vec<f64>],
    phi: f64,
) -> f64 {
    let pa: Vec<Vec<f64>> = feats.iter().map(|f| soft_probs(f, cents_a, phi)).collect();
    let pb: Vec<Vec<f64>> = feats.iter().map(|f| soft_probs(f, cents_b, phi)).collect();
    let mut total = 0.0;
    for i in 0..feats.len() {
        for j in 0..feats.len() {
            if i == j {
                continue;
            }
            let da = cosine_distance(&pa[i], &pa[j]);
            let db = cosine_distance(&pb[i], &pb[j]);
            total += (da - db) * (da - db);
        }
    }
    total
}

/// Both batch sides of the distance-structure discrepancy, raw sum.
pub fn dd(
    feats_a: &[Vec<f64>],
    feats_b: &[Vec<f64>],
    cents_a: &[Vec<f64>],
    cents_b: &[Vec<f64>],
    phi: f64,
) -> f64 {
    dd_one_side(feats_a, cents_a, cents_b, phi) + dd_one_side(feats_b, cents_a, cents_b, phi)
}

/// Summed sharpness penalty, raw: the entropy of every sample's probability
/// vector under both domains' centroid sets, both batch sides.
pub fn self_entropy(
    feats_a: &[Vec<f64>],
    feats_b: &[Vec<f64>],
    cents_a: &[Vec<f64>],
    cents_b: &[Vec<f64>],
    phi: f64,
) -> f64 {
    let mut total = 0.0;
    for feats in [feats_a, feats_b] {
        for f in feats {
            total += entropy(&soft_probs(f, cents_a, phi));
            total += entropy(&soft_probs(f, cents_b, phi));
        }
    }
    total
}

/// Exhaustive minimum-inertia 2-partition of unit-norm points under the
/// spherical convention (centroid = normalized mean, inertia = summed cosine
/// distance to the centroid). Enumerates every assignment with point 0 fixed
/// to cluster 0 (label symmetry) and both clusters non-empty. Returns the
/// best inertia and its assignment vector.
pub fn min_inertia_two_partition(points: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = points.len();
    assert!((2..=20).contains(&n), "exhaustive search needs 2..=20 points");
    let d = points[0].len();
    let mut best = f64::INFINITY;
    let mut best_assign = vec![0; n];
    // Bit i of `mask` says point i+1 joins cluster 1; mask 0 would leave
    // cluster 1 empty. Point 0 staying in cluster 0 keeps it non-empty and
    // halves the search by label symmetry.
    for mask in 1u32..(1u32 << (n - 1)) {
        let assign: Vec<usize> = std::iter::once(0)
            .chain((0..n - 1).map(|i| ((mask >> i) & 1) as usize))
            .collect();
        let mut inertia = 0.0;
        let mut feasible = true;
        for side in 0..2 {
            let mut mean = vec![0.0; d];
            let mut count = 0usize;
            for (p, &a) in points.iter().zip(&assign) {
                if a == side {
                    for (m, &v) in mean.iter_mut().zip(p) {
                        *m += v;
                    }
                    count += 1;
                }
            }
            let norm = dot(&mean, &mean).sqrt();
            if count == 0 || norm < 1e-12 {
                feasible = false;
                break;
            }
            for m in &mut mean {
                *m /= norm;
            }
            for (p, &a) in points.iter().zip(&assign) {
                if a == side {
                    inertia += 1.0 - dot(p, &mean);
                }
            }
        }
        if feasible && inertia < best {
            best = inertia;
            best_assign = assign;
        }
    }
    (best, best_assign)
}

/// Precision-at-k by repeated linear scans: pull the best-scoring remaining
/// gallery item k times (score descending, id ascending on ties) and count
/// label matches. No sorting, no shared ranking code.
pub fn precision_at_k(
    query: &[f64],
    query_label: u32,
    gallery: &[(u64, u32, Vec<f64>)],
    k: usize,
) -> f64 {
    assert!(k >= 1 && k <= gallery.len());
    let mut taken = vec![false; gallery.len()];
    let mut hits = 0usize;
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for (idx, (id, _, feat)) in gallery.iter().enumerate() {
            if taken[idx] {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let (bid, _, bfeat) = &gallery[b];
                    let s = dot(query, feat);
                    let bs = dot(query, bfeat);
                    s > bs || (s == bs && id < bid)
                }
            };
            if better {
                best = Some(idx);
            }
        }
        let chosen = best.expect("k <= gallery.len() guarantees a pick");
        taken[chosen] = true;
        if gallery[chosen].1 == query_label {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_wise_single_orthogonal_pair() {
        // One query orthogonal to the other bank entry, aligned with itself,
        // tau = 1: ln(e^1 + e^0) - 1 = ln(1 + e^{-1}).
        let feats = vec![vec![1.0, 0.0]];
        let views = vec![vec![1.0, 0.0]];
        let bank = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let got = instance_wise(&feats, &views, &bank, 1.0);
        assert!((got - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn cluster_wise_with_self_only_matches_instance_wise() {
        let feats = vec![vec![0.6, 0.8], vec![1.0, 0.0]];
        let bank = feats.clone();
        let positives = vec![vec![0], vec![1]];
        let cw = cluster_wise(&feats, &bank, &positives, 0.5);
        let iw = instance_wise(&feats, &feats, &bank, 0.5);
        assert!((cw - iw).abs() < 1e-14);
    }

    #[test]
    fn soft_probs_two_centroids_is_a_sigmoid_gap() {
        let p = soft_probs(&[1.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.5);
        // gap = (1 - 0)/0.5 = 2; p0 = 1/(1+e^{-2}).
        assert!((p[0] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dd_is_zero_for_identical_centroid_sets() {
        let feats = vec![vec![0.6, 0.8], vec![-1.0, 0.0], vec![0.0, 1.0]];
        let cents = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(dd(&feats, &feats, &cents, &cents, 0.1), 0.0);
    }

    #[test]
    fn two_partition_splits_antipodal_bundles() {
        let points = vec![
            vec![1.0, 0.0],
            vec![0.9987523388778446, 0.04993761694389223], // ~unit, near +x
            vec![-1.0, 0.0],
            vec![-0.9987523388778446, -0.04993761694389223],
        ];
        let (inertia, assign) = min_inertia_two_partition(&points);
        assert_eq!(assign[0], assign[1]);
        assert_eq!(assign[2], assign[3]);
        assert_ne!(assign[0], assign[2]);
        assert!(inertia < 0.01, "tight bundles should cost almost nothing, got {inertia}");
    }

    #[test]
    fn precision_counts_label_matches_with_id_tiebreak() {
        let gallery = vec![
            (0u64, 1u32, vec![1.0, 0.0]),
            (1, 0, vec![1.0, 0.0]),  // ties with id 0, loses by id
            (2, 1, vec![0.0, 1.0]),
        ];
        assert_eq!(precision_at_k(&[1.0, 0.0], 1, &gallery, 1), 1.0);
        assert_eq!(precision_at_k(&[1.0, 0.0], 1, &gallery, 2), 0.5);
        assert!((precision_at_k(&[1.0, 0.0], 1, &gallery, 3) - 2.0 / 3.0).abs() < 1e-15);
    }
}
