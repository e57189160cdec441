//! Cross-domain retrieval evaluation: precision at k under cosine similarity.
//!
//! Labels enter the pipeline only here. Queries come from one domain, the
//! gallery is the other; a retrieval is a hit when the gallery item shares
//! the query's class.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Domain, SampleId};
use crate::encoder::{encode, EncoderParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::AToB => "a_to_b",
            Direction::BToA => "b_to_a",
        }
    }

    pub fn query_domain(&self) -> Domain {
        match self {
            Direction::AToB => Domain::A,
            Direction::BToA => Domain::B,
        }
    }

    pub fn gallery_domain(&self) -> Domain {
        match self {
            Direction::AToB => Domain::B,
            Direction::BToA => Domain::A,
        }
    }
}

/// Mean precision at each requested k over all queries of one direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub direction: Direction,
    pub ks: Vec<usize>,
    /// Mean precision per k, keyed by k.
    pub precision: BTreeMap<usize, f64>,
    pub num_queries: usize,
    pub num_gallery: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_query: Option<Vec<PerQueryResult>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerQueryResult {
    pub id: u64,
    pub label: u32,
    /// Precision at each k, aligned with the report's `ks`.
    pub precision: Vec<f64>,
}

/// Indices of the `k` gallery rows most cosine-similar to `query`, best
/// first. Ties in score break toward the lower sample id, so rankings are
/// deterministic.
pub fn rank_gallery(query: &[f64], gallery: &[(SampleId, Vec<f64>)], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Evaluation("k must be at least 1".into()));
    }
    if k > gallery.len() {
        return Err(Error::Evaluation(format!(
            "k = {k} exceeds gallery size {}",
            gallery.len()
        )));
    }
    let mut scored: Vec<(usize, f64)> = gallery
        .iter()
        .enumerate()
        .map(|(i, (_, g))| {
            let dot: f64 = query.iter().zip(g).map(|(a, b)| a * b).sum();
            (i, dot)
        })
        .collect();
    scored.sort_unstable_by(|(i, si), (j, sj)| {
        sj.partial_cmp(si)
            .expect("similarities are finite")
            .then(gallery[*i].0.cmp(&gallery[*j].0))
    });
    Ok(scored.into_iter().take(k).map(|(i, _)| i).collect())
}

fn labeled_features(
    params: &EncoderParams,
    dataset: &Dataset,
    domain: Domain,
) -> Result<Vec<(SampleId, u32, Vec<f64>)>> {
    let samples = dataset.samples(domain);
    if samples.is_empty() {
        return Err(Error::Evaluation(format!(
            "domain {} has no samples",
            domain.tag()
        )));
    }
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        let label = s.label.ok_or_else(|| {
            Error::Evaluation(format!(
                "sample {} has no label; retrieval evaluation requires labels",
                s.id.0
            ))
        })?;
        labels.push(label);
    }
    let raws: Vec<Vec<f64>> = samples.iter().map(|s| s.raw.clone()).collect();
    let feats = encode(params, &raws)?;
    Ok(samples
        .iter()
        .zip(labels)
        .zip(feats)
        .map(|((s, l), f)| (s.id, l, f.into_vec()))
        .collect())
}

/// Evaluates retrieval in one direction at the given cutoffs.
pub fn evaluate(
    params: &EncoderParams,
    dataset: &Dataset,
    direction: Direction,
    ks: &[usize],
    with_per_query: bool,
) -> Result<EvalReport> {
    if ks.is_empty() {
        return Err(Error::Evaluation("at least one k is required".into()));
    }
    let queries = labeled_features(params, dataset, direction.query_domain())?;
    let gallery_full = labeled_features(params, dataset, direction.gallery_domain())?;
    let gallery: Vec<(SampleId, Vec<f64>)> =
        gallery_full.iter().map(|(id, _, f)| (*id, f.clone())).collect();
    let gallery_labels: Vec<u32> = gallery_full.iter().map(|(_, l, _)| *l).collect();
    let max_k = *ks.iter().max().expect("non-empty ks");
    if max_k > gallery.len() {
        return Err(Error::Evaluation(format!(
            "k = {max_k} exceeds gallery size {}",
            gallery.len()
        )));
    }

    // Order-preserving parallel map over queries.
    let per_query: Vec<PerQueryResult> = queries
        .par_iter()
        .map(|(id, label, feat)| {
            let top = rank_gallery(feat, &gallery, max_k)?;
            let precision = ks
                .iter()
                .map(|&k| {
                    let hits = top[..k]
                        .iter()
                        .filter(|&&g| gallery_labels[g] == *label)
                        .count();
                    hits as f64 / k as f64
                })
                .collect();
            Ok(PerQueryResult {
                id: id.0,
                label: *label,
                precision,
            })
        })
        .collect::<Result<_>>()?;

    // Fixed query order for the aggregate sum.
    let mut precision = BTreeMap::new();
    for (ki, &k) in ks.iter().enumerate() {
        let sum: f64 = per_query.iter().map(|q| q.precision[ki]).sum();
        precision.insert(k, sum / per_query.len() as f64);
    }

    Ok(EvalReport {
        direction,
        ks: ks.to_vec(),
        precision,
        num_queries: queries.len(),
        num_gallery: gallery.len(),
        per_query: with_per_query.then_some(per_query),
    })
}

/// Evaluates both directions and returns the per-k mean of the two, the
/// number the training log tracks.
pub fn evaluate_both(
    params: &EncoderParams,
    dataset: &Dataset,
    ks: &[usize],
) -> Result<(EvalReport, EvalReport, BTreeMap<usize, f64>)> {
    let ab = evaluate(params, dataset, Direction::AToB, ks, false)?;
    let ba = evaluate(params, dataset, Direction::BToA, ks, false)?;
    let mut mean = BTreeMap::new();
    for &k in ks {
        mean.insert(k, 0.5 * (ab.precision[&k] + ba.precision[&k]));
    }
    Ok((ab, ba, mean))
}
