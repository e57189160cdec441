//! Executable property suite: every mathematical claim the library rests on,
//! checked against random trials and the independent oracles in
//! [`oracles`]. The `check` subcommand runs [`run_all`] and prints one line
//! per property; the integration tests call the same functions, so the CLI
//! and the test suite can never drift apart.

pub mod oracles;

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bank::{Banks, FeatureBank};
use crate::clustering::{kmeans, permute_centroids, ClusterModel};
use crate::data::{standard_normal, Domain, SampleId};
use crate::diffmath::{grad_check, DenseArray, NodeId, Tape};
use crate::encoder::FeatureVector;
use crate::error::Result;
use crate::evaluation::rank_gallery;
use crate::losses::{
    cluster_wise_loss, dd_loss, in_domain_distance, instance_wise_loss, lambda_schedule,
    self_entropy_loss, total_loss, BatchView, LossConfig, ProbabilityVector,
};
use crate::seeding::{component_rng, derive_seed};
use crate::training::cosine_lr;

/// Outcome of one property check.
#[derive(Clone, Debug)]
pub struct PropertyReport {
    pub name: String,
    pub passed: bool,
    /// Worst measured deviation/error across all trials (NaN if the check
    /// aborted before measuring anything).
    pub worst: f64,
    pub tolerance: f64,
    pub trials: usize,
    pub detail: String,
    pub millis: u128,
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} vs tolerance {:.0e} ({} trials, {} ms)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.trials,
            self.millis
        )?;
        if !self.detail.is_empty() {
            write!(f, " — {}", self.detail)?;
        }
        Ok(())
    }
}

fn report(
    name: &str,
    tolerance: f64,
    trials: usize,
    start: Instant,
    outcome: Result<(f64, bool, String)>,
) -> PropertyReport {
    let (worst, passed, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (f64::NAN, false, format!("aborted: {e}")),
    };
    PropertyReport {
        name: name.to_string(),
        passed,
        worst,
        tolerance,
        trials,
        detail,
        millis: start.elapsed().as_millis(),
    }
}

fn unit_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn unit_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| unit_vec(rng, d)).collect()
}

fn random_prob(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let scale = rng.gen_range(0.1..4.0);
    let logits: Vec<f64> = (0..k).map(|_| scale * standard_normal(rng)).collect();
    ProbabilityVector::softmax(&logits)
        .expect("finite logits")
        .values()
        .to_vec()
}

fn random_permutation(rng: &mut ChaCha8Rng, k: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..k).collect();
    p.shuffle(rng);
    p
}

fn centroid_model(centroids: Vec<Vec<f64>>, assignments: Vec<usize>) -> ClusterModel {
    ClusterModel {
        centroids,
        assignments,
        inertia: 0.0,
        domain_tag: None,
    }
}

/// A randomly drawn, internally consistent contrastive-training instance.
struct Fixture {
    ids_a: Vec<SampleId>,
    ids_b: Vec<SampleId>,
    /// Unnormalized online features, the differentiation variables.
    raw_a: DenseArray,
    raw_b: DenseArray,
    views_a: DenseArray,
    views_b: DenseArray,
    banks: Banks,
    clusters_a: ClusterModel,
    clusters_b: ClusterModel,
}

/// Draws a fixture with batch sizes 2–4 per side, dimension 3–6, and banks
/// that may be larger than the batch. With `singleton` every bank sample is
/// its own cluster and the momentum views equal the bank entries — the
/// configuration under which the cluster-positive loss must collapse to the
/// instance-wise one.
fn random_fixture(rng: &mut ChaCha8Rng, singleton: bool) -> Fixture {
    let d = rng.gen_range(3..=6);
    let mut sides = Vec::new();
    for base in [0u64, 1000] {
        let batch = rng.gen_range(2..=4usize);
        let n = batch + rng.gen_range(0..=2usize);
        let bank_ids: Vec<SampleId> = (0..n as u64).map(|i| SampleId(base + i)).collect();
        let bank_feats = unit_rows(rng, n, d);
        let mut picks: Vec<usize> = (0..n).collect();
        picks.shuffle(rng);
        picks.truncate(batch);
        let ids: Vec<SampleId> = picks.iter().map(|&i| bank_ids[i]).collect();
        let views = if singleton {
            picks.iter().map(|&i| bank_feats[i].clone()).collect()
        } else {
            unit_rows(rng, batch, d)
        };
        let raw: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..d).map(|_| standard_normal(rng)).collect())
            .collect();
        let k = if singleton { n } else { rng.gen_range(2..=4.min(n)) };
        let (centroids, assignments) = if singleton {
            (bank_feats.clone(), (0..n).collect())
        } else {
            (
                unit_rows(rng, k, d),
                (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect(),
            )
        };
        sides.push((bank_ids, bank_feats, ids, views, raw, centroids, assignments));
    }
    let (bank_ids_b, bank_feats_b, ids_b, views_b, raw_b, cents_b, asg_b) =
        sides.pop().expect("two sides");
    let (bank_ids_a, bank_feats_a, ids_a, views_a, raw_a, cents_a, asg_a) =
        sides.pop().expect("two sides");
    let mk_bank = |domain, ids: Vec<SampleId>, feats: Vec<Vec<f64>>| {
        FeatureBank::new(
            domain,
            ids.into_iter()
                .zip(feats.into_iter().map(FeatureVector::new))
                .collect(),
        )
        .expect("generated banks are well-formed")
    };
    Fixture {
        ids_a,
        ids_b,
        raw_a: DenseArray::from_rows(&raw_a),
        raw_b: DenseArray::from_rows(&raw_b),
        views_a: DenseArray::from_rows(&views_a),
        views_b: DenseArray::from_rows(&views_b),
        banks: Banks {
            a: mk_bank(Domain::A, bank_ids_a, bank_feats_a),
            b: mk_bank(Domain::B, bank_ids_b, bank_feats_b),
        },
        clusters_a: centroid_model(cents_a, asg_a),
        clusters_b: centroid_model(cents_b, asg_b),
    }
}

impl Fixture {
    /// Puts normalized feature nodes for the given raw leaves on the tape and
    /// assembles the batch. `raw_a`/`raw_b` must already be nodes (trainable
    /// or constant).
    fn batch_from(&self, tape: &mut Tape, raw_a: NodeId, raw_b: NodeId) -> Result<BatchView> {
        let fa = tape.l2_normalize(raw_a)?;
        let fb = tape.l2_normalize(raw_b)?;
        BatchView::new(
            tape,
            self.ids_a.clone(),
            self.ids_b.clone(),
            fa,
            fb,
            self.views_a.clone(),
            self.views_b.clone(),
        )
    }

    fn batch_const(&self, tape: &mut Tape) -> Result<BatchView> {
        let ra = tape.constant(self.raw_a.clone())?;
        let rb = tape.constant(self.raw_b.clone())?;
        self.batch_from(tape, ra, rb)
    }

    /// Normalized online features as plain rows (for the oracle side).
    fn normalized_rows(raw: &DenseArray) -> Vec<Vec<f64>> {
        (0..raw.rows())
            .map(|i| {
                let row = raw.row(i);
                let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                row.iter().map(|x| x / n).collect()
            })
            .collect()
    }
}

/// Property under test: the probability-space cosine distance does not
/// change when both vectors' coordinates are permuted together.
pub fn check_distance_order_invariance(seed: u64, trials: usize) -> PropertyReport {
    let start = Instant::now();
    let tolerance = 1e-12;
    let run = || -> Result<(f64, bool, String)> {
        let mut rng = component_rng(seed, "verify-distance", 0);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let k = rng.gen_range(2..=8);
            let p = random_prob(&mut rng, k);
            let q = random_prob(&mut rng, k);
            let perm = random_permutation(&mut rng, k);
            let mut pp = vec![0.0; k];
            let mut qp = vec![0.0; k];
            for i in 0..k {
                pp[perm[i]] = p[i];
                qp[perm[i]] = q[i];
            }
            let eval = |x: &[f64], y: &[f64]| -> Result<f64> {
                let mut tape = Tape::new();
                let a = tape.constant(DenseArray::vector(x.to_vec()))?;
                let b = tape.constant(DenseArray::vector(y.to_vec()))?;
                let d = in_domain_distance(&mut tape, a, b)?;
                Ok(tape.scalar_value(d))
            };
            let d0 = eval(&p, &q)?;
            let d1 = eval(&pp, &qp)?;
            worst = worst.max((d0 - d1).abs());
        }
        Ok((worst, worst < tolerance, String::new()))
    };
    report("distance-order-invariance", tolerance, trials, start, run())
}

/// Relabeling either domain's clusters must leave the distance-structure loss
/// unchanged.
pub fn check_dd_permutation_invariance(seed: u64, trials: usize) -> PropertyReport {
    let start = Instant::now();
    let tolerance = 1e-10;
    let run = || -> Result<(f64, bool, String)> {
        let mut rng = component_rng(seed, "verify-dd-perm", 0);
        let cfg = LossConfig::default();
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let fx = random_fixture(&mut rng, false);
            let perm_a = random_permutation(&mut rng, fx.clusters_a.k());
            let perm_b = random_permutation(&mut rng, fx.clusters_b.k());
            let ca2 = permute_centroids(&fx.clusters_a, &perm_a)?;
            let cb2 = permute_centroids(&fx.clusters_b, &perm_b)?;
            let eval = |ca: &ClusterModel, cb: &ClusterModel| -> Result<f64> {
                let mut tape = Tape::new();
                let batch = fx.batch_const(&mut tape)?;
                let node = dd_loss(&mut tape, &batch, ca, cb, &cfg)?;
                Ok(tape.scalar_value(node))
            };
            let d0 = eval(&fx.clusters_a, &fx.clusters_b)?;
            let d1 = eval(&ca2, &cb2)?;
            worst = worst.max((d0 - d1).abs());
        }
        Ok((worst, worst < tolerance, String::new()))
    };
    report("dd-permutation-invariance", tolerance, trials, start, run())
}

#[derive(Clone, Copy)]
enum LossKind {
    InstanceWise,
    ClusterWise,
    DistanceStructure,
    SelfEntropy,
    Total,
}

impl LossKind {
    const ALL: [LossKind; 5] = [
        LossKind::InstanceWise,
        LossKind::ClusterWise,
        LossKind::DistanceStructure,
        LossKind::SelfEntropy,
        LossKind::Total,
    ];

    fn name(self) -> &'static str {
        match self {
            LossKind::InstanceWise => "gradient-instance-wise",
            LossKind::ClusterWise => "gradient-cluster-wise",
            LossKind::DistanceStructure => "gradient-distance-structure",
            LossKind::SelfEntropy => "gradient-self-entropy",
            LossKind::Total => "gradient-total",
        }
    }

    fn build(self, tape: &mut Tape, fx: &Fixture, batch: &BatchView, cfg: &LossConfig) -> Result<NodeId> {
        match self {
            LossKind::InstanceWise => instance_wise_loss(tape, batch, &fx.banks, cfg),
            LossKind::ClusterWise => {
                cluster_wise_loss(tape, batch, &fx.banks, &fx.clusters_a, &fx.clusters_b, cfg)
            }
            LossKind::DistanceStructure => {
                dd_loss(tape, batch, &fx.clusters_a, &fx.clusters_b, cfg)
            }
            LossKind::SelfEntropy => {
                self_entropy_loss(tape, batch, &fx.clusters_a, &fx.clusters_b, cfg)
            }
            LossKind::Total => total_loss(
                tape,
                batch,
                &fx.banks,
                Some(&fx.clusters_a),
                Some(&fx.clusters_b),
                cfg.t2, // schedule fully ramped: every component live
                cfg,
            )
            .map(|(node, _)| node),
        }
    }
}

/// Analytic gradients of every loss against central finite differences on
/// random small instances, differentiating through the feature normalization.
pub fn check_gradients(seed: u64) -> Vec<PropertyReport> {
    let tolerance = 1e-4;
    let instances = 20;
    LossKind::ALL
        .iter()
        .enumerate()
        .map(|(idx, &kind)| {
            let start = Instant::now();
            let run = || -> Result<(f64, bool, String)> {
                let mut rng = component_rng(seed, "verify-grad", idx as u64);
                let mut worst: f64 = 0.0;
                let mut coords = 0usize;
                for _ in 0..instances {
                    let fx = random_fixture(&mut rng, false);
                    let cfg = LossConfig::default();
                    let rep = grad_check(
                        |tape, params| {
                            let batch = fx.batch_from(tape, params[0], params[1])?;
                            kind.build(tape, &fx, &batch, &cfg)
                        },
                        &[fx.raw_a.clone(), fx.raw_b.clone()],
                        1e-5,
                    )?;
                    worst = worst.max(rep.max_rel_err);
                    coords += rep.coords_checked;
                }
                Ok((worst, worst < tolerance, format!("{coords} coordinates probed")))
            };
            report(kind.name(), tolerance, instances, start, run())
        })
        .collect()
}

/// With every bank sample its own cluster and views equal to bank entries,
/// the cluster-positive loss must equal the instance-wise loss exactly.
pub fn check_singleton_reduction(seed: u64) -> PropertyReport {
    let start = Instant::now();
    let tolerance = 1e-12;
    let trials = 50;
    let run = || -> Result<(f64, bool, String)> {
        let mut rng = component_rng(seed, "verify-singleton", 0);
        let cfg = LossConfig::default();
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let fx = random_fixture(&mut rng, true);
            let mut tape = Tape::new();
            let batch = fx.batch_const(&mut tape)?;
            let cw = cluster_wise_loss(
                &mut tape,
                &batch,
                &fx.banks,
                &fx.clusters_a,
                &fx.clusters_b,
                &cfg,
            )?;
            let iw = instance_wise_loss(&mut tape, &batch, &fx.banks, &cfg)?;
            worst = worst.max((tape.scalar_value(cw) - tape.scalar_value(iw)).abs());
        }
        Ok((worst, worst < tolerance, String::new()))
    };
    report("singleton-cluster-reduction", tolerance, 50, start, run())
}

/// When both domains share one centroid set (in any order), the
/// distance-structure loss must vanish.
pub fn check_shared_centroid_dd(seed: u64) -> PropertyReport {
    let start = Instant::now();
    let tolerance = 1e-10;
    let trials = 50;
    let run = || -> Result<(f64, bool, String)> {
        let mut rng = component_rng(seed, "verify-shared-dd", 0);
        let cfg = LossConfig::default();
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let fx = random_fixture(&mut rng, false);
            let perm = random_permutation(&mut rng, fx.clusters_a.k());
            let cb = permute_centroids(&fx.clusters_a, &perm)?;
            let mut tape = Tape::new();
            let batch = fx.batch_const(&mut tape)?;
            let node = dd_loss(&mut tape, &batch, &fx.clusters_a, &cb, &cfg)?;
            worst = worst.max(tape.scalar_value(node).abs());
        }
        Ok((worst, worst < tolerance, String::new()))
    };
    report("shared-centroid-dd-zero", tolerance, 50, start, run())
}

/// The clusterer against exhaustive minimum-inertia search on 8-point,
/// 2-cluster instances drawn as two noisy antipodal bundles.
pub fn check_kmeans_oracle(seed: u64) -> PropertyReport {
    let start = Instant::now();
    let tolerance = 1e-9;
    let trials = 20;
    let run = || -> Result<(f64, bool, String)> {
        let mut rng = component_rng(seed, "verify-kmeans", 0);
        let mut worst: f64 = 0.0;
        let mut mismatches = 0usize;
        for t in 0..trials {
            let d = rng.gen_range(3..=6);
            let center = unit_vec(&mut rng, d);
            let mut points = Vec::with_capacity(8);
            for i in 0..8 {
                let sign = if i < 4 { 1.0 } else { -1.0 };
                let mut p: Vec<f64> = center
                    .iter()
                    .map(|&c| sign * c + 0.2 * standard_normal(&mut rng))
                    .collect();
                let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                p.iter_mut().for_each(|x| *x /= n);
                points.push(p);
            }
            let feats: Vec<FeatureVector> = points.iter().cloned().map(FeatureVector::new).collect();
            let model = kmeans(&feats, 2, derive_seed(seed, "verify-kmeans-run", t))?;
            let (best, oracle_assign) = oracles::min_inertia_two_partition(&points);
            worst = worst.max((model.inertia - best).abs());
            let same_partition = (0..8).all(|i| {
                (0..i).all(|j| {
                    (model.assignments[i] == model.assignments[j])
                        == (oracle_assign[i] == oracle_assign[j])
                })
            });
            if !same_partition {
                mismatches += 1;
            }
        }
        let passed = mismatches == 0 && worst < tolerance;
        Ok((worst, passed, format!("{mismatches} partition mismatches")))
    };
    report("kmeans-vs-exhaustive", tolerance, 20, start, run())
}

/// The ranking-based precision against a sort-free repeated-scan oracle,
/// including forced score ties resolved by sample id.
pub fn check_precision_oracle(seed: u64) -> PropertyReport {
    let start = Instant::now();
    let tolerance = 1e-12;
    let trials = 20;
    let run = || -> Result<(f64, bool, String)> {
        let mut rng = component_rng(seed, "verify-precision", 0);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let g = rng.gen_range(10..=50usize);
            let d = rng.gen_range(4..=8);
            let classes = rng.gen_range(2..=5u32);
            let mut ids: Vec<u64> = (0..10_000).collect();
            ids.shuffle(&mut rng);
            let mut feats = unit_rows(&mut rng, g, d);
            for i in 1..g {
                // A fifth of the gallery duplicates an earlier feature so the
                // id tie-break actually fires.
                if rng.gen_range(0..5) == 0 {
                    let j = rng.gen_range(0..i);
                    feats[i] = feats[j].clone();
                }
            }
            let labels: Vec<u32> = (0..g).map(|_| rng.gen_range(0..classes)).collect();
            let gallery: Vec<(SampleId, Vec<f64>)> = (0..g)
                .map(|i| (SampleId(ids[i]), feats[i].clone()))
                .collect();
            let oracle_gallery: Vec<(u64, u32, Vec<f64>)> = (0..g)
                .map(|i| (ids[i], labels[i], feats[i].clone()))
                .collect();
            let query = unit_vec(&mut rng, d);
            let qlabel = rng.gen_range(0..classes);
            for k in [1usize, 3, 5, 10] {
                if k > g {
                    continue;
                }
                let ranked = rank_gallery(&query, &gallery, k)?;
                let mine = ranked.iter().filter(|&&i| labels[i] == qlabel).count() as f64
                    / k as f64;
                let oracle = oracles::precision_at_k(&query, qlabel, &oracle_gallery, k);
                worst = worst.max((mine - oracle).abs());
            }
        }
        Ok((worst, worst < tolerance, String::new()))
    };
    report("precision-vs-brute-force", tolerance, 20, start, run())
}

/// Tape losses in raw-sum mode against the explicit-loop oracle evaluations.
pub fn check_loss_value_oracles(seed: u64) -> Vec<PropertyReport> {
    let tolerance = 1e-10;
    let trials = 25;
    let names = [
        "loss-oracle-instance-wise",
        "loss-oracle-cluster-wise",
        "loss-oracle-distance-structure",
        "loss-oracle-self-entropy",
    ];
    names
        .iter()
        .enumerate()
        .map(|(idx, name)| {
            let start = Instant::now();
            let run = || -> Result<(f64, bool, String)> {
                let mut rng = component_rng(seed, "verify-loss-oracle", idx as u64);
                let cfg = LossConfig {
                    normalize: false,
                    ..LossConfig::default()
                };
                let mut worst: f64 = 0.0;
                for _ in 0..trials {
                    let fx = random_fixture(&mut rng, false);
                    let mut tape = Tape::new();
                    let batch = fx.batch_const(&mut tape)?;
                    let feats_a = Fixture::normalized_rows(&fx.raw_a);
                    let feats_b = Fixture::normalized_rows(&fx.raw_b);
                    let (mine, oracle) = match idx {
                        0 => {
                            let node = instance_wise_loss(&mut tape, &batch, &fx.banks, &cfg)?;
                            let mut o = 0.0;
                            for (feats, ids, views, bank) in [
                                (&feats_a, &fx.ids_a, &fx.views_a, &fx.banks.a),
                                (&feats_b, &fx.ids_b, &fx.views_b, &fx.banks.b),
                            ] {
                                let views: Vec<Vec<f64>> =
                                    (0..ids.len()).map(|i| views.row(i).to_vec()).collect();
                                let negs: Vec<Vec<f64>> = bank
                                    .feature_vectors()
                                    .iter()
                                    .map(|f| f.as_slice().to_vec())
                                    .collect();
                                o += oracles::instance_wise(feats, &views, &negs, cfg.tau);
                            }
                            (tape.scalar_value(node), o)
                        }
                        1 => {
                            let node = cluster_wise_loss(
                                &mut tape,
                                &batch,
                                &fx.banks,
                                &fx.clusters_a,
                                &fx.clusters_b,
                                &cfg,
                            )?;
                            let mut o = 0.0;
                            for (feats, ids, bank, clusters) in [
                                (&feats_a, &fx.ids_a, &fx.banks.a, &fx.clusters_a),
                                (&feats_b, &fx.ids_b, &fx.banks.b, &fx.clusters_b),
                            ] {
                                let rows: Vec<Vec<f64>> = bank
                                    .feature_vectors()
                                    .iter()
                                    .map(|f| f.as_slice().to_vec())
                                    .collect();
                                let positives: Vec<Vec<usize>> = ids
                                    .iter()
                                    .map(|&id| {
                                        let y = clusters.assignments[bank.row_of(id)?];
                                        Ok((0..bank.len())
                                            .filter(|&r| clusters.assignments[r] == y)
                                            .collect())
                                    })
                                    .collect::<Result<_>>()?;
                                o += oracles::cluster_wise(feats, &rows, &positives, cfg.tau);
                            }
                            (tape.scalar_value(node), o)
                        }
                        2 => {
                            let node = dd_loss(
                                &mut tape,
                                &batch,
                                &fx.clusters_a,
                                &fx.clusters_b,
                                &cfg,
                            )?;
                            let o = oracles::dd(
                                &feats_a,
                                &feats_b,
                                &fx.clusters_a.centroids,
                                &fx.clusters_b.centroids,
                                cfg.phi,
                            );
                            (tape.scalar_value(node), o)
                        }
                        _ => {
                            let node = self_entropy_loss(
                                &mut tape,
                                &batch,
                                &fx.clusters_a,
                                &fx.clusters_b,
                                &cfg,
                            )?;
                            let o = oracles::self_entropy(
                                &feats_a,
                                &feats_b,
                                &fx.clusters_a.centroids,
                                &fx.clusters_b.centroids,
                                cfg.phi,
                            );
                            (tape.scalar_value(node), o)
                        }
                    };
                    worst = worst.max((mine - oracle).abs());
                }
                Ok((worst, worst < tolerance, String::new()))
            };
            report(name, tolerance, trials, start, run())
        })
        .collect()
}

/// The cluster-loss ramp at its contractual sample points.
pub fn check_lambda_schedule() -> PropertyReport {
    let start = Instant::now();
    let tolerance = 1e-12;
    let run = || -> Result<(f64, bool, String)> {
        let mut worst: f64 = 0.0;
        for alpha in [1.0, 0.7] {
            let cfg = LossConfig {
                alpha,
                t1: 20,
                t2: 100,
                ..LossConfig::default()
            };
            for (epoch, expected) in [
                (10usize, 0.0),
                (20, 0.0),
                (60, alpha / 2.0),
                (100, alpha),
                (150, alpha),
            ] {
                worst = worst.max((lambda_schedule(epoch, &cfg) - expected).abs());
            }
        }
        Ok((worst, worst < tolerance, String::new()))
    };
    report("lambda-schedule", tolerance, 10, start, run())
}

/// The cosine learning-rate decay at its endpoints and midpoint.
pub fn check_cosine_schedule() -> PropertyReport {
    let start = Instant::now();
    let tolerance = 1e-12;
    let run = || -> Result<(f64, bool, String)> {
        let mut worst: f64 = 0.0;
        for lr0 in [2e-4, 1.0] {
            worst = worst.max((cosine_lr(0, 200, lr0) - lr0).abs());
            worst = worst.max((cosine_lr(100, 200, lr0) - lr0 / 2.0).abs());
            worst = worst.max(cosine_lr(200, 200, lr0).abs());
        }
        Ok((worst, worst < tolerance, String::new()))
    };
    report("cosine-lr-schedule", tolerance, 6, start, run())
}

/// Entropy of random probability vectors stays within `[0, ln K]`; the
/// uniform vector attains `ln K`.
pub fn check_entropy_bounds(seed: u64, trials: usize) -> PropertyReport {
    let start = Instant::now();
    let tolerance = 1e-12;
    let run = || -> Result<(f64, bool, String)> {
        let mut rng = component_rng(seed, "verify-entropy", 0);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let k = rng.gen_range(2..=16usize);
            let p = ProbabilityVector::new(random_prob(&mut rng, k))?;
            let h = p.entropy();
            worst = worst.max(-h).max(h - (k as f64).ln());
        }
        for k in 2..=16usize {
            let h = ProbabilityVector::uniform(k)?.entropy();
            worst = worst.max((h - (k as f64).ln()).abs());
        }
        Ok((worst.max(0.0), worst < tolerance, String::new()))
    };
    report("entropy-bounds", tolerance, trials, start, run())
}

/// Options for [`run_all`].
#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    pub seed: u64,
    /// Trial count for the permutation-invariance sweep.
    pub trials: usize,
    /// Restrict the suite to the finite-difference gradient checks.
    pub grad_only: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            seed: 0,
            trials: 1000,
            grad_only: false,
        }
    }
}

/// Runs the whole property suite. Each report is independent; a failure in
/// one check never prevents the others from running.
pub fn run_all(opts: &CheckOptions) -> Vec<PropertyReport> {
    let mut reports = Vec::new();
    if !opts.grad_only {
        reports.push(check_distance_order_invariance(opts.seed, opts.trials));
        reports.push(check_dd_permutation_invariance(opts.seed, 100));
    }
    reports.extend(check_gradients(opts.seed));
    if !opts.grad_only {
        reports.push(check_singleton_reduction(opts.seed));
        reports.push(check_shared_centroid_dd(opts.seed));
        reports.push(check_kmeans_oracle(opts.seed));
        reports.push(check_precision_oracle(opts.seed));
        reports.extend(check_loss_value_oracles(opts.seed));
        reports.push(check_lambda_schedule());
        reports.push(check_cosine_schedule());
        reports.push(check_entropy_bounds(opts.seed, 10_000));
    }
    reports
}
