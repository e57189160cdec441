//! The training objective.
//!
//! In-domain: an instance-wise InfoNCE term pulls each feature toward its own
//! momentum view against a bank of negatives, and a cluster-wise term
//! (weighted by a warmup-then-ramp schedule) pulls it toward every bank
//! feature sharing its pseudo-label. Cross-domain: for same-domain sample
//! pairs, the cosine distance between their soft cluster-assignment vectors
//! is computed once under each domain's centroids, and the squared difference
//! of those two distances is penalized — aligning the two cluster geometries
//! without any paired supervision — while a self-entropy term keeps
//! assignments confident. All terms are differentiable tape ops.

use serde::{Deserialize, Serialize};

use crate::bank::{Banks, FeatureBank};
use crate::clustering::ClusterModel;
use crate::data::SampleId;
use crate::diffmath::{DenseArray, NodeId, Shape, Tape};
use crate::error::{Error, Result};

/// Weights, temperatures, schedule knobs, and component toggles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Contrastive temperature for the instance- and cluster-wise terms.
    pub tau: f64,
    /// Temperature for soft cluster-assignment probabilities.
    pub phi: f64,
    /// Final weight of the cluster-wise term once the ramp completes.
    pub alpha: f64,
    /// Weight of the distance-of-distance alignment term.
    pub beta: f64,
    /// Weight of the self-entropy term.
    pub gamma: f64,
    /// Last epoch of the warmup: the cluster-wise weight is 0 through `t1`.
    pub t1: usize,
    /// First epoch at which the cluster-wise weight reaches `alpha`.
    pub t2: usize,
    pub use_cw: bool,
    pub use_dd: bool,
    pub use_se: bool,
    /// Divide every component by its number of contributing terms so values
    /// are comparable across batch sizes. `false` keeps literal raw sums.
    pub normalize: bool,
    /// Restrict contrastive negatives to the batch's own momentum views
    /// instead of the full bank.
    pub in_batch_negatives: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            tau: 0.2,
            phi: 0.1,
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.5,
            t1: 20,
            t2: 100,
            use_cw: true,
            use_dd: true,
            use_se: true,
            normalize: true,
            in_batch_negatives: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidConfig("tau must be positive".into()));
        }
        if !(self.phi.is_finite() && self.phi > 0.0) {
            return Err(Error::InvalidConfig("phi must be positive".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be non-negative")));
            }
        }
        if self.t2 < self.t1 {
            return Err(Error::InvalidConfig(format!(
                "ramp end t2 = {} is before warmup end t1 = {}",
                self.t2, self.t1
            )));
        }
        Ok(())
    }
}

/// Named ablation presets over the loss toggles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Instance-wise only.
    V1,
    /// Adds the cluster-wise term.
    V2,
    /// Adds the self-entropy term on top of v2.
    V3,
    /// Everything, including distance-of-distance alignment.
    Full,
}

impl Variant {
    pub fn apply(self, cfg: &mut LossConfig) {
        let (cw, se, dd) = match self {
            Variant::V1 => (false, false, false),
            Variant::V2 => (true, false, false),
            Variant::V3 => (true, true, false),
            Variant::Full => (true, true, true),
        };
        cfg.use_cw = cw;
        cfg.use_se = se;
        cfg.use_dd = dd;
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            "v3" => Ok(Variant::V3),
            "full" => Ok(Variant::Full),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant '{other}' (expected v1, v2, v3 or full)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::V3 => "v3",
            Variant::Full => "full",
        }
    }
}

/// One training batch on the tape: fresh online features (gradient path) and
/// momentum views (constants) for a half-A / half-B sample selection.
pub struct BatchView {
    pub ids_a: Vec<SampleId>,
    pub ids_b: Vec<SampleId>,
    /// `(len(ids_a), d)` online-encoder output node.
    pub feats_a: NodeId,
    /// `(len(ids_b), d)` online-encoder output node.
    pub feats_b: NodeId,
    /// Momentum-encoder outputs for the same samples, fixed for this step.
    pub views_a: DenseArray,
    pub views_b: DenseArray,
}

impl BatchView {
    pub fn new(
        tape: &Tape,
        ids_a: Vec<SampleId>,
        ids_b: Vec<SampleId>,
        feats_a: NodeId,
        feats_b: NodeId,
        views_a: DenseArray,
        views_b: DenseArray,
    ) -> Result<Self> {
        if ids_a.is_empty() || ids_b.is_empty() {
            return Err(Error::InvalidInput("batch needs samples from both domains".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for id in ids_a.iter().chain(&ids_b) {
            if !seen.insert(*id) {
                return Err(Error::InvalidInput(format!(
                    "duplicate sample id {} in batch",
                    id.0
                )));
            }
        }
        for (name, ids, feats, views) in [
            ("a", &ids_a, feats_a, &views_a),
            ("b", &ids_b, feats_b, &views_b),
        ] {
            let want_rows = ids.len();
            match tape.shape(feats) {
                Shape::Matrix(r, _) if r == want_rows => {}
                s => {
                    return Err(Error::InvalidInput(format!(
                        "feats_{name} has shape {s}, expected ({want_rows}, d)"
                    )))
                }
            }
            if views.shape() != tape.shape(feats) {
                return Err(Error::InvalidInput(format!(
                    "views_{name} shape {} does not match features {}",
                    views.shape(),
                    tape.shape(feats)
                )));
            }
        }
        Ok(BatchView {
            ids_a,
            ids_b,
            feats_a,
            feats_b,
            views_a,
            views_b,
        })
    }

    fn side(&self, which: Side) -> (&[SampleId], NodeId, &DenseArray) {
        match which {
            Side::A => (&self.ids_a, self.feats_a, &self.views_a),
            Side::B => (&self.ids_b, self.feats_b, &self.views_b),
        }
    }
}

#[derive(Clone, Copy)]
enum Side {
    A,
    B,
}

const SIDES: [Side; 2] = [Side::A, Side::B];

/// Cluster-wise weight schedule: zero through epoch `t1`, linear ramp to
/// `alpha` strictly between `t1` and `t2`, then flat at `alpha`.
pub fn lambda_schedule(epoch: usize, cfg: &LossConfig) -> f64 {
    if epoch <= cfg.t1 {
        0.0
    } else if epoch >= cfg.t2 {
        cfg.alpha
    } else {
        cfg.alpha * (epoch - cfg.t1) as f64 / (cfg.t2 - cfg.t1) as f64
    }
}

/// The columns the contrastive logits run over: either the full bank or just
/// the batch's own views.
struct Negatives {
    column_ids: Vec<SampleId>,
    /// `(d, n)` matrix of negative features.
    matrix_t: DenseArray,
}

fn negatives_for(
    ids: &[SampleId],
    views: &DenseArray,
    bank: &FeatureBank,
    cfg: &LossConfig,
) -> Negatives {
    if cfg.in_batch_negatives {
        let (rows, d) = (views.rows(), views.cols());
        let mut data = vec![0.0; rows * d];
        for r in 0..rows {
            for (c, &v) in views.row(r).iter().enumerate() {
                data[c * rows + r] = v;
            }
        }
        Negatives {
            column_ids: ids.to_vec(),
            matrix_t: DenseArray::matrix(d, rows, data),
        }
    } else {
        Negatives {
            column_ids: bank.ids().to_vec(),
            matrix_t: bank.matrix_t(),
        }
    }
}

/// `(batch, n)` similarity logits against the negative set, scaled by `1/tau`.
fn contrastive_logits(
    tape: &mut Tape,
    feats: NodeId,
    negatives: &Negatives,
    tau: f64,
) -> Result<NodeId> {
    let nt = tape.constant(negatives.matrix_t.clone())?;
    let sims = tape.matmul(feats, nt)?;
    tape.scale(sims, 1.0 / tau)
}

/// Raw instance-wise sum over one domain's batch: `sum_i [lse_i - s_ii/tau]`
/// where `s_ii` is the similarity of sample `i` to its own momentum view.
fn instance_wise_sum(
    tape: &mut Tape,
    feats: NodeId,
    views: &DenseArray,
    negatives: &Negatives,
    tau: f64,
) -> Result<NodeId> {
    let logits = contrastive_logits(tape, feats, negatives, tau)?;
    let lse = tape.log_sum_exp(logits)?;
    let denom = tape.sum(lse)?;
    let v = tape.constant(views.clone())?;
    let pos = tape.dot(feats, v)?;
    let pos = tape.scale(pos, 1.0 / tau)?;
    tape.sub(denom, pos)
}

/// Instance-wise contrastive loss over both domains of the batch.
///
/// Each sample's fresh feature must match its own momentum view against all
/// negatives of the same domain. With `normalize` the sum is divided by the
/// number of batch samples.
pub fn instance_wise_loss(
    tape: &mut Tape,
    batch: &BatchView,
    banks: &Banks,
    cfg: &LossConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    let mut total = None;
    for side in SIDES {
        let (ids, feats, views) = batch.side(side);
        let bank = banks.get(side_domain(side));
        let negatives = negatives_for(ids, views, bank, cfg);
        let s = instance_wise_sum(tape, feats, views, &negatives, cfg.tau)?;
        total = Some(match total {
            None => s,
            Some(t) => tape.add(t, s)?,
        });
    }
    let total = total.expect("two sides were summed");
    if cfg.normalize {
        let terms = (batch.ids_a.len() + batch.ids_b.len()) as f64;
        tape.scale(total, 1.0 / terms)
    } else {
        Ok(total)
    }
}

fn side_domain(side: Side) -> crate::data::Domain {
    match side {
        Side::A => crate::data::Domain::A,
        Side::B => crate::data::Domain::B,
    }
}

/// Positive-weight matrix for the cluster-wise term: entry `(r, c)` is
/// `1/|P(r)|` when negative column `c` carries the same pseudo-label as batch
/// row `r`, else zero. Every row sums to one.
fn positive_weights(
    ids: &[SampleId],
    negatives: &Negatives,
    bank: &FeatureBank,
    clusters: &ClusterModel,
) -> Result<DenseArray> {
    if clusters.assignments.len() != bank.len() {
        return Err(Error::InvalidInput(format!(
            "cluster assignments cover {} samples but the bank holds {}",
            clusters.assignments.len(),
            bank.len()
        )));
    }
    let label_of = |id: SampleId| -> Result<usize> {
        Ok(clusters.assignments[bank.row_of(id)?])
    };
    let col_labels: Vec<usize> = negatives
        .column_ids
        .iter()
        .map(|&id| label_of(id))
        .collect::<Result<_>>()?;
    let n = col_labels.len();
    let mut data = vec![0.0; ids.len() * n];
    for (r, &id) in ids.iter().enumerate() {
        let y = label_of(id)?;
        let members = col_labels.iter().filter(|&&l| l == y).count();
        // The sample itself is always a negative-set column with its own
        // label, so members >= 1.
        let w = 1.0 / members as f64;
        for (c, &l) in col_labels.iter().enumerate() {
            if l == y {
                data[r * n + c] = w;
            }
        }
    }
    Ok(DenseArray::matrix(ids.len(), n, data))
}

/// Cluster-wise contrastive loss over both domains: each sample attracts the
/// average of all same-pseudo-label bank features instead of only its own
/// view. With singleton clusters (every sample its own cluster) and a bank
/// equal to the momentum views this reduces exactly to the instance-wise
/// loss.
pub fn cluster_wise_loss(
    tape: &mut Tape,
    batch: &BatchView,
    banks: &Banks,
    clusters_a: &ClusterModel,
    clusters_b: &ClusterModel,
    cfg: &LossConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    let mut total = None;
    for side in SIDES {
        let (ids, feats, views) = batch.side(side);
        let bank = banks.get(side_domain(side));
        let clusters = match side {
            Side::A => clusters_a,
            Side::B => clusters_b,
        };
        let negatives = negatives_for(ids, views, bank, cfg);
        let logits = contrastive_logits(tape, feats, &negatives, cfg.tau)?;
        let lse = tape.log_sum_exp(logits)?;
        let denom = tape.sum(lse)?;
        let w = positive_weights(ids, &negatives, bank, clusters)?;
        let w = tape.constant(w)?;
        let pos = tape.dot(logits, w)?;
        let s = tape.sub(denom, pos)?;
        total = Some(match total {
            None => s,
            Some(t) => tape.add(t, s)?,
        });
    }
    let total = total.expect("two sides were summed");
    if cfg.normalize {
        let terms = (batch.ids_a.len() + batch.ids_b.len()) as f64;
        tape.scale(total, 1.0 / terms)
    } else {
        Ok(total)
    }
}

/// Combined in-domain loss: instance-wise plus `lambda(epoch)` times the
/// cluster-wise term. The cluster-wise subgraph is only built once the
/// schedule weight is positive (and clusters exist), so early epochs match
/// the pure instance-wise loss bit for bit.
pub fn in_domain_loss(
    tape: &mut Tape,
    batch: &BatchView,
    banks: &Banks,
    clusters_a: Option<&ClusterModel>,
    clusters_b: Option<&ClusterModel>,
    epoch: usize,
    cfg: &LossConfig,
) -> Result<NodeId> {
    let iw = instance_wise_loss(tape, batch, banks, cfg)?;
    let lambda = lambda_schedule(epoch, cfg);
    if !cfg.use_cw || lambda == 0.0 {
        return Ok(iw);
    }
    let (Some(ca), Some(cb)) = (clusters_a, clusters_b) else {
        return Err(Error::InvalidInput(
            "cluster-wise loss is active but no cluster models were provided".into(),
        ));
    };
    let cw = cluster_wise_loss(tape, batch, banks, ca, cb, cfg)?;
    let cw = tape.scale(cw, lambda)?;
    tape.add(iw, cw)
}

/// Soft cluster-assignment probabilities of a `(batch, d)` feature node under
/// a centroid set: a temperature-`phi` softmax over feature-centroid
/// similarities. Returns `(probabilities, log_probabilities)`, both `(batch, k)`.
fn soft_assignments(
    tape: &mut Tape,
    feats: NodeId,
    clusters: &ClusterModel,
    phi: f64,
) -> Result<(NodeId, NodeId)> {
    if !(phi.is_finite() && phi > 0.0) {
        return Err(Error::InvalidConfig("phi must be positive".into()));
    }
    let ct = tape.constant(clusters.centroid_matrix_t())?;
    let sims = tape.matmul(feats, ct)?;
    let logits = tape.scale(sims, 1.0 / phi)?;
    let lse = tape.log_sum_exp(logits)?;
    let logp = tape.sub_col_broadcast(logits, lse)?;
    let p = tape.exp(logp)?;
    Ok((p, logp))
}

/// Soft cluster-assignment probabilities for a single `(d,)` feature node.
/// The output is a `(k,)` vector that sums to one.
pub fn clustering_probabilities(
    tape: &mut Tape,
    feature: NodeId,
    clusters: &ClusterModel,
    phi: f64,
) -> Result<NodeId> {
    match tape.shape(feature) {
        Shape::Vector(d) if d == clusters.dim() => {}
        s => {
            return Err(Error::InvalidInput(format!(
                "feature shape {s} does not match centroid dimension {}",
                clusters.dim()
            )))
        }
    }
    if !(phi.is_finite() && phi > 0.0) {
        return Err(Error::InvalidConfig("phi must be positive".into()));
    }
    let ct = tape.constant(clusters.centroid_matrix_t())?;
    let sims = tape.matmul(feature, ct)?;
    let logits = tape.scale(sims, 1.0 / phi)?;
    let lse = tape.log_sum_exp(logits)?;
    let logp = tape.sub_col_broadcast(logits, lse)?;
    tape.exp(logp)
}

/// Cosine distance `1 - cos(p, q)` between two probability vectors, as a
/// differentiable scalar node. Invariant under any simultaneous permutation
/// of both vectors' coordinates.
pub fn in_domain_distance(tape: &mut Tape, p: NodeId, q: NodeId) -> Result<NodeId> {
    let np = tape.l2_normalize(p)?;
    let nq = tape.l2_normalize(q)?;
    let cos = tape.dot(np, nq)?;
    let neg = tape.scale(cos, -1.0)?;
    tape.add_scalar(neg, 1.0)
}

/// Squared difference of two scalar distances — the elementary
/// distance-of-distance penalty.
pub fn dd_pair(tape: &mut Tape, d_first: NodeId, d_second: NodeId) -> Result<NodeId> {
    for d in [d_first, d_second] {
        if !tape.shape(d).is_scalar() {
            return Err(Error::InvalidInput(format!(
                "dd_pair expects scalar distances, got {}",
                tape.shape(d)
            )));
        }
    }
    let diff = tape.sub(d_first, d_second)?;
    tape.mul(diff, diff)
}

/// Distance-of-distance alignment over both batch sides.
///
/// For every ordered pair of same-domain batch samples, their soft-assignment
/// vectors are computed under domain A's centroids and under domain B's
/// centroids; the squared difference between the two resulting cosine
/// distances is summed. Sides with fewer than two samples contribute zero.
/// The value is invariant to relabeling either domain's clusters.
pub fn dd_loss(
    tape: &mut Tape,
    batch: &BatchView,
    clusters_a: &ClusterModel,
    clusters_b: &ClusterModel,
    cfg: &LossConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    let mut total = None;
    let mut pair_terms = 0usize;
    for side in SIDES {
        let (ids, feats, _) = batch.side(side);
        let b = ids.len();
        if b < 2 {
            continue;
        }
        let (pa, _) = soft_assignments(tape, feats, clusters_a, cfg.phi)?;
        let (pb, _) = soft_assignments(tape, feats, clusters_b, cfg.phi)?;
        // Normalized probability rows, cached so each row is normalized once.
        let mut rows_a = Vec::with_capacity(b);
        let mut rows_b = Vec::with_capacity(b);
        for i in 0..b {
            let ra = tape.row(pa, i)?;
            rows_a.push(tape.l2_normalize(ra)?);
            let rb = tape.row(pb, i)?;
            rows_b.push(tape.l2_normalize(rb)?);
        }
        for i in 0..b {
            for j in (i + 1)..b {
                let cos_a = tape.dot(rows_a[i], rows_a[j])?;
                let cos_b = tape.dot(rows_b[i], rows_b[j])?;
                // (1 - cos_a) - (1 - cos_b) = cos_b - cos_a
                let diff = tape.sub(cos_b, cos_a)?;
                let sq = tape.mul(diff, diff)?;
                total = Some(match total {
                    None => sq,
                    Some(t) => tape.add(t, sq)?,
                });
            }
        }
        pair_terms += b * (b - 1);
    }
    let total = match total {
        Some(t) => tape.scale(t, 2.0)?, // unordered pairs counted once, doubled
        None => tape.scalar_const(0.0)?,
    };
    if cfg.normalize && pair_terms > 0 {
        tape.scale(total, 1.0 / pair_terms as f64)
    } else {
        Ok(total)
    }
}

/// Self-entropy sharpening: the summed Shannon entropy of every batch
/// sample's soft assignments under both domains' centroids. Minimizing it
/// pushes assignments toward one-hot.
pub fn self_entropy_loss(
    tape: &mut Tape,
    batch: &BatchView,
    clusters_a: &ClusterModel,
    clusters_b: &ClusterModel,
    cfg: &LossConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    let mut total = None;
    let mut terms = 0usize;
    for side in SIDES {
        let (ids, feats, _) = batch.side(side);
        for clusters in [clusters_a, clusters_b] {
            let (p, logp) = soft_assignments(tape, feats, clusters, cfg.phi)?;
            let plogp = tape.dot(p, logp)?;
            let h = tape.scale(plogp, -1.0)?;
            total = Some(match total {
                None => h,
                Some(t) => tape.add(t, h)?,
            });
        }
        terms += 2 * ids.len();
    }
    let total = total.expect("both sides contribute");
    if cfg.normalize {
        tape.scale(total, 1.0 / terms as f64)
    } else {
        Ok(total)
    }
}

/// Per-component values of one total-loss evaluation. Component entries are
/// unweighted; `total` applies the schedule and the beta/gamma weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub iw: f64,
    pub cw: f64,
    pub dd: f64,
    pub se: f64,
    pub lambda: f64,
    pub total: f64,
}

/// The full objective:
/// `instance + lambda(epoch) * cluster + beta * dd + gamma * entropy`,
/// honoring the component toggles. Components that are toggled off (or whose
/// cluster models are absent) contribute nothing and report zero.
pub fn total_loss(
    tape: &mut Tape,
    batch: &BatchView,
    banks: &Banks,
    clusters_a: Option<&ClusterModel>,
    clusters_b: Option<&ClusterModel>,
    epoch: usize,
    cfg: &LossConfig,
) -> Result<(NodeId, LossBreakdown)> {
    cfg.validate()?;
    let iw = instance_wise_loss(tape, batch, banks, cfg)?;
    let mut total = iw;
    let lambda = lambda_schedule(epoch, cfg);
    let mut breakdown = LossBreakdown {
        iw: tape.scalar_value(iw),
        cw: 0.0,
        dd: 0.0,
        se: 0.0,
        lambda,
        total: 0.0,
    };

    let clusters = clusters_a.zip(clusters_b);
    if cfg.use_cw && lambda > 0.0 {
        let (ca, cb) = clusters.ok_or_else(|| {
            Error::InvalidInput(
                "cluster-wise loss is active but no cluster models were provided".into(),
            )
        })?;
        let cw = cluster_wise_loss(tape, batch, banks, ca, cb, cfg)?;
        breakdown.cw = tape.scalar_value(cw);
        let weighted = tape.scale(cw, lambda)?;
        total = tape.add(total, weighted)?;
    }
    if cfg.use_dd && cfg.beta > 0.0 {
        if let Some((ca, cb)) = clusters {
            let dd = dd_loss(tape, batch, ca, cb, cfg)?;
            breakdown.dd = tape.scalar_value(dd);
            let weighted = tape.scale(dd, cfg.beta)?;
            total = tape.add(total, weighted)?;
        }
    }
    if cfg.use_se && cfg.gamma > 0.0 {
        if let Some((ca, cb)) = clusters {
            let se = self_entropy_loss(tape, batch, ca, cb, cfg)?;
            breakdown.se = tape.scalar_value(se);
            let weighted = tape.scale(se, cfg.gamma)?;
            total = tape.add(total, weighted)?;
        }
    }
    breakdown.total = tape.scalar_value(total);
    Ok((total, breakdown))
}

/// A validated discrete probability vector with entropy helpers, used by the
/// evaluation-side checks (the differentiable path works on tape nodes).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("probability vector cannot be empty".into()));
        }
        if values.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(Error::InvalidInput(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ProbabilityVector(values))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("probability vector cannot be empty".into()));
        }
        Ok(ProbabilityVector(vec![1.0 / k as f64; k]))
    }

    /// Softmax of arbitrary finite logits, computed via max subtraction.
    pub fn softmax(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::InvalidInput("softmax of an empty slice".into()));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("softmax logits must be finite".into()));
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        Ok(ProbabilityVector(exps.into_iter().map(|e| e / z).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Shannon entropy in nats, with the `0 ln 0 = 0` convention.
    pub fn entropy(&self) -> f64 {
        self.0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }
}
