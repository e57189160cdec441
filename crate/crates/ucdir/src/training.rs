//! The training loop: per-epoch bank/cluster refresh, half-and-half batches,
//! SGD with momentum under a cosine schedule, momentum-encoder tracking, and
//! per-epoch metrics/checkpoint output. Deterministic end to end for a fixed
//! seed — two runs produce byte-identical metrics files.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bank::{Banks, FeatureBank};
use crate::checkpoint::Checkpoint;
use crate::clustering::{kmeans, ClusterModel};
use crate::data::{Augmentor, Dataset, SampleId, TrainView};
use crate::diffmath::{DenseArray, Tape};
use crate::encoder::{
    encode_matrix, encode_on_tape, init_params, insert_params, EncoderParams, FeatureVector,
    MomentumEncoder,
};
use crate::error::{Error, Result};
use crate::evaluation::evaluate_both;
use crate::losses::{total_loss, BatchView, LossBreakdown, LossConfig};
use crate::seeding::{component_rng, derive_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per step, split half and half between the domains.
    pub batch_size: usize,
    /// Peak learning rate; the cosine schedule decays it to zero over the run.
    pub lr0: f64,
    pub sgd_momentum: f64,
    /// EMA coefficient of the momentum encoder.
    pub encoder_momentum: f64,
    /// `[d_in, hidden..., d_out]` for the encoder.
    pub layer_dims: Vec<usize>,
    /// Clusters per domain.
    pub k: usize,
    pub seed: u64,
    pub augment: Augmentor,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            lr0: 2e-4,
            sgd_momentum: 0.9,
            encoder_momentum: 0.99,
            layer_dims: vec![16, 32, 16],
            k: 4,
            seed: 0,
            augment: Augmentor::default(),
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 || !self.batch_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(
                "batch_size must be an even number of at least 2".into(),
            ));
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(Error::InvalidConfig("lr0 must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sgd_momentum) {
            return Err(Error::InvalidConfig("sgd_momentum must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.encoder_momentum) {
            return Err(Error::InvalidConfig(
                "encoder_momentum must lie in [0, 1]".into(),
            ));
        }
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "layer_dims needs at least [d_in, d_out], all positive".into(),
            ));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        self.augment.validate()?;
        self.loss.validate()
    }
}

/// When and at which cutoffs to run retrieval evaluation during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub ks: Vec<usize>,
    /// Evaluate every `interval` epochs (and always on the last).
    /// Zero disables evaluation entirely.
    pub interval: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            ks: vec![1, 5, 15],
            interval: 5,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.interval > 0 && self.ks.is_empty() {
            return Err(Error::InvalidConfig(
                "evaluation enabled but no k values given".into(),
            ));
        }
        if self.ks.contains(&0) {
            return Err(Error::InvalidConfig("evaluation k values must be positive".into()));
        }
        Ok(())
    }

    fn due(&self, epoch: usize, total_epochs: usize) -> bool {
        if self.interval == 0 {
            return false;
        }
        (epoch + 1).is_multiple_of(self.interval) || epoch + 1 == total_epochs
    }
}

/// Cosine-annealed learning rate: `lr0` at step 0, half at the midpoint,
/// exactly zero at `total_steps`.
pub fn cosine_lr(step: usize, total_steps: usize, lr0: f64) -> f64 {
    if total_steps == 0 || step >= total_steps {
        return 0.0;
    }
    0.5 * lr0 * (1.0 + (std::f64::consts::PI * step as f64 / total_steps as f64).cos())
}

/// One SGD-with-momentum update: `v <- momentum * v + g; p <- p - lr * v`.
/// Gradient arrays must be in the canonical `w0, b0, w1, b1, ...` order.
pub fn sgd_step(
    params: &mut EncoderParams,
    grads: &[&DenseArray],
    velocity: &mut [DenseArray],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    let flat = params.flat_mut();
    if grads.len() != flat.len() || velocity.len() != flat.len() {
        return Err(Error::Training(format!(
            "got {} gradients and {} velocity arrays for {} parameter arrays",
            grads.len(),
            velocity.len(),
            flat.len()
        )));
    }
    for (i, ((p, g), v)) in flat.into_iter().zip(grads).zip(velocity).enumerate() {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(Error::Training(format!(
                "parameter array {i}: shape mismatch between parameter, gradient, and velocity"
            )));
        }
        if !g.all_finite() {
            return Err(Error::Training(format!(
                "parameter array {i}: non-finite gradient"
            )));
        }
        for (pv, (gv, vv)) in p
            .data_mut()
            .iter_mut()
            .zip(g.data().iter().zip(v.data_mut()))
        {
            *vv = momentum * *vv + gv;
            *pv -= lr * *vv;
        }
    }
    Ok(())
}

/// Everything the loop mutates.
pub struct TrainState {
    pub theta: EncoderParams,
    pub theta_m: MomentumEncoder,
    pub velocity: Vec<DenseArray>,
    pub banks: Option<Banks>,
    pub clusters_a: Option<ClusterModel>,
    pub clusters_b: Option<ClusterModel>,
    /// Epochs fully completed.
    pub epochs_done: usize,
    /// Optimizer steps taken across all epochs.
    pub steps_done: usize,
}

/// Fresh state: Xavier-initialized online encoder, momentum twin starting as
/// an exact copy, zero velocity, no banks yet.
pub fn init_state(cfg: &TrainConfig) -> Result<TrainState> {
    cfg.validate()?;
    let theta = init_params(&cfg.layer_dims, derive_seed(cfg.seed, "encoder-init", 0))?;
    let theta_m = MomentumEncoder::new(theta.clone(), cfg.encoder_momentum)?;
    let velocity = theta
        .flat()
        .into_iter()
        .map(|p| DenseArray::zeros(p.shape()))
        .collect();
    Ok(TrainState {
        theta,
        theta_m,
        velocity,
        banks: None,
        clusters_a: None,
        clusters_b: None,
        epochs_done: 0,
        steps_done: 0,
    })
}

/// Rebuilds state from a checkpoint. Banks and clusters are left empty; the
/// next epoch's refresh recreates them from the momentum encoder, which is
/// why checkpoints only make sense at epoch boundaries.
pub fn state_from_checkpoint(ckpt: &Checkpoint, cfg: &TrainConfig) -> Result<TrainState> {
    cfg.validate()?;
    if ckpt.layer_dims != cfg.layer_dims {
        return Err(Error::Checkpoint(format!(
            "checkpoint layer_dims {:?} do not match config {:?}",
            ckpt.layer_dims, cfg.layer_dims
        )));
    }
    if ckpt.seed != cfg.seed {
        return Err(Error::Checkpoint(format!(
            "checkpoint seed {} does not match config seed {}; resuming would not reproduce",
            ckpt.seed, cfg.seed
        )));
    }
    let (theta, theta_m, velocity) = ckpt.restore()?;
    Ok(TrainState {
        theta,
        theta_m,
        velocity,
        banks: None,
        clusters_a: None,
        clusters_b: None,
        epochs_done: ckpt.epoch,
        steps_done: ckpt.step,
    })
}

fn encode_bank(
    params: &EncoderParams,
    domain: crate::data::Domain,
    rows: &[(SampleId, &[f64])],
) -> Result<FeatureBank> {
    let raws: Vec<Vec<f64>> = rows.iter().map(|(_, r)| r.to_vec()).collect();
    let matrix = DenseArray::from_rows(&raws);
    let feats = encode_matrix(params, &matrix)?;
    FeatureBank::new(
        domain,
        rows.iter()
            .enumerate()
            .map(|(i, (id, _))| (*id, FeatureVector::new(feats.row(i).to_vec())))
            .collect(),
    )
}

/// Re-encodes every sample with the momentum encoder and re-clusters each
/// domain. Runs at the start of every epoch; the clustering seeds derive from
/// `(seed, domain, epoch)`, so a resumed run re-creates identical clusters.
pub fn refresh_banks_and_clusters(
    state: &mut TrainState,
    view: &TrainView,
    cfg: &TrainConfig,
) -> Result<()> {
    let epoch = state.epochs_done as u64;
    let bank_a = encode_bank(&state.theta_m.params, crate::data::Domain::A, &view.a)?;
    let bank_b = encode_bank(&state.theta_m.params, crate::data::Domain::B, &view.b)?;
    let clusters_a = kmeans(
        &bank_a.feature_vectors(),
        cfg.k,
        derive_seed(cfg.seed, "kmeans-a", epoch),
    )?
    .tagged(crate::data::Domain::A);
    let clusters_b = kmeans(
        &bank_b.feature_vectors(),
        cfg.k,
        derive_seed(cfg.seed, "kmeans-b", epoch),
    )?
    .tagged(crate::data::Domain::B);
    state.banks = Some(Banks {
        a: bank_a,
        b: bank_b,
    });
    state.clusters_a = Some(clusters_a);
    state.clusters_b = Some(clusters_b);
    Ok(())
}

/// Per-epoch aggregates for the metrics log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    /// Learning rate at the first step of the epoch.
    pub lr: f64,
    pub lambda: f64,
    /// Means over the epoch's steps.
    pub iw: f64,
    pub cw: f64,
    pub dd: f64,
    pub se: f64,
    pub total: f64,
    pub steps: usize,
}

/// Number of optimizer steps one epoch takes (ragged tails are dropped).
pub fn steps_per_epoch(view: &TrainView, batch_size: usize) -> usize {
    let half = batch_size / 2;
    if half == 0 {
        return 0;
    }
    (view.a.len() / half).min(view.b.len() / half)
}

/// Runs one epoch of optimization. `total_steps` spans the whole scheduled
/// run (epochs x steps per epoch) so the cosine decay is global.
pub fn train_epoch(
    state: &mut TrainState,
    view: &TrainView,
    cfg: &TrainConfig,
    total_steps: usize,
) -> Result<EpochStats> {
    let epoch = state.epochs_done;
    let steps = steps_per_epoch(view, cfg.batch_size);
    if steps == 0 {
        return Err(Error::InvalidConfig(format!(
            "batch_size {} needs {} samples per domain, have {} and {}",
            cfg.batch_size,
            cfg.batch_size / 2,
            view.a.len(),
            view.b.len()
        )));
    }
    if state.banks.is_none() {
        return Err(Error::Training(
            "banks not initialized; call refresh_banks_and_clusters first".into(),
        ));
    }

    let half = cfg.batch_size / 2;
    let mut rng = component_rng(cfg.seed, "epoch", epoch as u64);
    let mut order_a: Vec<usize> = (0..view.a.len()).collect();
    let mut order_b: Vec<usize> = (0..view.b.len()).collect();
    order_a.shuffle(&mut rng);
    order_b.shuffle(&mut rng);

    let mut stats = EpochStats {
        lr: cosine_lr(state.steps_done, total_steps, cfg.lr0),
        lambda: 0.0,
        iw: 0.0,
        cw: 0.0,
        dd: 0.0,
        se: 0.0,
        total: 0.0,
        steps,
    };

    for s in 0..steps {
        let sel_a = &order_a[s * half..(s + 1) * half];
        let sel_b = &order_b[s * half..(s + 1) * half];

        // Two independent augmented views per sample: the first feeds the
        // online
        // encoder, the second the momentum encoder. Domain A draws first.
        let mut online_a = Vec::with_capacity(half);
        let mut target_a = Vec::with_capacity(half);
        let mut ids_a = Vec::with_capacity(half);
        for &i in sel_a {
            let (id, raw) = view.a[i];
            online_a.push(cfg.augment.augment(raw, &mut rng));
            target_a.push(cfg.augment.augment(raw, &mut rng));
            ids_a.push(id);
        }
        let mut online_b = Vec::with_capacity(half);
        let mut target_b = Vec::with_capacity(half);
        let mut ids_b = Vec::with_capacity(half);
        for &i in sel_b {
            let (id, raw) = view.b[i];
            online_b.push(cfg.augment.augment(raw, &mut rng));
            target_b.push(cfg.augment.augment(raw, &mut rng));
            ids_b.push(id);
        }

        let views_a = encode_matrix(&state.theta_m.params, &DenseArray::from_rows(&target_a))?;
        let views_b = encode_matrix(&state.theta_m.params, &DenseArray::from_rows(&target_b))?;

        let mut tape = Tape::new();
        let nodes = insert_params(&mut tape, &state.theta, true)?;
        let xa = tape.constant(DenseArray::from_rows(&online_a))?;
        let feats_a = encode_on_tape(&mut tape, &nodes, xa)?;
        let xb = tape.constant(DenseArray::from_rows(&online_b))?;
        let feats_b = encode_on_tape(&mut tape, &nodes, xb)?;

        let batch = BatchView::new(&tape, ids_a, ids_b, feats_a, feats_b, views_a, views_b)?;
        let banks = state.banks.as_ref().expect("checked above");
        let (root, parts): (_, LossBreakdown) = total_loss(
            &mut tape,
            &batch,
            banks,
            state.clusters_a.as_ref(),
            state.clusters_b.as_ref(),
            epoch,
            &cfg.loss,
        )?;
        let grads = tape.backward(root)?;
        let flat_ids = nodes.flat();
        let grad_refs: Vec<&DenseArray> = flat_ids
            .iter()
            .map(|&id| grads.get(id).expect("trainable leaves always have gradients"))
            .collect();

        let lr = cosine_lr(state.steps_done, total_steps, cfg.lr0);
        sgd_step(
            &mut state.theta,
            &grad_refs,
            &mut state.velocity,
            lr,
            cfg.sgd_momentum,
        )?;
        state.theta_m.update_from(&state.theta)?;

        // Only now, with the step fully applied, refresh the bank entries of
        // this batch with the momentum views computed for it.
        let banks = state.banks.as_mut().expect("checked above");
        for (i, id) in batch.ids_a.iter().enumerate() {
            banks.a.update(*id, batch.views_a.row(i))?;
        }
        for (i, id) in batch.ids_b.iter().enumerate() {
            banks.b.update(*id, batch.views_b.row(i))?;
        }

        state.steps_done += 1;
        stats.lambda = parts.lambda;
        stats.iw += parts.iw;
        stats.cw += parts.cw;
        stats.dd += parts.dd;
        stats.se += parts.se;
        stats.total += parts.total;
    }

    let n = steps as f64;
    stats.iw /= n;
    stats.cw /= n;
    stats.dd /= n;
    stats.se /= n;
    stats.total /= n;
    state.epochs_done += 1;
    Ok(stats)
}

/// Append-only CSV writer for the per-epoch metrics log. Every float is
/// written with the shortest round-trip formatting, so identical runs emit
/// identical bytes.
pub struct MetricsWriter {
    out: BufWriter<File>,
    ks: Vec<usize>,
}

impl MetricsWriter {
    pub fn header_for(ks: &[usize]) -> String {
        let mut h = String::from("epoch,lr,lambda,L_IW,L_CW,L_DD,L_SE,L_total");
        for k in ks {
            h.push_str(&format!(",P@{k}"));
        }
        h
    }

    /// Creates (truncates) the file and writes the header.
    pub fn create(path: &Path, ks: &[usize]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", Self::header_for(ks))?;
        out.flush()?;
        Ok(MetricsWriter {
            out,
            ks: ks.to_vec(),
        })
    }

    /// Opens an existing log for appending, verifying the header matches.
    pub fn append(path: &Path, ks: &[usize]) -> Result<Self> {
        let first_line = BufReader::new(File::open(path)?)
            .lines()
            .next()
            .transpose()?
            .unwrap_or_default();
        let expected = Self::header_for(ks);
        if first_line != expected {
            return Err(Error::Training(format!(
                "metrics file header '{first_line}' does not match expected '{expected}'"
            )));
        }
        let out = BufWriter::new(OpenOptions::new().append(true).open(path)?);
        Ok(MetricsWriter {
            out,
            ks: ks.to_vec(),
        })
    }

    /// Writes one epoch row and flushes it, so an aborted run keeps every
    /// completed epoch. Precision columns stay empty on non-eval epochs.
    pub fn write_row(
        &mut self,
        epoch: usize,
        stats: &EpochStats,
        precision: Option<&BTreeMap<usize, f64>>,
    ) -> Result<()> {
        let mut row = format!(
            "{},{},{},{},{},{},{},{}",
            epoch, stats.lr, stats.lambda, stats.iw, stats.cw, stats.dd, stats.se, stats.total
        );
        for k in &self.ks {
            match precision.and_then(|p| p.get(k)) {
                Some(v) => row.push_str(&format!(",{v}")),
                None => row.push(','),
            }
        }
        writeln!(self.out, "{row}")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Where a finished run left its artifacts.
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub epochs_done: usize,
    pub final_precision: Option<BTreeMap<usize, f64>>,
}

/// Trains from scratch, writing `metrics.csv` and `checkpoint.json` into
/// `out_dir`.
pub fn train(
    dataset: &Dataset,
    cfg: &TrainConfig,
    eval: &EvalSettings,
    out_dir: &Path,
) -> Result<TrainSummary> {
    let mut state = init_state(cfg)?;
    let metrics_path = out_dir.join("metrics.csv");
    let metrics = MetricsWriter::create(&metrics_path, &eval.ks)?;
    run_epochs(&mut state, dataset, cfg, eval, out_dir, metrics)
}

/// Continues a checkpointed run. The metrics file in `out_dir` is appended if
/// it exists, created otherwise.
pub fn resume(
    ckpt: &Checkpoint,
    dataset: &Dataset,
    cfg: &TrainConfig,
    eval: &EvalSettings,
    out_dir: &Path,
) -> Result<TrainSummary> {
    let mut state = state_from_checkpoint(ckpt, cfg)?;
    if state.epochs_done >= cfg.epochs {
        return Err(Error::InvalidConfig(format!(
            "checkpoint already covers {} epochs; config asks for {}",
            state.epochs_done, cfg.epochs
        )));
    }
    let metrics_path = out_dir.join("metrics.csv");
    let metrics = if metrics_path.exists() {
        MetricsWriter::append(&metrics_path, &eval.ks)?
    } else {
        MetricsWriter::create(&metrics_path, &eval.ks)?
    };
    run_epochs(&mut state, dataset, cfg, eval, out_dir, metrics)
}

fn run_epochs(
    state: &mut TrainState,
    dataset: &Dataset,
    cfg: &TrainConfig,
    eval: &EvalSettings,
    out_dir: &Path,
    mut metrics: MetricsWriter,
) -> Result<TrainSummary> {
    cfg.validate()?;
    eval.validate()?;
    if dataset.input_dim != cfg.layer_dims[0] {
        return Err(Error::InvalidConfig(format!(
            "dataset vectors have dimension {}, encoder expects {}",
            dataset.input_dim, cfg.layer_dims[0]
        )));
    }
    let view = dataset.train_view();
    let spe = steps_per_epoch(&view, cfg.batch_size);
    if spe == 0 {
        return Err(Error::InvalidConfig(format!(
            "batch_size {} needs {} samples per domain, have {} and {}",
            cfg.batch_size,
            cfg.batch_size / 2,
            view.a.len(),
            view.b.len()
        )));
    }
    let total_steps = cfg.epochs * spe;
    let ckpt_path = out_dir.join("checkpoint.json");
    let metrics_path = out_dir.join("metrics.csv");
    let mut final_precision = None;

    while state.epochs_done < cfg.epochs {
        let epoch = state.epochs_done;
        refresh_banks_and_clusters(state, &view, cfg)?;
        let stats = match train_epoch(state, &view, cfg, total_steps) {
            Ok(s) => s,
            Err(e @ Error::Collapse { .. }) => {
                // Preserve the collapsed parameters for postmortem before
                // surfacing the error.
                if let Ok(c) = Checkpoint::capture(
                    &state.theta,
                    &state.theta_m,
                    &state.velocity,
                    state.epochs_done,
                    state.steps_done,
                    cfg.seed,
                ) {
                    let _ = c.save(&out_dir.join("checkpoint-collapse.json"));
                }
                return Err(Error::Training(format!("epoch {epoch}: {e}")));
            }
            Err(e) => return Err(Error::Training(format!("epoch {epoch}: {e}"))),
        };

        let precision = if eval.due(epoch, cfg.epochs) {
            let (_, _, mean) = evaluate_both(&state.theta, dataset, &eval.ks)?;
            final_precision = Some(mean.clone());
            Some(mean)
        } else {
            None
        };
        metrics.write_row(epoch, &stats, precision.as_ref())?;

        Checkpoint::capture(
            &state.theta,
            &state.theta_m,
            &state.velocity,
            state.epochs_done,
            state.steps_done,
            cfg.seed,
        )?
        .save(&ckpt_path)?;
    }

    Ok(TrainSummary {
        checkpoint: ckpt_path,
        metrics: metrics_path,
        epochs_done: state.epochs_done,
        final_precision,
    })
}
