//! Synthetic paired-domain vector data.
//!
//! Both domains share the same class prototypes in a latent space; each
//! domain then sees them through its own fixed distortion (a blended
//! rotation, a bias, an optional pointwise nonlinearity). Class labels ride
//! along for evaluation only — [`Dataset::train_view`] strips them, so the
//! type system keeps the training loop label-free.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::component_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    A,
    B,
}

impl Domain {
    pub fn tag(&self) -> &'static str {
        match self {
            Domain::A => "a",
            Domain::B => "b",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleId(pub u64);

#[derive(Clone, Debug, PartialEq)]
pub struct DataSample {
    pub id: SampleId,
    pub domain: Domain,
    /// Ground-truth class, available to evaluation only.
    pub label: Option<u32>,
    pub raw: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples_a: Vec<DataSample>,
    pub samples_b: Vec<DataSample>,
    pub input_dim: usize,
    pub num_classes: usize,
}

/// Label-free borrow of the raw vectors, the only thing training may see.
pub struct TrainView<'a> {
    pub a: Vec<(SampleId, &'a [f64])>,
    pub b: Vec<(SampleId, &'a [f64])>,
    pub input_dim: usize,
}

impl Dataset {
    pub fn train_view(&self) -> TrainView<'_> {
        TrainView {
            a: self.samples_a.iter().map(|s| (s.id, s.raw.as_slice())).collect(),
            b: self.samples_b.iter().map(|s| (s.id, s.raw.as_slice())).collect(),
            input_dim: self.input_dim,
        }
    }

    pub fn samples(&self, domain: Domain) -> &[DataSample] {
        match domain {
            Domain::A => &self.samples_a,
            Domain::B => &self.samples_b,
        }
    }

    pub fn len(&self) -> usize {
        self.samples_a.len() + self.samples_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Identity,
    Tanh,
    Abs,
}

/// One domain's fixed view of the shared latent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainShift {
    /// 0 keeps the identity map, 1 applies a fully random rotation;
    /// in between blends the two (re-orthonormalized), so the domain gap
    /// grows continuously with this knob.
    pub rotation_strength: f64,
    /// Scale of a fixed random bias added after rotation.
    pub bias_scale: f64,
    pub nonlinearity: Nonlinearity,
}

impl DomainShift {
    pub fn identity() -> Self {
        DomainShift {
            rotation_strength: 0.0,
            bias_scale: 0.0,
            nonlinearity: Nonlinearity::Identity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub num_classes: usize,
    /// Samples per class per domain.
    pub per_class: usize,
    /// Dimension of the shared latent space; must be at least `num_classes`
    /// so class directions can be orthogonal.
    pub latent_dim: usize,
    /// Dimension of the emitted raw vectors; latent vectors are zero-padded
    /// up to this before the domain shift is applied.
    pub input_dim: usize,
    /// How far each class prototype moves from the shared center.
    pub class_sep: f64,
    /// Within-class latent noise.
    pub noise_sigma: f64,
    pub shift_a: DomainShift,
    pub shift_b: DomainShift,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    /// Five classes of 200 samples per domain in 32 input dims, with domain B
    /// behind a moderate shift: a 0.65-strength rotation, a unit-scale fixed
    /// bias, and a tanh squash. Strong enough that raw cross-domain cosine
    /// similarity is near chance, mild enough that the class correspondence
    /// stays recoverable.
    fn default() -> Self {
        GeneratorSpec {
            num_classes: 5,
            per_class: 200,
            latent_dim: 8,
            input_dim: 32,
            class_sep: 2.0,
            noise_sigma: 0.1,
            shift_a: DomainShift::identity(),
            shift_b: DomainShift {
                rotation_strength: 0.65,
                bias_scale: 1.0,
                nonlinearity: Nonlinearity::Tanh,
            },
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Data("need at least 2 classes".into()));
        }
        if self.per_class == 0 {
            return Err(Error::Data("per_class must be at least 1".into()));
        }
        if self.latent_dim < self.num_classes {
            return Err(Error::Data(format!(
                "latent_dim {} is too small for {} orthogonal class prototypes",
                self.latent_dim, self.num_classes
            )));
        }
        if self.input_dim < self.latent_dim {
            return Err(Error::Data(format!(
                "input_dim {} must be at least latent_dim {}",
                self.input_dim, self.latent_dim
            )));
        }
        if !(self.class_sep.is_finite() && self.class_sep >= 0.0) {
            return Err(Error::Data("class_sep must be non-negative".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Data("noise_sigma must be non-negative".into()));
        }
        for (name, s) in [("shift_a", &self.shift_a), ("shift_b", &self.shift_b)] {
            if !(0.0..=1.0).contains(&s.rotation_strength) {
                return Err(Error::Data(format!(
                    "{name}.rotation_strength must lie in [0, 1]"
                )));
            }
            if !(s.bias_scale.is_finite() && s.bias_scale >= 0.0) {
                return Err(Error::Data(format!("{name}.bias_scale must be non-negative")));
            }
        }
        Ok(())
    }
}

/// One draw from a standard normal via Box-Muller; keeps the crate free of an
/// extra distributions dependency.
pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn normalize_in_place(v: &mut [f64]) -> f64 {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Gram-Schmidt orthonormalization of `rows` in place. Errors if a row is
/// (numerically) dependent on the previous ones.
fn orthonormalize(rows: &mut [Vec<f64>]) -> Result<()> {
    for i in 0..rows.len() {
        for j in 0..i {
            let proj: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            let prev = rows[j].clone();
            for (a, b) in rows[i].iter_mut().zip(&prev) {
                *a -= proj * b;
            }
        }
        if normalize_in_place(&mut rows[i]) < 1e-8 {
            return Err(Error::Data(
                "degenerate basis during orthonormalization".into(),
            ));
        }
    }
    Ok(())
}

fn random_orthonormal(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    // Random Gaussian rows are dependent with probability zero; retry a few
    // times anyway rather than fail on a freak draw.
    for _ in 0..16 {
        let mut rows: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..dim).map(|_| standard_normal(rng)).collect())
            .collect();
        if orthonormalize(&mut rows).is_ok() {
            return Ok(rows);
        }
    }
    Err(Error::Data("could not draw an orthonormal basis".into()))
}

/// A fixed affine-plus-nonlinearity distortion for one domain.
struct Transform {
    /// `(input_dim, input_dim)` orthogonal matrix, rows.
    rotation: Vec<Vec<f64>>,
    bias: Vec<f64>,
    nonlinearity: Nonlinearity,
}

impl Transform {
    fn build(shift: &DomainShift, dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let t = shift.rotation_strength;
        let random = random_orthonormal(dim, dim, rng)?;
        // Blend identity with the random rotation, then re-orthonormalize so
        // the result is a genuine rotation at every strength.
        let mut rows: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        let ident = if i == j { 1.0 } else { 0.0 };
                        (1.0 - t) * ident + t * random[i][j]
                    })
                    .collect()
            })
            .collect();
        orthonormalize(&mut rows).map_err(|_| {
            Error::Data("rotation blend became degenerate; try a different seed".into())
        })?;
        let bias: Vec<f64> = (0..dim)
            .map(|_| shift.bias_scale * standard_normal(rng))
            .collect();
        Ok(Transform {
            rotation: rows,
            bias,
            nonlinearity: shift.nonlinearity,
        })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rotation
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let y: f64 = row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() + b;
                match self.nonlinearity {
                    Nonlinearity::Identity => y,
                    Nonlinearity::Tanh => y.tanh(),
                    Nonlinearity::Abs => y.abs(),
                }
            })
            .collect()
    }
}

/// Generates the paired-domain dataset described by `spec`, deterministically
/// in `spec.seed`.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let c = spec.num_classes;

    // Shared class prototypes: unit directions fanned out from a common
    // center along orthogonal axes. Each class gets its own radius so the
    // pairwise angles differ from pair to pair; that asymmetry is what makes
    // the class correspondence across domains identifiable from distance
    // structure alone instead of only up to a relabeling.
    let mut rng = component_rng(spec.seed, "data-prototypes", 0);
    let axes = random_orthonormal(spec.latent_dim, c, &mut rng)?;
    let radii: Vec<f64> = (0..c).map(|_| 0.6 + 0.8 * rng.gen::<f64>()).collect();
    let mut center = vec![0.0; spec.latent_dim];
    for axis in &axes {
        for (u, a) in center.iter_mut().zip(axis) {
            *u += a;
        }
    }
    normalize_in_place(&mut center);
    let prototypes: Vec<Vec<f64>> = axes
        .iter()
        .zip(&radii)
        .map(|(axis, r)| {
            let mut p: Vec<f64> = center
                .iter()
                .zip(axis)
                .map(|(u, a)| u + spec.class_sep * r * a)
                .collect();
            normalize_in_place(&mut p);
            p
        })
        .collect();

    let mut next_id = 0u64;
    let mut make_domain = |domain: Domain, shift: &DomainShift| -> Result<Vec<DataSample>> {
        let mut rng_t = component_rng(spec.seed, &format!("data-transform-{}", domain.tag()), 0);
        let transform = Transform::build(shift, spec.input_dim, &mut rng_t)?;
        let mut rng_s = component_rng(spec.seed, &format!("data-samples-{}", domain.tag()), 0);
        let mut samples = Vec::with_capacity(c * spec.per_class);
        for (class, proto) in prototypes.iter().enumerate() {
            for _ in 0..spec.per_class {
                let mut x = vec![0.0; spec.input_dim];
                for (xi, pi) in x.iter_mut().zip(proto) {
                    *xi = pi + spec.noise_sigma * standard_normal(&mut rng_s);
                }
                let raw = transform.apply(&x);
                if raw.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data("generated a non-finite sample".into()));
                }
                samples.push(DataSample {
                    id: SampleId(next_id),
                    domain,
                    label: Some(class as u32),
                    raw,
                });
                next_id += 1;
            }
        }
        Ok(samples)
    };

    let samples_a = make_domain(Domain::A, &spec.shift_a)?;
    let samples_b = make_domain(Domain::B, &spec.shift_b)?;
    Ok(Dataset {
        samples_a,
        samples_b,
        input_dim: spec.input_dim,
        num_classes: c,
    })
}

/// Stochastic augmentation: per-coordinate multiplicative jitter plus
/// additive Gaussian noise. Zero jitter and zero noise is exactly identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Augmentor {
    pub jitter: f64,
    pub noise_sigma: f64,
}

impl Default for Augmentor {
    fn default() -> Self {
        Augmentor {
            jitter: 0.1,
            noise_sigma: 0.05,
        }
    }
}

impl Augmentor {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::InvalidConfig("augment jitter must be non-negative".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig(
                "augment noise_sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn augment(&self, raw: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        raw.iter()
            .map(|&x| {
                let jit = if self.jitter > 0.0 {
                    rng.gen_range(-self.jitter..self.jitter)
                } else {
                    0.0
                };
                let noise = if self.noise_sigma > 0.0 {
                    self.noise_sigma * standard_normal(rng)
                } else {
                    0.0
                };
                x * (1.0 + jit) + noise
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: u64,
    domain: Domain,
    label: Option<u32>,
    vector: Vec<f64>,
}

/// Writes the dataset as JSON Lines, one sample per line, domain A first.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in dataset.samples_a.iter().chain(&dataset.samples_b) {
        let rec = Record {
            id: s.id.0,
            domain: s.domain,
            label: s.label,
            vector: s.raw.clone(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a JSON Lines dataset, validating as it goes: every malformed line,
/// inconsistent dimension, non-finite value, or duplicate id is reported with
/// its 1-based line number.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut samples_a = Vec::new();
    let mut samples_b = Vec::new();
    let mut input_dim = None;
    let mut seen = std::collections::HashSet::new();
    let mut max_label = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::DatasetLine {
            line: line_no,
            msg: e.to_string(),
        })?;
        let dim = *input_dim.get_or_insert(rec.vector.len());
        if rec.vector.len() != dim {
            return Err(Error::DatasetLine {
                line: line_no,
                msg: format!("vector has length {}, expected {dim}", rec.vector.len()),
            });
        }
        if rec.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::DatasetLine {
                line: line_no,
                msg: "vector contains a non-finite value".into(),
            });
        }
        if !seen.insert(rec.id) {
            return Err(Error::DatasetLine {
                line: line_no,
                msg: format!("duplicate sample id {}", rec.id),
            });
        }
        if let Some(l) = rec.label {
            max_label = Some(max_label.map_or(l, |m: u32| m.max(l)));
        }
        let sample = DataSample {
            id: SampleId(rec.id),
            domain: rec.domain,
            label: rec.label,
            raw: rec.vector,
        };
        match sample.domain {
            Domain::A => samples_a.push(sample),
            Domain::B => samples_b.push(sample),
        }
    }

    let input_dim = input_dim.ok_or_else(|| Error::Data("dataset file has no samples".into()))?;
    Ok(Dataset {
        samples_a,
        samples_b,
        input_dim,
        num_classes: max_label.map_or(0, |m| m as usize + 1),
    })
}
