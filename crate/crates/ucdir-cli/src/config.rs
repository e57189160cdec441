//! Layered run configuration: documented defaults, then the TOML file, then
//! `UCDIR_*` environment variables, then command-line flags. Unknown keys
//! anywhere are errors so typos can't silently fall back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ucdir::data::{Augmentor, Dataset, DomainShift, GeneratorSpec, Nonlinearity};
use ucdir::evaluation::Direction;
use ucdir::losses::LossConfig;
use ucdir::training::{EvalSettings, TrainConfig};

/// Copies every present field of an overlay section onto the base section.
macro_rules! overlay {
    ($base:expr, $over:expr, [$($field:ident),* $(,)?]) => {
        $(
            if $over.$field.is_some() {
                $base.$field = $over.$field;
            }
        )*
    };
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    generator: GeneratorSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    loss: LossSection,
    #[serde(default)]
    eval: EvalSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSection {
    num_classes: Option<usize>,
    per_class: Option<usize>,
    latent_dim: Option<usize>,
    input_dim: Option<usize>,
    class_sep: Option<f64>,
    noise_sigma: Option<f64>,
    #[serde(default)]
    shift_a: ShiftSection,
    #[serde(default)]
    shift_b: ShiftSection,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShiftSection {
    rotation_strength: Option<f64>,
    bias_scale: Option<f64>,
    nonlinearity: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr0: Option<f64>,
    sgd_momentum: Option<f64>,
    encoder_momentum: Option<f64>,
    layer_dims: Option<Vec<usize>>,
    k: Option<usize>,
    seed: Option<u64>,
    #[serde(default)]
    augment: AugmentSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AugmentSection {
    jitter: Option<f64>,
    noise_sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossSection {
    tau: Option<f64>,
    phi: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    t1: Option<usize>,
    t2: Option<usize>,
    use_cw: Option<bool>,
    use_dd: Option<bool>,
    use_se: Option<bool>,
    normalize: Option<bool>,
    in_batch_negatives: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalSection {
    ks: Option<Vec<usize>>,
    eval_interval: Option<usize>,
    directions: Option<Vec<String>>,
}

impl FileConfig {
    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    /// Builds an overlay from `UCDIR_*` environment variables, e.g.
    /// `UCDIR_TRAIN_EPOCHS=10` or `UCDIR_GENERATOR_SHIFT_B_BIAS_SCALE=0.5`.
    pub fn from_env(vars: impl Iterator<Item = (String, String)>) -> Result<Self, String> {
        let mut table = toml::Table::new();
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix("UCDIR_") else {
                continue;
            };
            let (section, key) = split_env_key(rest)
                .ok_or_else(|| format!("environment variable {name} matches no config key"))?;
            let slot = nested_table(&mut table, &section);
            slot.insert(key, parse_env_value(&value));
        }
        FileConfig::deserialize(table).map_err(|e| format!("environment overrides: {e}"))
    }

    fn merge(&mut self, over: FileConfig) {
        overlay!(
            self.generator,
            over.generator,
            [num_classes, per_class, latent_dim, input_dim, class_sep, noise_sigma, seed]
        );
        for (base, over) in [
            (&mut self.generator.shift_a, over.generator.shift_a),
            (&mut self.generator.shift_b, over.generator.shift_b),
        ] {
            overlay!(*base, over, [rotation_strength, bias_scale, nonlinearity]);
        }
        overlay!(
            self.train,
            over.train,
            [epochs, batch_size, lr0, sgd_momentum, encoder_momentum, layer_dims, k, seed]
        );
        overlay!(self.train.augment, over.train.augment, [jitter, noise_sigma]);
        overlay!(
            self.loss,
            over.loss,
            [tau, phi, alpha, beta, gamma, t1, t2, use_cw, use_dd, use_se, normalize,
             in_batch_negatives]
        );
        overlay!(self.eval, over.eval, [ks, eval_interval, directions]);
    }
}

/// Maps an env-var suffix like `GENERATOR_SHIFT_B_ROTATION_STRENGTH` to its
/// TOML path (`["generator", "shift_b"]`) and key (`rotation_strength`).
fn split_env_key(rest: &str) -> Option<(Vec<String>, String)> {
    let lower = rest.to_ascii_lowercase();
    for section in ["generator", "train", "loss", "eval"] {
        let Some(tail) = lower.strip_prefix(&format!("{section}_")) else {
            continue;
        };
        for nested in ["shift_a", "shift_b", "augment"] {
            if let Some(key) = tail.strip_prefix(&format!("{nested}_")) {
                return Some((vec![section.into(), nested.into()], key.into()));
            }
        }
        return Some((vec![section.into()], tail.into()));
    }
    None
}

fn nested_table<'a>(root: &'a mut toml::Table, path: &[String]) -> &'a mut toml::Table {
    let mut current = root;
    for part in path {
        current = current
            .entry(part.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .expect("path entries are always tables");
    }
    current
}

fn parse_env_value(raw: &str) -> toml::Value {
    let scalar = |s: &str| -> toml::Value {
        if let Ok(b) = s.parse::<bool>() {
            toml::Value::Boolean(b)
        } else if let Ok(i) = s.parse::<i64>() {
            toml::Value::Integer(i)
        } else if let Ok(f) = s.parse::<f64>() {
            toml::Value::Float(f)
        } else {
            toml::Value::String(s.to_string())
        }
    };
    if raw.contains(',') {
        toml::Value::Array(raw.split(',').map(|p| scalar(p.trim())).collect())
    } else {
        scalar(raw.trim())
    }
}

fn parse_nonlinearity(s: &str) -> Result<Nonlinearity, String> {
    match s {
        "identity" => Ok(Nonlinearity::Identity),
        "tanh" => Ok(Nonlinearity::Tanh),
        "abs" => Ok(Nonlinearity::Abs),
        other => Err(format!(
            "unknown nonlinearity '{other}' (expected identity, tanh or abs)"
        )),
    }
}

pub fn parse_direction(s: &str) -> Result<Direction, String> {
    match s.to_ascii_lowercase().as_str() {
        "a2b" | "a_to_b" | "atob" => Ok(Direction::AToB),
        "b2a" | "b_to_a" | "btoa" => Ok(Direction::BToA),
        other => Err(format!("unknown direction '{other}' (expected a2b or b2a)")),
    }
}

/// The final merged configuration. `layer_dims` and `k` stay optional until a
/// dataset is known: the encoder input width follows the data and the cluster
/// count follows the class count unless the config pins them.
pub struct Resolved {
    pub generator: GeneratorSpec,
    train: TrainConfig,
    layer_dims: Option<Vec<usize>>,
    k: Option<usize>,
    pub eval: EvalSettings,
    pub directions: Vec<Direction>,
}

impl Resolved {
    pub fn train_for(&self, input_dim: usize, num_classes: usize) -> TrainConfig {
        let mut cfg = self.train.clone();
        cfg.layer_dims = self
            .layer_dims
            .clone()
            .unwrap_or_else(|| vec![input_dim, 32, 16]);
        cfg.k = self.k.unwrap_or(num_classes);
        cfg
    }

    pub fn train_for_dataset(&self, dataset: &Dataset) -> TrainConfig {
        self.train_for(dataset.input_dim, dataset.num_classes)
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    /// Applies the single `--seed` flag: one seed drives generation and
    /// training alike.
    pub fn override_seed(&mut self, seed: u64) {
        self.generator.seed = seed;
        self.train.seed = seed;
    }

    pub fn override_epochs(&mut self, epochs: usize) {
        self.train.epochs = epochs;
    }

    pub fn loss_mut(&mut self) -> &mut LossConfig {
        &mut self.train.loss
    }

    /// The effective configuration as a TOML document that parses back into
    /// the same run.
    pub fn echo_toml(&self, input_dim: usize, num_classes: usize) -> String {
        let train = self.train_for(input_dim, num_classes);
        let echo = Echo {
            generator: &self.generator,
            train: TrainEcho {
                epochs: train.epochs,
                batch_size: train.batch_size,
                lr0: train.lr0,
                sgd_momentum: train.sgd_momentum,
                encoder_momentum: train.encoder_momentum,
                layer_dims: train.layer_dims.clone(),
                k: train.k,
                seed: train.seed,
                augment: train.augment,
            },
            loss: &train.loss,
            eval: EvalEcho {
                ks: &self.eval.ks,
                eval_interval: self.eval.interval,
                directions: self
                    .directions
                    .iter()
                    .map(|d| d.as_str().to_string())
                    .collect(),
            },
        };
        toml::to_string_pretty(&echo).expect("config serializes")
    }
}

#[derive(Serialize)]
struct Echo<'a> {
    generator: &'a GeneratorSpec,
    train: TrainEcho,
    loss: &'a LossConfig,
    eval: EvalEcho<'a>,
}

#[derive(Serialize)]
struct TrainEcho {
    epochs: usize,
    batch_size: usize,
    lr0: f64,
    sgd_momentum: f64,
    encoder_momentum: f64,
    layer_dims: Vec<usize>,
    k: usize,
    seed: u64,
    augment: Augmentor,
}

#[derive(Serialize)]
struct EvalEcho<'a> {
    ks: &'a [usize],
    eval_interval: usize,
    directions: Vec<String>,
}

/// Loads the optional config file, applies environment overrides, and
/// resolves everything against the documented defaults.
pub fn resolve(config_path: Option<&Path>) -> Result<Resolved, String> {
    let mut file = match config_path {
        Some(p) => FileConfig::from_path(p)?,
        None => FileConfig::default(),
    };
    file.merge(FileConfig::from_env(std::env::vars())?);
    resolve_from(file)
}

fn resolve_from(file: FileConfig) -> Result<Resolved, String> {
    let mut generator = GeneratorSpec::default();
    let g = file.generator;
    apply(&mut generator.num_classes, g.num_classes);
    apply(&mut generator.per_class, g.per_class);
    apply(&mut generator.latent_dim, g.latent_dim);
    apply(&mut generator.input_dim, g.input_dim);
    apply(&mut generator.class_sep, g.class_sep);
    apply(&mut generator.noise_sigma, g.noise_sigma);
    apply(&mut generator.seed, g.seed);
    for (shift, section) in [
        (&mut generator.shift_a, g.shift_a),
        (&mut generator.shift_b, g.shift_b),
    ] {
        apply_shift(shift, section)?;
    }

    let mut train = TrainConfig::default();
    let t = file.train;
    apply(&mut train.epochs, t.epochs);
    apply(&mut train.batch_size, t.batch_size);
    apply(&mut train.lr0, t.lr0);
    apply(&mut train.sgd_momentum, t.sgd_momentum);
    apply(&mut train.encoder_momentum, t.encoder_momentum);
    apply(&mut train.seed, t.seed);
    apply(&mut train.augment.jitter, t.augment.jitter);
    apply(&mut train.augment.noise_sigma, t.augment.noise_sigma);

    let l = file.loss;
    apply(&mut train.loss.tau, l.tau);
    apply(&mut train.loss.phi, l.phi);
    apply(&mut train.loss.alpha, l.alpha);
    apply(&mut train.loss.beta, l.beta);
    apply(&mut train.loss.gamma, l.gamma);
    apply(&mut train.loss.t1, l.t1);
    apply(&mut train.loss.t2, l.t2);
    apply(&mut train.loss.use_cw, l.use_cw);
    apply(&mut train.loss.use_dd, l.use_dd);
    apply(&mut train.loss.use_se, l.use_se);
    apply(&mut train.loss.normalize, l.normalize);
    apply(&mut train.loss.in_batch_negatives, l.in_batch_negatives);

    let mut eval = EvalSettings::default();
    let e = file.eval;
    apply(&mut eval.ks, e.ks);
    apply(&mut eval.interval, e.eval_interval);
    let directions = match e.directions {
        None => vec![Direction::AToB, Direction::BToA],
        Some(names) => names
            .iter()
            .map(|n| parse_direction(n))
            .collect::<Result<Vec<_>, _>>()?,
    };

    generator.validate().map_err(|e| e.to_string())?;
    train.loss.validate().map_err(|e| e.to_string())?;
    if eval.ks.is_empty() {
        return Err("eval.ks must list at least one k".into());
    }

    Ok(Resolved {
        generator,
        train,
        layer_dims: t.layer_dims,
        k: t.k,
        eval,
        directions,
    })
}

fn apply<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_shift(shift: &mut DomainShift, section: ShiftSection) -> Result<(), String> {
    apply(&mut shift.rotation_strength, section.rotation_strength);
    apply(&mut shift.bias_scale, section.bias_scale);
    if let Some(name) = section.nonlinearity {
        shift.nonlinearity = parse_nonlinearity(&name)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_the_echo() {
        let resolved = resolve_from(FileConfig::default()).unwrap();
        let echoed = resolved.echo_toml(32, 5);
        let parsed: FileConfig = toml::from_str(&echoed).unwrap();
        let resolved2 = resolve_from(parsed).unwrap();
        assert_eq!(resolved.generator, resolved2.generator);
        assert_eq!(
            resolved.train_for(32, 5),
            resolved2.train_for(32, 5)
        );
        assert_eq!(resolved.eval, resolved2.eval);
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_name() {
        let err = toml::from_str::<FileConfig>("[train]\nepochz = 3\n").unwrap_err();
        assert!(err.to_string().contains("epochz"));
    }

    #[test]
    fn env_overrides_reach_nested_tables() {
        let vars = vec![
            ("UCDIR_TRAIN_EPOCHS".to_string(), "7".to_string()),
            (
                "UCDIR_GENERATOR_SHIFT_B_ROTATION_STRENGTH".to_string(),
                "0.25".to_string(),
            ),
            ("UCDIR_EVAL_KS".to_string(), "1,5".to_string()),
            ("UCDIR_LOSS_USE_DD".to_string(), "false".to_string()),
            ("OTHER_VAR".to_string(), "ignored".to_string()),
        ];
        let over = FileConfig::from_env(vars.into_iter()).unwrap();
        let mut base = FileConfig::default();
        base.merge(over);
        let resolved = resolve_from(base).unwrap();
        assert_eq!(resolved.train_for(32, 5).epochs, 7);
        assert_eq!(resolved.generator.shift_b.rotation_strength, 0.25);
        assert_eq!(resolved.eval.ks, vec![1, 5]);
        assert!(!resolved.train_for(32, 5).loss.use_dd);
    }

    #[test]
    fn misspelled_env_variable_is_an_error() {
        let vars = vec![("UCDIR_TRAIN_EPOCHZ".to_string(), "7".to_string())];
        let err = FileConfig::from_env(vars.into_iter()).unwrap_err();
        assert!(err.contains("epochz"));
    }

    #[test]
    fn dataset_shapes_fill_the_unpinned_fields() {
        let resolved = resolve_from(FileConfig::default()).unwrap();
        let cfg = resolved.train_for(24, 7);
        assert_eq!(cfg.layer_dims, vec![24, 32, 16]);
        assert_eq!(cfg.k, 7);
        let pinned: FileConfig =
            toml::from_str("[train]\nlayer_dims = [24, 8, 4]\nk = 3\n").unwrap();
        let resolved = resolve_from(pinned).unwrap();
        let cfg = resolved.train_for(24, 7);
        assert_eq!(cfg.layer_dims, vec![24, 8, 4]);
        assert_eq!(cfg.k, 3);
    }
}
