//! Versioned JSON checkpoints.
//!
//! A checkpoint captures both encoders, the optimizer velocity, and the
//! training position. Feature banks and cluster models are deliberately
//! omitted: they are recomputed from the momentum encoder at the start of
//! every epoch, so resuming at an epoch boundary loses nothing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffmath::DenseArray;
use crate::encoder::{EncoderParams, Layer, MomentumEncoder};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// One layer's worth of values: weight rows plus bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerData {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LayerData {
    fn from_layer(layer: &Layer) -> Self {
        LayerData {
            weight: (0..layer.weight.rows())
                .map(|r| layer.weight.row(r).to_vec())
                .collect(),
            bias: layer.bias.data().to_vec(),
        }
    }

    fn to_layer(&self) -> Result<Layer> {
        if self.weight.is_empty() {
            return Err(Error::Checkpoint("layer has an empty weight matrix".into()));
        }
        let cols = self.weight[0].len();
        if self.weight.iter().any(|r| r.len() != cols) {
            return Err(Error::Checkpoint("ragged weight rows".into()));
        }
        if self.bias.len() != cols {
            return Err(Error::Checkpoint(format!(
                "bias length {} does not match weight columns {cols}",
                self.bias.len()
            )));
        }
        Ok(Layer {
            weight: DenseArray::from_rows(&self.weight),
            bias: DenseArray::vector(self.bias.clone()),
        })
    }
}

fn params_to_layers(params: &EncoderParams) -> Vec<LayerData> {
    params.layers().iter().map(LayerData::from_layer).collect()
}

fn layers_to_params(layers: &[LayerData]) -> Result<EncoderParams> {
    EncoderParams::new(
        layers
            .iter()
            .map(LayerData::to_layer)
            .collect::<Result<_>>()?,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub theta: Vec<LayerData>,
    pub theta_m: Vec<LayerData>,
    /// Optimizer velocity, shaped exactly like `theta`.
    pub velocity: Vec<LayerData>,
    /// Momentum coefficient of the twin encoder.
    pub m: f64,
    /// Epochs fully completed.
    pub epoch: usize,
    /// Optimizer steps taken (drives the cosine schedule on resume).
    pub step: usize,
    pub seed: u64,
}

impl Checkpoint {
    pub fn capture(
        theta: &EncoderParams,
        theta_m: &MomentumEncoder,
        velocity: &[DenseArray],
        epoch: usize,
        step: usize,
        seed: u64,
    ) -> Result<Self> {
        let flat = theta.flat();
        if velocity.len() != flat.len() {
            return Err(Error::Checkpoint(format!(
                "velocity holds {} arrays, parameters need {}",
                velocity.len(),
                flat.len()
            )));
        }
        // Repackage velocity (w, b, w, b, ...) into per-layer entries.
        let vel_layers: Vec<LayerData> = velocity
            .chunks(2)
            .map(|pair| {
                let w = &pair[0];
                LayerData {
                    weight: (0..w.rows()).map(|r| w.row(r).to_vec()).collect(),
                    bias: pair[1].data().to_vec(),
                }
            })
            .collect();
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION,
            layer_dims: theta.layer_dims(),
            theta: params_to_layers(theta),
            theta_m: params_to_layers(&theta_m.params),
            velocity: vel_layers,
            m: theta_m.m,
            epoch,
            step,
            seed,
        })
    }

    /// Reconstructs the runtime state. Fails on any structural inconsistency.
    pub fn restore(&self) -> Result<(EncoderParams, MomentumEncoder, Vec<DenseArray>)> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (this build reads {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let theta = layers_to_params(&self.theta)?;
        let theta_m = layers_to_params(&self.theta_m)?;
        if theta.layer_dims() != self.layer_dims || theta_m.layer_dims() != self.layer_dims {
            return Err(Error::Checkpoint(
                "layer_dims does not match stored parameters".into(),
            ));
        }
        let momentum = MomentumEncoder::new(theta_m, self.m)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if self.velocity.len() != self.theta.len() {
            return Err(Error::Checkpoint("velocity layer count mismatch".into()));
        }
        let mut velocity = Vec::with_capacity(self.velocity.len() * 2);
        for (i, (v, t)) in self.velocity.iter().zip(&self.theta).enumerate() {
            let layer = v.to_layer()?;
            if v.weight.len() != t.weight.len() || v.bias.len() != t.bias.len() {
                return Err(Error::Checkpoint(format!(
                    "velocity layer {i} shape does not match parameters"
                )));
            }
            velocity.push(layer.weight);
            velocity.push(layer.bias);
        }
        Ok((theta, momentum, velocity))
    }

    /// Writes atomically: serialize to a sibling temp file, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (this build reads {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }
}
