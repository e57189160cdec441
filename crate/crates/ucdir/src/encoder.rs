//! Small MLP encoder with tanh hidden activations and L2-normalized output,
//! plus the momentum twin that provides slowly-moving target features.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffmath::{DenseArray, NodeId, Shape, Tape};
use crate::error::{Error, Result};

/// A unit-norm embedding produced by the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `(d_in, d_out)` weight matrix.
    pub weight: DenseArray,
    /// `(d_out,)` bias.
    pub bias: DenseArray,
}

/// Encoder parameters: a stack of affine layers. The forward pass applies
/// tanh between layers (not after the last) and L2-normalizes the output.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    layers: Vec<Layer>,
}

impl EncoderParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let p = EncoderParams { layers };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("encoder needs at least one layer".into()));
        }
        let mut prev_out = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let (d_in, d_out) = match layer.weight.shape() {
                Shape::Matrix(r, c) => (r, c),
                s => {
                    return Err(Error::InvalidConfig(format!(
                        "layer {i} weight must be a matrix, got {s}"
                    )))
                }
            };
            if layer.bias.shape() != Shape::Vector(d_out) {
                return Err(Error::InvalidConfig(format!(
                    "layer {i} bias shape {} does not match weight output dim {d_out}",
                    layer.bias.shape()
                )));
            }
            if let Some(prev) = prev_out {
                if d_in != prev {
                    return Err(Error::InvalidConfig(format!(
                        "layer {i} input dim {d_in} does not match previous output dim {prev}"
                    )));
                }
            }
            if !layer.weight.all_finite() || !layer.bias.all_finite() {
                return Err(Error::InvalidConfig(format!(
                    "layer {i} contains non-finite parameters"
                )));
            }
            prev_out = Some(d_out);
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("validated non-empty").weight.cols()
    }

    /// `[d_in, hidden..., d_out]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.weight.cols()));
        dims
    }

    /// All parameter arrays in the fixed order `w0, b0, w1, b1, ...` — the
    /// canonical ordering shared with gradients, velocity, and checkpoints.
    pub fn flat(&self) -> Vec<&DenseArray> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn flat_mut(&mut self) -> Vec<&mut DenseArray> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

/// Fresh parameters with Xavier-uniform weights (`|w| < sqrt(6/(d_in+d_out))`)
/// and zero biases, drawn deterministically from `seed`.
pub fn init_params(layer_dims: &[usize], seed: u64) -> Result<EncoderParams> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidConfig(
            "layer_dims needs at least an input and an output dim".into(),
        ));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidConfig("layer dims must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(layer_dims.len() - 1);
    for w in layer_dims.windows(2) {
        let (d_in, d_out) = (w[0], w[1]);
        let bound = (6.0 / (d_in + d_out) as f64).sqrt();
        let data: Vec<f64> = (0..d_in * d_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        layers.push(Layer {
            weight: DenseArray::matrix(d_in, d_out, data),
            bias: DenseArray::zeros(Shape::Vector(d_out)),
        });
    }
    EncoderParams::new(layers)
}

/// The momentum twin: an exponential moving average of the online encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumEncoder {
    pub params: EncoderParams,
    pub m: f64,
}

impl MomentumEncoder {
    /// Starts the twin as an exact copy of the online parameters.
    pub fn new(params: EncoderParams, m: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::InvalidConfig(format!(
                "momentum coefficient must lie in [0, 1], got {m}"
            )));
        }
        Ok(MomentumEncoder { params, m })
    }

    /// `p' <- m * p' + (1 - m) * p` for every parameter entry.
    pub fn update_from(&mut self, online: &EncoderParams) -> Result<()> {
        if online.layer_dims() != self.params.layer_dims() {
            return Err(Error::InvalidConfig(
                "momentum update: online and twin encoders have different layouts".into(),
            ));
        }
        let m = self.m;
        for (mine, theirs) in self.params.flat_mut().into_iter().zip(online.flat()) {
            for (a, &b) in mine.data_mut().iter_mut().zip(theirs.data()) {
                *a = m * *a + (1.0 - m) * b;
            }
        }
        Ok(())
    }
}

/// Node ids of encoder parameters inserted on a tape, in layer order.
pub struct EncoderNodes {
    layers: Vec<(NodeId, NodeId)>,
}

impl EncoderNodes {
    /// Parameter node ids in the canonical `w0, b0, w1, b1, ...` order.
    pub fn flat(&self) -> Vec<NodeId> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    /// Rebuilds the layer pairing from a flat `w0, b0, w1, b1, ...` id list,
    /// e.g. when the leaves were created externally for gradient probing.
    pub fn from_flat(ids: &[NodeId]) -> Result<Self> {
        if ids.is_empty() || !ids.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "need an even, non-zero number of parameter ids, got {}",
                ids.len()
            )));
        }
        Ok(EncoderNodes {
            layers: ids.chunks(2).map(|c| (c[0], c[1])).collect(),
        })
    }
}

/// Registers encoder parameters as leaves on a tape. With `trainable = true`
/// they will receive gradients; with `false` they are frozen constants (used
/// for the momentum twin, which must stay outside the gradient path).
pub fn insert_params(tape: &mut Tape, params: &EncoderParams, trainable: bool) -> Result<EncoderNodes> {
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (w, b) = if trainable {
            (
                tape.trainable(layer.weight.clone())?,
                tape.trainable(layer.bias.clone())?,
            )
        } else {
            (
                tape.constant(layer.weight.clone())?,
                tape.constant(layer.bias.clone())?,
            )
        };
        layers.push((w, b));
    }
    Ok(EncoderNodes { layers })
}

/// Runs the encoder over a `(batch, d_in)` matrix node and returns the
/// `(batch, d_out)` unit-norm feature node. This is the single forward code
/// path: the pure [`encode_matrix`] drives it on a throwaway tape.
pub fn encode_on_tape(tape: &mut Tape, nodes: &EncoderNodes, input: NodeId) -> Result<NodeId> {
    let mut h = input;
    let last = nodes.layers.len() - 1;
    for (i, &(w, b)) in nodes.layers.iter().enumerate() {
        h = tape.matmul(h, w)?;
        h = tape.add_row_broadcast(h, b)?;
        if i < last {
            h = tape.tanh(h)?;
        }
    }
    tape.l2_normalize(h).map_err(|e| match e {
        // A vanishing pre-normalization norm is representation collapse.
        Error::DegenerateNorm { norm, .. } => Error::Collapse { norm },
        other => other,
    })
}

/// Encodes a `(batch, d_in)` matrix of raw inputs without touching any
/// gradient state.
pub fn encode_matrix(params: &EncoderParams, inputs: &DenseArray) -> Result<DenseArray> {
    match inputs.shape() {
        Shape::Matrix(_, c) if c == params.input_dim() => {}
        s => {
            return Err(Error::InvalidInput(format!(
                "encoder expects a (batch, {}) matrix, got {s}",
                params.input_dim()
            )))
        }
    }
    if !inputs.all_finite() {
        return Err(Error::InvalidInput("encoder input contains non-finite values".into()));
    }
    let mut tape = Tape::new();
    let nodes = insert_params(&mut tape, params, false)?;
    let x = tape.constant(inputs.clone())?;
    let out = encode_on_tape(&mut tape, &nodes, x)?;
    Ok(tape.value(out).clone())
}

/// Encodes a slice of raw vectors into unit-norm features.
pub fn encode(params: &EncoderParams, inputs: &[Vec<f64>]) -> Result<Vec<FeatureVector>> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    if inputs.iter().any(|r| r.len() != params.input_dim()) {
        return Err(Error::InvalidInput(format!(
            "encoder expects rows of length {}",
            params.input_dim()
        )));
    }
    let matrix = DenseArray::from_rows(inputs);
    let out = encode_matrix(params, &matrix)?;
    Ok((0..out.rows())
        .map(|r| FeatureVector::new(out.row(r).to_vec()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffmath::grad_check;

    fn identity_encoder(d: usize) -> EncoderParams {
        let mut w = DenseArray::zeros(Shape::Matrix(d, d));
        for i in 0..d {
            w.data_mut()[i * d + i] = 1.0;
        }
        EncoderParams::new(vec![Layer {
            weight: w,
            bias: DenseArray::zeros(Shape::Vector(d)),
        }])
        .unwrap()
    }

    #[test]
    fn identity_single_layer_reduces_to_l2_normalize() {
        let enc = identity_encoder(2);
        let out = encode(&enc, &[vec![3.0, 4.0]]).unwrap();
        assert_eq!(out[0].as_slice(), &[0.6, 0.8]);
    }

    #[test]
    fn zero_weights_collapse_loudly() {
        let enc = EncoderParams::new(vec![Layer {
            weight: DenseArray::zeros(Shape::Matrix(2, 2)),
            bias: DenseArray::zeros(Shape::Vector(2)),
        }])
        .unwrap();
        let err = encode(&enc, &[vec![1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::Collapse { .. }), "got {err}");
    }

    #[test]
    fn init_is_deterministic_and_xavier_bounded() {
        let a = init_params(&[8, 32, 16], 99).unwrap();
        let b = init_params(&[8, 32, 16], 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(&[8, 32, 16], 100).unwrap());

        for (i, layer) in a.layers().iter().enumerate() {
            let (d_in, d_out) = (layer.weight.rows(), layer.weight.cols());
            let bound = (6.0 / (d_in + d_out) as f64).sqrt();
            assert!(layer.weight.data().iter().all(|w| w.abs() < bound), "layer {i}");
            assert!(layer.bias.data().iter().all(|&b| b == 0.0));
        }
        assert_eq!(a.layer_dims(), vec![8, 32, 16]);
    }

    #[test]
    fn outputs_are_unit_norm_rows() {
        let enc = init_params(&[6, 16, 4], 3).unwrap();
        let inputs: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..6).map(|j| ((i * 7 + j * 3) as f64).sin()).collect())
            .collect();
        for f in encode(&enc, &inputs).unwrap() {
            let norm: f64 = f.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn momentum_update_endpoints_and_midpoint() {
        let online = init_params(&[3, 2], 1).unwrap();
        let start = init_params(&[3, 2], 2).unwrap();

        let mut frozen = MomentumEncoder::new(start.clone(), 1.0).unwrap();
        frozen.update_from(&online).unwrap();
        assert_eq!(frozen.params, start);

        let mut copy = MomentumEncoder::new(start.clone(), 0.0).unwrap();
        copy.update_from(&online).unwrap();
        assert_eq!(copy.params, online);

        let mut half = MomentumEncoder::new(start.clone(), 0.5).unwrap();
        half.update_from(&online).unwrap();
        for ((h, s), o) in half
            .params
            .flat()
            .iter()
            .zip(start.flat())
            .zip(online.flat())
        {
            for ((hv, sv), ov) in h.data().iter().zip(s.data()).zip(o.data()) {
                assert!((hv - 0.5 * (sv + ov)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn momentum_twin_receives_no_gradients() {
        let online = init_params(&[3, 4, 2], 5).unwrap();
        let twin = MomentumEncoder::new(init_params(&[3, 4, 2], 6).unwrap(), 0.99).unwrap();

        let mut tape = Tape::new();
        let online_nodes = insert_params(&mut tape, &online, true).unwrap();
        let twin_nodes = insert_params(&mut tape, &twin.params, false).unwrap();
        let x = tape
            .constant(DenseArray::matrix(2, 3, vec![0.5, -0.2, 0.8, 0.1, 0.9, -0.4]))
            .unwrap();
        let f = encode_on_tape(&mut tape, &online_nodes, x).unwrap();
        let g = encode_on_tape(&mut tape, &twin_nodes, x).unwrap();
        let sim = tape.dot(f, g).unwrap();
        let grads = tape.backward(sim).unwrap();

        let populated = grads.populated();
        assert_eq!(populated, online_nodes.flat());
        for id in twin_nodes.flat() {
            assert!(grads.get(id).is_none());
        }
    }

    #[test]
    fn whole_encoder_gradient_survives_finite_difference_check() {
        let enc = init_params(&[4, 5, 3], 11).unwrap();
        let params: Vec<DenseArray> = enc.flat().into_iter().cloned().collect();
        let x = DenseArray::matrix(3, 4, vec![
            0.2, -0.5, 0.7, 0.1, -0.3, 0.6, -0.8, 0.4, 0.9, -0.1, 0.2, -0.6,
        ]);
        let target = DenseArray::matrix(3, 3, vec![
            0.5, 0.1, -0.2, -0.4, 0.3, 0.6, 0.2, -0.7, 0.1,
        ]);
        let report = grad_check(
            |tape, ids| {
                let layers = EncoderNodes {
                    layers: vec![(ids[0], ids[1]), (ids[2], ids[3])],
                };
                let xi = tape.constant(x.clone())?;
                let f = encode_on_tape(tape, &layers, xi)?;
                let t = tape.constant(target.clone())?;
                tape.dot(f, t)
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-7, "err = {}", report.max_rel_err);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let online = init_params(&[3, 2], 1).unwrap();
        let mut twin = MomentumEncoder::new(init_params(&[3, 3], 2).unwrap(), 0.9).unwrap();
        assert!(twin.update_from(&online).is_err());
    }
}
