//! Central-difference verification of tape gradients.

use crate::error::{Error, Result};

use super::array::DenseArray;
use super::tape::{NodeId, Tape};

/// Outcome of a gradient check: the worst relative error over every
/// coordinate of every parameter, plus where it happened.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: usize,
    pub worst_coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coords_checked: usize,
}

/// Compares tape gradients of a scalar loss against central finite
/// differences with step `h`, one coordinate at a time.
///
/// `build_loss` receives a fresh tape and one trainable leaf per entry of
/// `params`, and must return the scalar loss node. The relative error per
/// coordinate is `|analytic - numeric| / max(1, |analytic|, |numeric|)`, so
/// tiny gradients are compared absolutely and large ones relatively.
pub fn grad_check<F>(build_loss: F, params: &[DenseArray], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive and finite, got {h}"
        )));
    }
    if params.is_empty() {
        return Err(Error::InvalidInput(
            "gradient check needs at least one parameter".into(),
        ));
    }

    // Analytic pass.
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params
        .iter()
        .map(|p| tape.trainable(p.clone()))
        .collect::<Result<_>>()?;
    let root = build_loss(&mut tape, &ids)?;
    if !tape.shape(root).is_scalar() {
        return Err(Error::NonScalarRoot {
            shape: tape.shape(root).to_string(),
        });
    }
    let grads = tape.backward(root)?;

    let eval_perturbed = |param: usize, coord: usize, delta: f64| -> Result<f64> {
        let mut probe = Tape::new();
        let mut leaf_ids = Vec::with_capacity(params.len());
        for (j, p) in params.iter().enumerate() {
            let mut v = p.clone();
            if j == param {
                v.data_mut()[coord] += delta;
            }
            leaf_ids.push(probe.constant(v)?);
        }
        let r = build_loss(&mut probe, &leaf_ids)?;
        let val = probe
            .value(r)
            .as_scalar()
            .ok_or_else(|| Error::NonScalarRoot {
                shape: probe.shape(r).to_string(),
            })?;
        if !val.is_finite() {
            return Err(Error::NonFiniteProbe { param, coord });
        }
        Ok(val)
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: 0,
        worst_coord: 0,
        analytic: 0.0,
        numeric: 0.0,
        coords_checked: 0,
    };

    for (pi, p) in params.iter().enumerate() {
        let analytic_grad = grads
            .get(ids[pi])
            .expect("trainable leaves always have gradients");
        for c in 0..p.data().len() {
            let plus = eval_perturbed(pi, c, h)?;
            let minus = eval_perturbed(pi, c, -h)?;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = analytic_grad.data()[c];
            let rel = (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs());
            report.coords_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = pi;
                report.worst_coord = c;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
