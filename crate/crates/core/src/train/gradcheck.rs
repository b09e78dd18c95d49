use ndarray::{ArrayViewMut, Dimension, IntoDimension};
use serde::Serialize;

use super::{backward, GradientSet};
use crate::error::Result;
use crate::network::{mse_loss, Network, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// 1-based layer of the worst coordinate.
    pub layer: usize,
    pub kind: ParamKind,
    pub index: Vec<usize>,
    pub analytic: f64,
    pub numeric: f64,
    pub params_checked: usize,
}

pub const DEFAULT_EPS: f64 = 1e-5;

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Checks the backward pass against central differences on every parameter.
pub fn grad_check(net: &Network, sample: &Sample, eps: f64) -> Result<GradCheckReport> {
    let trace = net.forward(sample.input.view())?;
    let analytic = backward(net, &trace, sample.target.view())?;
    grad_check_against(net, sample, eps, &analytic)
}

/// Like [`grad_check`], but compares against a caller-supplied gradient.
pub fn grad_check_against(
    net: &Network,
    sample: &Sample,
    eps: f64,
    analytic: &GradientSet,
) -> Result<GradCheckReport> {
    let cost = |n: &Network| -> Result<f64> {
        let pred = n.predict(sample.input.view())?;
        mse_loss(pred.view(), sample.target.view())
    };
    net.check_target(&sample.target.view())?;

    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        layer: 1,
        kind: ParamKind::Weight,
        index: Vec::new(),
        analytic: 0.0,
        numeric: 0.0,
        params_checked: 0,
    };
    for l in 0..net.layers.len() {
        let dims = net.layers[l].weights.raw_dim();
        for idx in ndarray::indices(dims) {
            let idx = idx.into_dimension();
            let numeric = central_difference(&mut probe, &cost, eps, |n| n.layers[l].weights.view_mut(), idx)?;
            record(&mut report, l, ParamKind::Weight, idx.slice(), analytic.d_weights[l][idx], numeric);
        }
        let dims = net.layers[l].biases.raw_dim();
        for idx in ndarray::indices(dims) {
            let idx = idx.into_dimension();
            let numeric = central_difference(&mut probe, &cost, eps, |n| n.layers[l].biases.view_mut(), idx)?;
            record(&mut report, l, ParamKind::Bias, idx.slice(), analytic.d_biases[l][idx], numeric);
        }
    }
    Ok(report)
}

fn central_difference<D, F>(
    probe: &mut Network,
    cost: &impl Fn(&Network) -> Result<f64>,
    eps: f64,
    param: F,
    idx: D,
) -> Result<f64>
where
    D: Dimension,
    F: for<'a> Fn(&'a mut Network) -> ArrayViewMut<'a, f64, D>,
{
    let original = param(probe)[idx.clone()];
    param(probe)[idx.clone()] = original + eps;
    let up = cost(probe)?;
    param(probe)[idx.clone()] = original - eps;
    let down = cost(probe)?;
    param(probe)[idx] = original;
    Ok((up - down) / (2.0 * eps))
}

fn record(report: &mut GradCheckReport, layer: usize, kind: ParamKind, index: &[usize], analytic: f64, numeric: f64) {
    report.params_checked += 1;
    let err = relative_error(analytic, numeric);
    if err > report.max_rel_err || report.index.is_empty() {
        *report = GradCheckReport {
            max_rel_err: err.max(report.max_rel_err),
            layer: layer + 1,
            kind,
            index: index.to_vec(),
            analytic,
            numeric,
            params_checked: report.params_checked,
        };
    }
}
