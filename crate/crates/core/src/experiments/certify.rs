use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificates::{
    check_input_matrix, check_output_map, check_virtual_column, check_virtual_row, collect_matrices,
    drift_column_allowance, drift_row_allowance, estimate_a, find_weights, required_gain_bound,
    required_gain_bound_dual, CertificateReport, DominanceMode, InputMatrixField, Interval, MatrixField,
    NetworkVirtual, OutputJacobianField, SampleDomain, VirtualJacobian, DEFAULT_WEIGHT_CAP,
};
use crate::error::Result;
use crate::systems::{FeedbackForm, SisVirtual};

use super::config::{ExperimentConfig, Model, ModelKind};
use super::run::write_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifySummary {
    pub model: String,
    pub form: FeedbackForm,
    pub samples: usize,
    pub seed: u64,
    pub x_range: [f64; 2],
    pub weights: Vec<f64>,
    pub weights_from_lp: bool,
    pub a_estimate: f64,
    pub drift_allowance: f64,
    pub a_safety: f64,
    pub a_used: f64,
    pub d: f64,
    /// Decay margin of the input matrix (state feedback) or output Jacobian.
    pub c: f64,
    /// Uniform gain level certified for the virtual system, if `c > 0`.
    pub required_gain_bound: Option<f64>,
    pub reports: Vec<CertificateReport>,
}

fn virtual_jacobian<'a>(model: &'a Model, gains: Vec<f64>) -> Box<dyn VirtualJacobian + 'a> {
    match &model.kind {
        ModelKind::Sis(graph) => Box::new(SisVirtual {
            graph: graph.clone(),
            gains,
        }),
        ModelKind::Linear(lin) => Box::new(lin.virtual_jacobian(&gains)),
        _ => Box::new(NetworkVirtual {
            network: &model.network,
            gains,
        }),
    }
}

pub fn sample_domain(cfg: &ExperimentConfig, model: &Model) -> SampleDomain {
    let [lo, hi] = cfg.certify.x_range.unwrap_or_else(|| model.default_x_range());
    let [t0, t1] = cfg.certify.t_range;
    let x = Interval::new(lo, hi);
    SampleDomain::uniform(model.network.n(), Interval::new(t0, t1), x, x, x, x, cfg.certify.samples, cfg.certify.seed)
}

/// Sampled certificates for the configured model: dominance of `B` (or
/// `dH/dx`), the delayed-Jacobian bound, the resulting gain level and a
/// check of the virtual system at that level.
pub fn certify_model(cfg: &ExperimentConfig, model: &Model) -> Result<CertifySummary> {
    let net = &model.network;
    let n = net.n();
    let dom = sample_domain(cfg, model);
    let form = net.form();
    let (field, mode): (Box<dyn MatrixField + '_>, DominanceMode) = match form {
        FeedbackForm::StateFeedback => (Box::new(InputMatrixField(net)), DominanceMode::Column),
        FeedbackForm::OutputFeedback => (Box::new(OutputJacobianField(net)), DominanceMode::Row),
    };
    let lp = if cfg.certify.find_weights {
        find_weights(&collect_matrices(field.as_ref(), &dom), mode, 0.0, DEFAULT_WEIGHT_CAP)?
    } else {
        None
    };
    let weights_from_lp = lp.is_some();
    let v = lp.map_or_else(|| vec![1.0; n], |s| s.weights);
    let matrix_report = match form {
        FeedbackForm::StateFeedback => check_input_matrix(field.as_ref(), &dom, &v)?,
        FeedbackForm::OutputFeedback => check_output_map(field.as_ref(), &dom, &v)?,
    };
    let c = matrix_report.c_star;
    let d = net.rate_bound();
    let drift = virtual_jacobian(model, vec![0.0; n]);
    let a_estimate = estimate_a(drift.as_ref(), &dom)?;
    let drift_allowance = match form {
        FeedbackForm::StateFeedback => drift_column_allowance(drift.as_ref(), &dom, &v, d)?,
        FeedbackForm::OutputFeedback => drift_row_allowance(drift.as_ref(), &dom, &v)?,
    };
    let a_used = a_estimate.max(drift_allowance) * cfg.certify.a_safety;
    let mut reports = vec![matrix_report];
    let bound = if c > 0.0 {
        let k = match form {
            FeedbackForm::StateFeedback => required_gain_bound(a_used, net.r(), d, c, &v)?,
            FeedbackForm::OutputFeedback => required_gain_bound_dual(a_used, net.r(), c, &v)?,
        };
        let jac = virtual_jacobian(model, vec![k; n]);
        reports.push(match form {
            FeedbackForm::StateFeedback => check_virtual_column(jac.as_ref(), &dom, &v, a_used, d)?,
            FeedbackForm::OutputFeedback => check_virtual_row(jac.as_ref(), &dom, &v, a_used)?,
        });
        Some(k)
    } else {
        None
    };
    Ok(CertifySummary {
        model: model.name().to_string(),
        form,
        samples: dom.samples,
        seed: dom.seed,
        x_range: [dom.x[0].lo, dom.x[0].hi],
        weights: v,
        weights_from_lp,
        a_estimate,
        drift_allowance,
        a_safety: cfg.certify.a_safety,
        a_used,
        d,
        c,
        required_gain_bound: bound,
        reports,
    })
}

pub fn certify(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<CertifySummary> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let summary = certify_model(cfg, &model)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("certificates.json"), &summary)?;
    }
    Ok(summary)
}
