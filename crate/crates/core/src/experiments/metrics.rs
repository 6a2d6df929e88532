//! Recovery quality metrics and the per-run report record.

use serde::Serialize;

use crate::error::Error;
use crate::DenseVector;

/// Parameters a run was executed with, echoed into its report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterEcho {
    pub example: String,
    pub epsilon: f64,
    pub alpha: f64,
    /// Box bound; `None` means unbounded (the JSON-friendly spelling of
    /// infinity).
    pub s: Option<f64>,
    pub rank: usize,
    pub max_iters: usize,
    pub noise_level: f64,
    pub seed: u64,
    pub threshold_frac: f64,
    pub state_grid: usize,
    pub source_grid: usize,
    pub data_state_grid: usize,
    pub data_source_grid: usize,
    pub unit_weights: bool,
}

/// Support and error metrics of a recovered source against the truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub support_precision: f64,
    pub support_recall: f64,
    pub linf_error: f64,
    pub l2_error: f64,
    pub recovered_support_size: usize,
    pub true_support_size: usize,
    pub threshold_frac: f64,
    /// Weighted l1 value of the recovered source, when a model was in play.
    pub weighted_l1: Option<f64>,
    /// Final data misfit `|A x - b|_2`, when data was in play.
    pub misfit: Option<f64>,
    pub runtime_seconds: Option<f64>,
    pub parameters: Option<ParameterEcho>,
}

/// Reads supports and compares: recovered support is
/// `{i : x_i > threshold_frac * max(x)}`, truth support is
/// `{i : x*_i > 0}`.  An empty recovered support has precision 1 by
/// convention (no false positives), an empty truth support has recall 1.
pub fn compute_metrics(
    x: &DenseVector,
    x_star: &DenseVector,
    threshold_frac: f64,
) -> Result<RecoveryReport, Error> {
    if x.len() != x_star.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            x.len(),
            x_star.len()
        )));
    }
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold fraction must be in (0,1), got {threshold_frac}"
        )));
    }
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cut = threshold_frac * max;
    let recovered: Vec<bool> = x.iter().map(|&v| max > 0.0 && v > cut).collect();
    let truth: Vec<bool> = x_star.iter().map(|&v| v > 0.0).collect();
    let n_rec = recovered.iter().filter(|&&b| b).count();
    let n_true = truth.iter().filter(|&&b| b).count();
    let n_both = recovered.iter().zip(&truth).filter(|&(&r, &t)| r && t).count();
    let support_precision = if n_rec == 0 { 1.0 } else { n_both as f64 / n_rec as f64 };
    let support_recall = if n_true == 0 { 1.0 } else { n_both as f64 / n_true as f64 };
    let diff = x - x_star;
    Ok(RecoveryReport {
        support_precision,
        support_recall,
        linf_error: diff.amax(),
        l2_error: diff.norm(),
        recovered_support_size: n_rec,
        true_support_size: n_true,
        threshold_frac,
        weighted_l1: None,
        misfit: None,
        runtime_seconds: None,
        parameters: None,
    })
}
