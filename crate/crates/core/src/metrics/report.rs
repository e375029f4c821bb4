use serde::{Deserialize, Serialize};

use super::bounds::preference_bounds;
use super::calibration::{bound_calibration, ece, CalibrationBins, LabeledPredictions};
use super::confusion::{classify, UqConfusion};
use super::ranking::ranking_score;
use crate::corpus::{PreferenceDataset, PreferenceExample};
use crate::error::{Error, Result};
use crate::heads::{HeadModel, RewardEstimate};
use crate::par::Exec;

pub const REPORT_SCHEMA: &str = "reward-uq/report/v1";
pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_BINS: usize = 10;

/// Estimates for both sides of one comparison, chosen first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub chosen: RewardEstimate,
    pub rejected: RewardEstimate,
}

/// Full metric suite for one model on one dataset.
///
/// Reports produced by category aggregation carry averaged rates only, so
/// `confusion` and the bin tables are absent there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema: String,
    /// Number of original (unflipped) comparisons.
    pub n: u64,
    pub win_rate: f64,
    pub ct_rate: f64,
    pub ut_rate: f64,
    pub cf_rate: f64,
    pub uf_rate: f64,
    pub alpha: f64,
    /// `None` when the score is undefined (α = 0 with an empty T or F set).
    pub rs_alpha: Option<f64>,
    pub beta: f64,
    pub ece: f64,
    pub elce: f64,
    pub euce: f64,
    pub ebce: f64,
    pub m_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<UqConfusion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<CalibrationBins>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bins: Option<CalibrationBins>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bins: Option<CalibrationBins>,
}

/// Model estimates for both sides of every example, in order.
pub fn score_pairs(
    model: &HeadModel,
    examples: &[PreferenceExample],
    beta: Option<f64>,
    exec: Exec,
) -> Result<Vec<ScoredPair>> {
    let zs: Vec<&[f64]> = examples
        .iter()
        .flat_map(|e| [e.chosen.as_slice(), e.rejected.as_slice()])
        .collect();
    let est = model.predict_batch(&zs, beta, exec)?;
    Ok(est
        .chunks_exact(2)
        .map(|p| ScoredPair { chosen: p[0], rejected: p[1] })
        .collect())
}

/// Metric report from scored original pairs; calibration uses the
/// symmetrized set implied by them.
pub fn report_from_scored(scored: &[ScoredPair], alpha: f64, m_bins: usize) -> Result<MetricReport> {
    let first = scored
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot evaluate an empty prediction set".into()))?;
    let mut c = UqConfusion::default();
    for p in scored {
        let (correct, confident) = classify(&p.chosen, &p.rejected);
        c.record(correct, confident);
    }
    let rs_alpha = match ranking_score(&c, alpha) {
        Ok(v) => Some(v),
        Err(Error::UndefinedScore { .. }) => None,
        Err(e) => return Err(e),
    };
    let bounds: Vec<_> = scored.iter().map(|p| preference_bounds(&p.chosen, &p.rejected)).collect();
    let labeled = LabeledPredictions::from_originals(&bounds);
    let (ece_value, bins) = ece(&labeled, m_bins)?;
    let bc = bound_calibration(&labeled, m_bins)?;
    let [ct_rate, ut_rate, cf_rate, uf_rate] = c.rates();
    Ok(MetricReport {
        schema: REPORT_SCHEMA.to_string(),
        n: c.n,
        win_rate: c.win_rate(),
        ct_rate,
        ut_rate,
        cf_rate,
        uf_rate,
        alpha,
        rs_alpha,
        beta: first.chosen.beta,
        ece: ece_value,
        elce: bc.elce,
        euce: bc.euce,
        ebce: bc.ebce,
        m_bins,
        confusion: Some(c),
        bins: Some(bins),
        lower_bins: Some(bc.lower_bins),
        upper_bins: Some(bc.upper_bins),
    })
}

/// Evaluates with the default execution mode.
pub fn evaluate(
    model: &HeadModel,
    dataset: &PreferenceDataset,
    alpha: f64,
    beta: Option<f64>,
    m_bins: usize,
) -> Result<MetricReport> {
    evaluate_with(model, dataset, alpha, beta, m_bins, Exec::default())
}

/// Scores the original half of `dataset` (all of it when unsymmetrized) and
/// computes the full report. `beta = None` uses the architecture default.
pub fn evaluate_with(
    model: &HeadModel,
    dataset: &PreferenceDataset,
    alpha: f64,
    beta: Option<f64>,
    m_bins: usize,
    exec: Exec,
) -> Result<MetricReport> {
    if dataset.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: dataset.dim(),
            line: None,
        });
    }
    let scored = score_pairs(model, dataset.originals(), beta, exec)?;
    report_from_scored(&scored, alpha, m_bins)
}
