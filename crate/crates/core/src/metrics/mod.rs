//! Evaluation metrics for uncertainty-aware preference predictions.
//!
//! Accuracy-type quantities (win rate, confusion counts, ranking score) are
//! computed on the original orientation of each pair; calibration errors are
//! computed on the symmetrized set, where every pair also appears flipped
//! with the opposite label.

mod bounds;
mod calibration;
mod confusion;
mod ranking;
mod report;

pub use bounds::{preference_bounds, PreferenceBound};
pub use calibration::{bin_index, bound_calibration, ece, BinStats, BoundCalibration, CalibrationBins, LabeledPredictions};
pub use confusion::{classify, confusion, UqConfusion};
pub use ranking::{ranking_score, ranking_score_from_rates, ranking_weight, unified_ranking_score};
pub use report::{
    evaluate, evaluate_with, report_from_scored, score_pairs, MetricReport, ScoredPair, DEFAULT_ALPHA, DEFAULT_BINS,
    REPORT_SCHEMA,
};
