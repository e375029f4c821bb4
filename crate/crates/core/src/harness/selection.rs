use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricReport;

/// Threshold-then-rank rule: keep candidates with ECE and EBCE under the
/// limits, then order by RS_α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionRule {
    pub ece_max: f64,
    pub ebce_max: f64,
    pub alpha: f64,
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule {
            ece_max: 0.05,
            ebce_max: 0.01,
            alpha: 0.2,
        }
    }
}

impl SelectionRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.ece_max > 0.0 && self.ebce_max > 0.0) {
            return Err(Error::InvalidConfig("selection thresholds must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// The quantities the selection rule looks at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateMetrics {
    pub ece: f64,
    pub ebce: f64,
    pub rs_alpha: Option<f64>,
    #[serde(default)]
    pub win_rate: f64,
}

impl From<&MetricReport> for CandidateMetrics {
    fn from(r: &MetricReport) -> Self {
        CandidateMetrics {
            ece: r.ece,
            ebce: r.ebce,
            rs_alpha: r.rs_alpha,
            win_rate: r.win_rate,
        }
    }
}

/// Outcome of one grid point. Exactly one of `metrics` and `failure` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub index: usize,
    /// Canonical `name=value` list, also the last ranking tie-breaker.
    pub config: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<CandidateMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub rank: usize,
    pub index: usize,
    pub config: String,
    pub rs_alpha: f64,
    pub win_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredCandidate {
    pub index: usize,
    pub config: String,
    pub reasons: Vec<String>,
}

/// Ranked survivors and filtered candidates with reasons. `selected` is the
/// index of the top-ranked candidate, if any survived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionLedger {
    pub rule: SelectionRule,
    pub selected: Option<usize>,
    pub ranked: Vec<RankedCandidate>,
    pub filtered: Vec<FilteredCandidate>,
}

// Negated comparisons so that NaN metrics are rejected.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn rejection_reasons(c: &CandidateRecord, rule: &SelectionRule) -> Vec<String> {
    if let Some(f) = &c.failure {
        return vec![f.clone()];
    }
    let Some(m) = c.metrics else {
        return vec!["no metrics".to_string()];
    };
    let mut reasons = Vec::new();
    if !(m.ece <= rule.ece_max) {
        reasons.push(format!("ece {} > {}", m.ece, rule.ece_max));
    }
    if !(m.ebce <= rule.ebce_max) {
        reasons.push(format!("ebce {} > {}", m.ebce, rule.ebce_max));
    }
    if m.rs_alpha.is_none() {
        reasons.push("ranking score undefined".to_string());
    }
    reasons
}

/// Applies the thresholds, then sorts survivors by RS_α descending, win rate
/// descending and configuration string ascending.
pub fn select_candidates(candidates: &[CandidateRecord], rule: &SelectionRule) -> Result<SelectionLedger> {
    rule.validate()?;
    let mut survivors = Vec::new();
    let mut filtered = Vec::new();
    for c in candidates {
        let reasons = rejection_reasons(c, rule);
        if reasons.is_empty() {
            let m = c.metrics.expect("survivors have metrics");
            survivors.push((c, m.rs_alpha.expect("survivors have a score"), m.win_rate));
        } else {
            filtered.push(FilteredCandidate {
                index: c.index,
                config: c.config.clone(),
                reasons,
            });
        }
    }
    survivors.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(b.2.total_cmp(&a.2))
            .then_with(|| a.0.config.cmp(&b.0.config))
            .then(a.0.index.cmp(&b.0.index))
    });
    let ranked: Vec<RankedCandidate> = survivors
        .into_iter()
        .enumerate()
        .map(|(rank, (c, rs, win))| RankedCandidate {
            rank: rank + 1,
            index: c.index,
            config: c.config.clone(),
            rs_alpha: rs,
            win_rate: win,
        })
        .collect();
    filtered.sort_by_key(|f| f.index);
    Ok(SelectionLedger {
        rule: rule.clone(),
        selected: ranked.first().map(|r| r.index),
        ranked,
        filtered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(index: usize, ece: f64, ebce: f64, rs: f64) -> CandidateRecord {
        CandidateRecord {
            index,
            config: format!("c{index}"),
            seed: 0,
            metrics: Some(CandidateMetrics { ece, ebce, rs_alpha: Some(rs), win_rate: 0.5 }),
            failure: None,
            report: None,
        }
    }

    #[test]
    fn hand_fixture() {
        let cs = [cand(0, 0.04, 0.005, 0.3), cand(1, 0.06, 0.005, 0.9), cand(2, 0.04, 0.005, 0.2)];
        let l = select_candidates(&cs, &SelectionRule::default()).unwrap();
        assert_eq!(l.selected, Some(0));
        assert_eq!(l.ranked.iter().map(|r| r.index).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(l.filtered.len(), 1);
        assert_eq!(l.filtered[0].index, 1);
        assert!(l.filtered[0].reasons[0].starts_with("ece"));
    }

    #[test]
    fn all_filtered_gives_empty_selection() {
        let mut diverged = cand(1, 0.0, 0.0, 0.0);
        diverged.metrics = None;
        diverged.failure = Some("diverged".into());
        let l = select_candidates(&[cand(0, 0.1, 0.5, 0.9), diverged], &SelectionRule::default()).unwrap();
        assert_eq!(l.selected, None);
        assert_eq!(l.filtered[0].reasons.len(), 2);
        assert_eq!(l.filtered[1].reasons, vec!["diverged".to_string()]);
    }

    #[test]
    fn ties_break_on_win_rate_then_config() {
        let mut a = cand(0, 0.0, 0.0, 0.5);
        let mut b = cand(1, 0.0, 0.0, 0.5);
        let c = cand(2, 0.0, 0.0, 0.5);
        a.config = "z".into();
        b.metrics.as_mut().unwrap().win_rate = 0.9;
        let l = select_candidates(&[a, b, c], &SelectionRule::default()).unwrap();
        assert_eq!(l.ranked.iter().map(|r| r.index).collect::<Vec<_>>(), vec![1, 2, 0]);
    }

    #[test]
    fn bad_rule_rejected() {
        let rule = SelectionRule { ece_max: 0.0, ..SelectionRule::default() };
        assert!(select_candidates(&[], &rule).is_err());
    }
}
