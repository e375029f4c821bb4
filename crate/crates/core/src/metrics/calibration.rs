use serde::{Deserialize, Serialize};

use super::bounds::PreferenceBound;
use crate::error::{Error, Result};

/// Predictions with binary outcomes (`true`: the first item was preferred).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPredictions {
    preds: Vec<PreferenceBound>,
    labels: Vec<bool>,
    symmetrized: bool,
}

impl LabeledPredictions {
    /// Symmetrized set built from predictions on original pairs: each pair
    /// contributes itself with label `true` and its complement with `false`.
    pub fn from_originals(bounds: &[PreferenceBound]) -> Self {
        let mut preds = bounds.to_vec();
        preds.extend(bounds.iter().map(PreferenceBound::complement));
        let mut labels = vec![true; bounds.len()];
        labels.extend(std::iter::repeat_n(false, bounds.len()));
        LabeledPredictions { preds, labels, symmetrized: true }
    }

    /// Arbitrary labelled predictions. The set counts as symmetrized only if
    /// its second half mirrors the first (complementary bounds to 1e-12,
    /// opposite labels).
    pub fn new(preds: Vec<PreferenceBound>, labels: Vec<bool>) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::InvalidInput("predictions and labels differ in length".into()));
        }
        let valid = |b: &PreferenceBound| {
            [b.p_lower, b.p_hat, b.p_upper].iter().all(|p| (0.0..=1.0).contains(p))
                && b.p_lower <= b.p_hat
                && b.p_hat <= b.p_upper
        };
        if !preds.iter().all(valid) {
            return Err(Error::InvalidInput("bounds must satisfy 0 <= lower <= hat <= upper <= 1".into()));
        }
        let half = preds.len() / 2;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let symmetrized = !preds.is_empty()
            && preds.len().is_multiple_of(2)
            && (0..half).all(|i| {
                let (a, b) = (&preds[i], &preds[i + half]);
                labels[i] != labels[i + half]
                    && close(a.p_hat, 1.0 - b.p_hat)
                    && close(a.p_lower, 1.0 - b.p_upper)
                    && close(a.p_upper, 1.0 - b.p_lower)
            });
        Ok(LabeledPredictions { preds, labels, symmetrized })
    }

    pub fn predictions(&self) -> &[PreferenceBound] {
        &self.preds
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }
}

/// Statistics of one bin. Means and frequency are zero for empty bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub mean_pred: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    /// Fraction of items in the bin whose first item was preferred.
    pub freq: f64,
}

/// Equal-width bins on `[0, 1]`: `[i/M, (i+1)/M)`, last bin closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBins {
    pub m: usize,
    pub bins: Vec<BinStats>,
}

impl CalibrationBins {
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }
}

fn edge(i: usize, m: usize) -> f64 {
    i as f64 / m as f64
}

/// Bin of `p` under the equal-width partition; values outside `[0, 1]` are
/// clamped into the end bins.
pub fn bin_index(p: f64, m: usize) -> usize {
    let mut idx = ((p * m as f64).floor().max(0.0) as usize).min(m - 1);
    // floor(p·M) can land one off the edge comparison; settle on the edges.
    while idx > 0 && p < edge(idx, m) {
        idx -= 1;
    }
    while idx + 1 < m && p >= edge(idx + 1, m) {
        idx += 1;
    }
    idx
}

fn tabulate(data: &LabeledPredictions, m: usize, key: impl Fn(&PreferenceBound) -> f64) -> CalibrationBins {
    #[derive(Default, Clone)]
    struct Acc {
        count: u64,
        pred: f64,
        lower: f64,
        upper: f64,
        pos: u64,
    }
    let mut acc = vec![Acc::default(); m];
    for (b, &label) in data.preds.iter().zip(&data.labels) {
        let a = &mut acc[bin_index(key(b), m)];
        a.count += 1;
        a.pred += b.p_hat;
        a.lower += b.p_lower;
        a.upper += b.p_upper;
        a.pos += label as u64;
    }
    let bins = acc
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let c = a.count as f64;
            let mean = |s: f64| if a.count == 0 { 0.0 } else { s / c };
            BinStats {
                lo: edge(i, m),
                hi: edge(i + 1, m),
                count: a.count,
                mean_pred: mean(a.pred),
                mean_lower: mean(a.lower),
                mean_upper: mean(a.upper),
                freq: mean(a.pos as f64),
            }
        })
        .collect();
    CalibrationBins { m, bins }
}

fn weighted_sum(bins: &CalibrationBins, n: usize, gap: impl Fn(&BinStats) -> f64) -> f64 {
    bins.bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| b.count as f64 / n as f64 * gap(b))
        .sum()
}

fn check(data: &LabeledPredictions, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("number of bins must be positive".into()));
    }
    if !data.symmetrized {
        return Err(Error::NotSymmetrized);
    }
    Ok(())
}

/// Expected calibration error of the point probabilities, binned by `p_hat`.
pub fn ece(data: &LabeledPredictions, m: usize) -> Result<(f64, CalibrationBins)> {
    check(data, m)?;
    let bins = tabulate(data, m, |b| b.p_hat);
    let e = weighted_sum(&bins, data.len(), |b| (b.freq - b.mean_pred).abs());
    Ok((e, bins))
}

/// One-sided calibration errors of the lower and upper bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCalibration {
    pub elce: f64,
    pub euce: f64,
    /// Reported bound error; equals `elce` (and `euce`) on symmetrized sets.
    pub ebce: f64,
    pub lower_bins: CalibrationBins,
    pub upper_bins: CalibrationBins,
}

/// ELCE penalises lower bounds above the empirical frequency, EUCE upper
/// bounds below it. Lower and upper bounds are binned separately.
pub fn bound_calibration(data: &LabeledPredictions, m: usize) -> Result<BoundCalibration> {
    check(data, m)?;
    let lower_bins = tabulate(data, m, |b| b.p_lower);
    let upper_bins = tabulate(data, m, |b| b.p_upper);
    let elce = weighted_sum(&lower_bins, data.len(), |b| (b.mean_lower - b.freq).max(0.0));
    let euce = weighted_sum(&upper_bins, data.len(), |b| (b.freq - b.mean_upper).max(0.0));
    Ok(BoundCalibration { elce, euce, ebce: elce, lower_bins, upper_bins })
}
