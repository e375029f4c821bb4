use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heads::RewardEstimate;

/// Counts of confident/unconfident × true/false pairwise predictions.
///
/// A prediction is true when the chosen item gets the strictly higher reward
/// and confident when the two reward intervals are disjoint; intervals that
/// only touch at an endpoint overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UqConfusion {
    pub ct: u64,
    pub ut: u64,
    pub cf: u64,
    pub uf: u64,
    pub n: u64,
}

impl UqConfusion {
    pub fn from_counts(ct: u64, ut: u64, cf: u64, uf: u64) -> Self {
        UqConfusion { ct, ut, cf, uf, n: ct + ut + cf + uf }
    }

    /// Adds one classified prediction.
    pub fn record(&mut self, correct: bool, confident: bool) {
        match (confident, correct) {
            (true, true) => self.ct += 1,
            (false, true) => self.ut += 1,
            (true, false) => self.cf += 1,
            (false, false) => self.uf += 1,
        }
        self.n += 1;
    }

    pub fn trues(&self) -> u64 {
        self.ct + self.ut
    }

    pub fn falses(&self) -> u64 {
        self.cf + self.uf
    }

    pub fn win_rate(&self) -> f64 {
        self.trues() as f64 / self.n as f64
    }

    /// `(ct, ut, cf, uf)` divided by `n`.
    pub fn rates(&self) -> [f64; 4] {
        let n = self.n as f64;
        [self.ct as f64 / n, self.ut as f64 / n, self.cf as f64 / n, self.uf as f64 / n]
    }
}

/// Classifies one `(chosen, rejected)` pair as `(correct, confident)`.
pub fn classify(chosen: &RewardEstimate, rejected: &RewardEstimate) -> (bool, bool) {
    let correct = chosen.reward > rejected.reward;
    let confident = chosen.upper < rejected.lower || rejected.upper < chosen.lower;
    (correct, confident)
}

/// Confusion counts over `(chosen, rejected)` estimate pairs.
pub fn confusion(pairs: &[(RewardEstimate, RewardEstimate)]) -> Result<UqConfusion> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("confusion of an empty prediction set".into()));
    }
    let mut c = UqConfusion::default();
    for (chosen, rejected) in pairs {
        let (correct, confident) = classify(chosen, rejected);
        c.record(correct, confident);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(r: f64, u: f64) -> RewardEstimate {
        RewardEstimate::new(r, u, 1.0).unwrap()
    }

    #[test]
    fn disjoint_wrong_order_is_confident_false() {
        let c = confusion(&[(est(1.5, 0.5), est(3.5, 0.5))]).unwrap();
        assert_eq!(c, UqConfusion::from_counts(0, 0, 1, 0));
    }

    #[test]
    fn touching_intervals_overlap_and_ties_are_false() {
        let c = confusion(&[(est(2.0, 0.5), est(1.0, 0.5)), (est(1.0, 0.0), est(1.0, 0.0))]).unwrap();
        assert_eq!(c, UqConfusion::from_counts(0, 1, 0, 1));
    }

    #[test]
    fn huge_uncertainty_is_never_confident() {
        let pairs: Vec<_> = (0..20).map(|i| (est(i as f64, 1e6), est(-(i as f64), 1e6))).collect();
        let c = confusion(&pairs).unwrap();
        assert_eq!(c.ct + c.cf, 0);
        assert_eq!(c.n, 20);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(confusion(&[]).is_err());
    }
}
