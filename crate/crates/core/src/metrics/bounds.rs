use serde::{Deserialize, Serialize};

use crate::heads::RewardEstimate;
use crate::numeric::sigmoid;

/// Point preference probability with its optimistic and pessimistic bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceBound {
    pub p_hat: f64,
    pub p_lower: f64,
    pub p_upper: f64,
}

impl PreferenceBound {
    /// Bounds of the same comparison read in the opposite direction.
    pub fn complement(&self) -> Self {
        PreferenceBound {
            p_hat: 1.0 - self.p_hat,
            p_lower: 1.0 - self.p_upper,
            p_upper: 1.0 - self.p_lower,
        }
    }
}

/// Bradley-Terry probability that `chosen` beats `rejected`, with bounds from
/// the largest and smallest margins the reward intervals allow.
pub fn preference_bounds(chosen: &RewardEstimate, rejected: &RewardEstimate) -> PreferenceBound {
    PreferenceBound {
        p_hat: sigmoid(chosen.reward - rejected.reward),
        p_lower: sigmoid(chosen.lower - rejected.upper),
        p_upper: sigmoid(chosen.upper - rejected.lower),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(r: f64, u: f64) -> RewardEstimate {
        RewardEstimate::new(r, u, 1.0).unwrap()
    }

    #[test]
    fn zero_uncertainty_collapses() {
        let b = preference_bounds(&est(0.3, 0.0), &est(-0.2, 0.0));
        assert_eq!(b.p_lower, b.p_hat);
        assert_eq!(b.p_upper, b.p_hat);
    }

    #[test]
    fn equal_rewards_are_symmetric() {
        let b = preference_bounds(&est(1.0, 0.4), &est(1.0, 0.4));
        assert_eq!(b.p_hat, 0.5);
        assert!((b.p_upper - sigmoid(0.8)).abs() < 1e-15);
        assert!((b.p_lower - sigmoid(-0.8)).abs() < 1e-15);
    }

    #[test]
    fn flipped_pair_is_antisymmetric() {
        let (a, b) = (est(0.7, 0.2), est(-1.1, 0.9));
        let orig = preference_bounds(&a, &b);
        let flip = preference_bounds(&b, &a);
        assert!((flip.p_upper - (1.0 - orig.p_lower)).abs() < 1e-12);
        assert!((flip.p_lower - (1.0 - orig.p_upper)).abs() < 1e-12);
        assert!((flip.p_hat - (1.0 - orig.p_hat)).abs() < 1e-12);
        assert!(orig.p_lower <= orig.p_hat && orig.p_hat <= orig.p_upper);
    }
}
