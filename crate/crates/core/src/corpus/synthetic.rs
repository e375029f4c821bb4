use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Embedding, PreferenceDataset, PreferenceExample};
use crate::error::{Error, Result};
use crate::numeric::{dot, sigmoid};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureDistribution {
    /// Independent N(0, 1) per coordinate.
    StandardNormal,
}

/// How the chosen slot is assigned for a sampled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Bernoulli draw with probability σ(Δr).
    Bernoulli,
    /// The higher true reward is always chosen.
    Deterministic,
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(NoiseModel::Bernoulli),
            "deterministic" => Ok(NoiseModel::Deterministic),
            other => Err(Error::InvalidInput(format!("unknown noise model {other:?}"))),
        }
    }
}

/// Ground truth for synthetic preference data: a linear reward wᵀz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub true_weights: Vec<f64>,
    pub feature_distribution: FeatureDistribution,
    pub noise_model: NoiseModel,
    pub seed: u64,
}

impl SyntheticWorld {
    pub fn new(true_weights: Vec<f64>, noise_model: NoiseModel, seed: u64) -> Result<Self> {
        let world = SyntheticWorld {
            true_weights,
            feature_distribution: FeatureDistribution::StandardNormal,
            noise_model,
            seed,
        };
        world.validate()?;
        Ok(world)
    }

    /// World whose weights are a Gaussian direction rescaled to `weight_norm`,
    /// drawn from `seed`.
    pub fn random(dim: usize, noise_model: NoiseModel, seed: u64, weight_norm: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("world dimension must be positive".into()));
        }
        let mut r = rng::stream(seed, 0x5745_4947);
        let mut w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut r)).collect();
        let norm = dot(&w, &w).sqrt();
        w.iter_mut().for_each(|x| *x *= weight_norm / norm);
        Self::new(w, noise_model, seed)
    }

    pub fn dim(&self) -> usize {
        self.true_weights.len()
    }

    pub fn true_reward(&self, z: &[f64]) -> f64 {
        dot(&self.true_weights, z)
    }

    fn validate(&self) -> Result<()> {
        if self.true_weights.is_empty() {
            return Err(Error::InvalidInput("world needs at least one weight".into()));
        }
        if self.true_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("true weights".into()));
        }
        Ok(())
    }
}

/// Samples `n` comparisons from `world`. Equal seeds give identical datasets.
pub fn generate_synthetic(world: &SyntheticWorld, n: usize, seed: u64) -> Result<PreferenceDataset> {
    world.validate()?;
    let d = world.dim();
    let mut r = rng::stream(seed, 0);
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let a: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        let b: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
        let margin = world.true_reward(&a) - world.true_reward(&b);
        let a_wins = match world.noise_model {
            NoiseModel::Deterministic => margin >= 0.0,
            NoiseModel::Bernoulli => r.random::<f64>() < sigmoid(margin),
        };
        let (chosen, rejected) = if a_wins { (a, b) } else { (b, a) };
        examples.push(PreferenceExample {
            id: format!("syn-{seed}-{i}"),
            chosen: Embedding(chosen),
            rejected: Embedding(rejected),
            category: None,
            weight: 1.0,
        });
    }
    PreferenceDataset::new(d, examples)
}

/// Bradley-Terry probability that `chosen` beats `rejected` under the world's
/// true reward.
pub fn true_preference_probability(world: &SyntheticWorld, example: &PreferenceExample) -> Result<f64> {
    if example.dim() != world.dim() {
        return Err(Error::DimensionMismatch {
            expected: world.dim(),
            found: example.dim(),
            line: None,
        });
    }
    Ok(sigmoid(
        world.true_reward(example.chosen.as_slice()) - world.true_reward(example.rejected.as_slice()),
    ))
}
