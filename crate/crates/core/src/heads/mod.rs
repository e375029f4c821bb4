//! Uncertainty-aware reward heads and the symmetric confidence bounds they
//! produce.

mod checkpoint;
mod dropout;
mod laplace;
mod lora;
mod mlp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng::derive_seed;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_SCHEMA};
pub use dropout::{mc_dropout_forward, McDropoutModel};
pub(crate) use dropout::apply_mask;
pub use laplace::{
    laplace_fit, laplace_uncertainty, laplace_update, neg_log_posterior, neg_log_posterior_grad,
    BayesLinearModel, LaplacePosterior,
};
pub use lora::{LoraShape, LowRankEnsembleModel};
pub use mlp::{MlpEnsembleModel, MlpShape};

/// A differentiable scalar reward over a flat parameter vector.
///
/// Implementors describe an architecture (and any frozen components); the
/// trainable parameters are passed in separately.
pub trait Head: Sync {
    fn dim(&self) -> usize;
    fn num_params(&self) -> usize;
    fn reward(&self, params: &[f64], z: &[f64]) -> f64;
    /// Adds `coeff · ∂r/∂θ` evaluated at `z` into `grad`.
    fn accumulate_grad(&self, params: &[f64], z: &[f64], coeff: f64, grad: &mut [f64]);
}

/// Point reward with a symmetric interval `reward ± beta·uncertainty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardEstimate {
    pub reward: f64,
    pub uncertainty: f64,
    pub lower: f64,
    pub upper: f64,
    pub beta: f64,
}

impl RewardEstimate {
    pub fn new(reward: f64, uncertainty: f64, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        if !(uncertainty.is_finite() && uncertainty >= 0.0) || !reward.is_finite() {
            return Err(Error::NonFinite("reward estimate".into()));
        }
        Ok(RewardEstimate {
            reward,
            uncertainty,
            lower: reward - beta * uncertainty,
            upper: reward + beta * uncertainty,
            beta,
        })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Mean and sample standard deviation (K − 1 denominator) of member rewards.
///
/// Deviations are taken from the first member before averaging, so K equal
/// rewards give exactly that reward and exactly zero spread.
pub fn ensemble_aggregate(member_rewards: &[f64]) -> Result<(f64, f64)> {
    let k = member_rewards.len();
    if k < 2 {
        return Err(Error::InvalidInput(format!("ensemble needs at least 2 members, got {k}")));
    }
    let pivot = member_rewards[0];
    let shift = member_rewards.iter().map(|r| r - pivot).sum::<f64>() / k as f64;
    let mean = pivot + shift;
    let ss: f64 = member_rewards.iter().map(|r| (r - pivot - shift).powi(2)).sum();
    Ok((mean, (ss / (k - 1) as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "ens-mlp")]
    EnsMlp,
    #[serde(rename = "ens-lora")]
    EnsLora,
    #[serde(rename = "mcd")]
    McDropout,
    #[serde(rename = "bay-lin")]
    BayLin,
}

impl Architecture {
    pub fn tag(self) -> &'static str {
        match self {
            Architecture::EnsMlp => "ens-mlp",
            Architecture::EnsLora => "ens-lora",
            Architecture::McDropout => "mcd",
            Architecture::BayLin => "bay-lin",
        }
    }

    /// Interval half-width multiplier used when none is requested: 2 for the
    /// ensembles and MC dropout, 0.5 for the Bayesian linear head.
    pub fn default_beta(self) -> f64 {
        match self {
            Architecture::BayLin => 0.5,
            _ => 2.0,
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ens-mlp" => Ok(Architecture::EnsMlp),
            "ens-lora" => Ok(Architecture::EnsLora),
            "mcd" | "mc-dropout" => Ok(Architecture::McDropout),
            "bay-lin" => Ok(Architecture::BayLin),
            other => Err(Error::InvalidInput(format!("unknown architecture {other:?}"))),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Per-architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch")]
pub enum HeadConfig {
    #[serde(rename = "ens-mlp")]
    EnsMlp { members: usize, hidden: usize },
    #[serde(rename = "ens-lora")]
    EnsLora { members: usize, rank: usize, alpha_lora: f64 },
    #[serde(rename = "mcd")]
    McDropout { hidden: usize, dropout: f64, masks: usize },
    #[serde(rename = "bay-lin")]
    BayLin { prior_precision: f64, weighted_hessian: bool },
}

impl HeadConfig {
    /// Reference sizes: 20 MLP heads of width 128; 8 adapters of rank 16 with
    /// scaling 32; 20 dropout masks; unweighted Laplace Hessian.
    pub fn default_for(arch: Architecture) -> Self {
        match arch {
            Architecture::EnsMlp => HeadConfig::EnsMlp { members: 20, hidden: 128 },
            Architecture::EnsLora => HeadConfig::EnsLora {
                members: 8,
                rank: 16,
                alpha_lora: 32.0,
            },
            Architecture::McDropout => HeadConfig::McDropout {
                hidden: 128,
                dropout: 0.1,
                masks: 20,
            },
            Architecture::BayLin => HeadConfig::BayLin {
                prior_precision: 0.01,
                weighted_hessian: false,
            },
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            HeadConfig::EnsMlp { .. } => Architecture::EnsMlp,
            HeadConfig::EnsLora { .. } => Architecture::EnsLora,
            HeadConfig::McDropout { .. } => Architecture::McDropout,
            HeadConfig::BayLin { .. } => Architecture::BayLin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match *self {
            HeadConfig::EnsMlp { members, hidden } => {
                if members < 2 {
                    return bad(format!("ensemble needs K >= 2, got {members}"));
                }
                if hidden == 0 {
                    return bad("hidden width must be positive".into());
                }
            }
            HeadConfig::EnsLora { members, rank, alpha_lora } => {
                if members < 2 {
                    return bad(format!("ensemble needs K >= 2, got {members}"));
                }
                if rank == 0 {
                    return bad("adapter rank must be positive".into());
                }
                if !(alpha_lora.is_finite() && alpha_lora > 0.0) {
                    return bad(format!("adapter scaling must be positive, got {alpha_lora}"));
                }
            }
            HeadConfig::McDropout { hidden, dropout, masks } => {
                if hidden == 0 {
                    return bad("hidden width must be positive".into());
                }
                if !(dropout > 0.0 && dropout < 1.0) {
                    return bad(format!("dropout rate must lie in (0, 1), got {dropout}"));
                }
                if masks < 2 {
                    return bad(format!("need at least 2 dropout masks, got {masks}"));
                }
            }
            HeadConfig::BayLin { prior_precision, .. } => {
                if !(prior_precision.is_finite() && prior_precision > 0.0) {
                    return bad(format!("prior precision must be positive, got {prior_precision}"));
                }
            }
        }
        Ok(())
    }
}

/// Any of the four reward heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", content = "state")]
pub enum HeadModel {
    #[serde(rename = "ens-mlp")]
    EnsMlp(MlpEnsembleModel),
    #[serde(rename = "ens-lora")]
    EnsLora(LowRankEnsembleModel),
    #[serde(rename = "mcd")]
    McDropout(McDropoutModel),
    #[serde(rename = "bay-lin")]
    BayLin(BayesLinearModel),
}

/// Deterministic initialisation. Ensemble member k is seeded from
/// `derive_seed(seed, k)`; the initial parameters are kept as anchors.
pub fn model_init(config: &HeadConfig, dim: usize, seed: u64) -> Result<HeadModel> {
    config.validate()?;
    if dim == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
    }
    Ok(match *config {
        HeadConfig::EnsMlp { members, hidden } => {
            let shape = MlpShape::new(dim, hidden);
            let params: Vec<Vec<f64>> = (0..members)
                .map(|k| shape.init(derive_seed(seed, k as u64)))
                .collect();
            HeadModel::EnsMlp(MlpEnsembleModel {
                shape,
                init_params: params.clone(),
                members: params,
            })
        }
        HeadConfig::EnsLora { members, rank, alpha_lora } => {
            let shape = LoraShape::with_random_backbone(dim, rank, alpha_lora, derive_seed(seed, u64::MAX));
            let params: Vec<Vec<f64>> = (0..members)
                .map(|k| shape.init(derive_seed(seed, k as u64)))
                .collect();
            HeadModel::EnsLora(LowRankEnsembleModel {
                shape,
                init_params: params.clone(),
                members: params,
            })
        }
        HeadConfig::McDropout { hidden, dropout, masks } => {
            let shape = MlpShape::new(dim, hidden);
            HeadModel::McDropout(McDropoutModel {
                shape,
                params: shape.init(derive_seed(seed, 0)),
                dropout,
                masks,
                mask_seed: derive_seed(seed, 1),
            })
        }
        HeadConfig::BayLin { prior_precision, weighted_hessian } => HeadModel::BayLin(BayesLinearModel::new(
            LaplacePosterior::prior(dim, prior_precision, weighted_hessian)?,
        )?),
    })
}

impl HeadModel {
    pub fn architecture(&self) -> Architecture {
        match self {
            HeadModel::EnsMlp(_) => Architecture::EnsMlp,
            HeadModel::EnsLora(_) => Architecture::EnsLora,
            HeadModel::McDropout(_) => Architecture::McDropout,
            HeadModel::BayLin(_) => Architecture::BayLin,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            HeadModel::EnsMlp(m) => m.shape.dim,
            HeadModel::EnsLora(m) => m.shape.dim,
            HeadModel::McDropout(m) => m.shape.dim,
            HeadModel::BayLin(m) => m.posterior().dim(),
        }
    }

    /// Reward and uncertainty before β-scaling.
    pub fn reward_and_uncertainty(&self, z: &[f64]) -> Result<(f64, f64)> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: z.len(),
                line: None,
            });
        }
        match self {
            HeadModel::EnsMlp(m) => ensemble_aggregate(&m.member_rewards(z)),
            HeadModel::EnsLora(m) => ensemble_aggregate(&m.member_rewards(z)),
            HeadModel::McDropout(m) => ensemble_aggregate(&mc_dropout_forward(m, z)),
            HeadModel::BayLin(m) => Ok((m.reward(z), m.uncertainty(z))),
        }
    }

    /// Reward estimate with interval `r ± β·u`; `beta = None` picks the
    /// architecture default.
    pub fn predict(&self, z: &[f64], beta: Option<f64>) -> Result<RewardEstimate> {
        let (r, u) = self.reward_and_uncertainty(z)?;
        RewardEstimate::new(r, u, beta.unwrap_or(self.architecture().default_beta()))
    }

    /// Predictions for many embeddings, in input order.
    pub fn predict_batch(&self, zs: &[&[f64]], beta: Option<f64>, exec: Exec) -> Result<Vec<RewardEstimate>> {
        exec.map(zs, |z| self.predict(z, beta)).into_iter().collect()
    }
}

/// Reward and β-scaled interval for one embedding.
pub fn predict(model: &HeadModel, z: &[f64], beta: Option<f64>) -> Result<RewardEstimate> {
    model.predict(z, beta)
}
