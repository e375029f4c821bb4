use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Head, MlpShape};
use crate::rng;

/// One MLP head whose uncertainty comes from K dropout masks applied to the
/// input embedding. Masks are Bernoulli(1 − p) per coordinate with inverted
/// scaling 1/(1 − p); the inference set is fixed by `mask_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McDropoutModel {
    pub shape: MlpShape,
    pub params: Vec<f64>,
    pub dropout: f64,
    pub masks: usize,
    pub mask_seed: u64,
}

/// Applies a freshly drawn inverted-dropout mask to `z`.
pub(crate) fn apply_mask(z: &[f64], dropout: f64, r: &mut rng::Rng) -> Vec<f64> {
    let keep = 1.0 - dropout;
    z.iter()
        .map(|&v| if r.random::<f64>() < keep { v / keep } else { 0.0 })
        .collect()
}

impl McDropoutModel {
    /// The k-th inference mask applied to `z`.
    pub fn masked_input(&self, z: &[f64], k: usize) -> Vec<f64> {
        let mut r = rng::stream(self.mask_seed, k as u64);
        apply_mask(z, self.dropout, &mut r)
    }

    /// Input used during training for example `slot` of optimisation step
    /// `step`: a fresh mask per sample, shared by both sides of the pair.
    pub fn training_mask_rng(&self, step: u64, slot: usize) -> rng::Rng {
        rng::stream(rng::derive_seed(self.mask_seed ^ 0x7261_696e, step), slot as u64)
    }

    /// Head applied without dropout.
    pub fn deterministic_reward(&self, z: &[f64]) -> f64 {
        self.shape.reward(&self.params, z)
    }
}

/// Rewards of the K masked forward passes for one embedding.
pub fn mc_dropout_forward(model: &McDropoutModel, z: &[f64]) -> Vec<f64> {
    (0..model.masks)
        .map(|k| model.shape.reward(&model.params, &model.masked_input(z, k)))
        .collect()
}
