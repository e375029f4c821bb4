use serde::{Deserialize, Serialize};

use crate::corpus::PreferenceExample;
use crate::error::{Error, Result};
use crate::heads::{apply_mask, neg_log_posterior, neg_log_posterior_grad, Head, HeadModel};
use crate::numeric::{sigmoid, softplus};
use crate::par::Exec;

/// Divisor used in the anchor term (λ/d)‖θ − θ_init‖².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorNorm {
    /// Parameter count of one ensemble member.
    #[default]
    MemberParams,
    /// Embedding dimension.
    EmbeddingDim,
}

/// Regularisation strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Pull of each ensemble member toward its initialisation.
    pub lambda_anchor: f64,
    /// Penalty on (r⁺ + r⁻)², removing the additive-constant freedom.
    pub gamma_center: f64,
    /// Prior precision of the Bayesian linear head.
    pub lambda_l2: f64,
    pub anchor_norm: AnchorNorm,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_anchor: 0.1,
            gamma_center: 0.01,
            lambda_l2: 0.01,
            anchor_norm: AnchorNorm::MemberParams,
        }
    }
}

impl LossConfig {
    pub fn unregularized() -> Self {
        LossConfig {
            lambda_anchor: 0.0,
            gamma_center: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_anchor", self.lambda_anchor),
            ("gamma_center", self.gamma_center),
            ("lambda_l2", self.lambda_l2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Mean of −log σ(r⁺ − r⁻), evaluated as softplus(r⁻ − r⁺).
pub fn bce_preference_loss(rewards_chosen: &[f64], rewards_rejected: &[f64]) -> Result<f64> {
    if rewards_chosen.len() != rewards_rejected.len() {
        return Err(Error::InvalidInput(format!(
            "{} chosen rewards vs {} rejected rewards",
            rewards_chosen.len(),
            rewards_rejected.len()
        )));
    }
    if rewards_chosen.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let n = rewards_chosen.len() as f64;
    Ok(rewards_chosen
        .iter()
        .zip(rewards_rejected)
        .map(|(c, r)| softplus(r - c))
        .sum::<f64>()
        / n)
}

/// Fixed chunk size for gradient accumulation. Partial sums are combined in
/// chunk order, so the result does not depend on the execution mode.
const CHUNK: usize = 16;

/// Loss and gradient of one member:
/// `(1/n)Σ softplus(−m) + (λ/P)‖θ − θ₀‖² + (γ/n)Σ (r⁺ + r⁻)²`.
///
/// `anchor` carries θ₀ and the divisor P; pass `None` to drop the term.
pub fn member_objective<H: Head>(
    head: &H,
    params: &[f64],
    anchor: Option<(&[f64], f64)>,
    pairs: &[(&[f64], &[f64])],
    config: &LossConfig,
    exec: Exec,
) -> (f64, Vec<f64>) {
    let n = pairs.len() as f64;
    let gamma = config.gamma_center;
    let chunks: Vec<&[(&[f64], &[f64])]> = pairs.chunks(CHUNK).collect();
    let partials = exec.map(&chunks, |chunk| {
        let mut grad = vec![0.0; params.len()];
        let mut bce = 0.0;
        let mut center = 0.0;
        for (zc, zr) in chunk.iter() {
            let rc = head.reward(params, zc);
            let rr = head.reward(params, zr);
            let margin = rc - rr;
            let sum = rc + rr;
            bce += softplus(-margin);
            center += sum * sum;
            let s = sigmoid(-margin);
            head.accumulate_grad(params, zc, (-s + 2.0 * gamma * sum) / n, &mut grad);
            head.accumulate_grad(params, zr, (s + 2.0 * gamma * sum) / n, &mut grad);
        }
        (bce, center, grad)
    });

    let mut grad = vec![0.0; params.len()];
    let (mut bce, mut center) = (0.0, 0.0);
    for (b, c, g) in partials {
        bce += b;
        center += c;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    let mut loss = bce / n;
    if gamma > 0.0 {
        loss += gamma * center / n;
    }
    if let Some((init, divisor)) = anchor {
        if config.lambda_anchor > 0.0 {
            let c = config.lambda_anchor / divisor;
            let mut sq = 0.0;
            for ((g, p), p0) in grad.iter_mut().zip(params).zip(init) {
                let delta = p - p0;
                sq += delta * delta;
                *g += 2.0 * c * delta;
            }
            loss += c * sq;
        }
    }
    (loss, grad)
}

fn raw_pairs<'a>(batch: &[&'a PreferenceExample]) -> Vec<(&'a [f64], &'a [f64])> {
    batch
        .iter()
        .map(|e| (e.chosen.as_slice(), e.rejected.as_slice()))
        .collect()
}

fn anchor_divisor(norm: AnchorNorm, num_params: usize, dim: usize) -> f64 {
    match norm {
        AnchorNorm::MemberParams => num_params as f64,
        AnchorNorm::EmbeddingDim => dim as f64,
    }
}

fn check_batch(model: &HeadModel, batch: &[&PreferenceExample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    for e in batch {
        if e.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: e.dim(),
                line: None,
            });
        }
    }
    Ok(())
}

/// Training loss of `model` on `batch` and its gradient, one vector per
/// trainable block (see [`crate::optim::trainable_blocks`]).
///
/// Ensembles average member objectives, so each member gradient carries a
/// 1/K factor. The MC-dropout head draws one mask per pair from `step`. The
/// Bayesian linear head uses its negative log-posterior
/// `Σ softplus(−θᵀΔz) + (λ_l2/2)‖θ‖²`. Frozen components receive no gradient.
pub fn loss_and_gradient(
    model: &HeadModel,
    batch: &[&PreferenceExample],
    config: &LossConfig,
    step: u64,
    exec: Exec,
) -> Result<(f64, Vec<Vec<f64>>)> {
    config.validate()?;
    check_batch(model, batch)?;
    match model {
        HeadModel::EnsMlp(m) => {
            let pairs = raw_pairs(batch);
            let div = anchor_divisor(config.anchor_norm, m.shape.num_params(), m.shape.dim);
            Ok(ensemble_objective(&m.shape, &m.members, &m.init_params, div, &pairs, config, exec))
        }
        HeadModel::EnsLora(m) => {
            let pairs = raw_pairs(batch);
            let div = anchor_divisor(config.anchor_norm, m.shape.num_params(), m.shape.dim);
            Ok(ensemble_objective(&m.shape, &m.members, &m.init_params, div, &pairs, config, exec))
        }
        HeadModel::McDropout(m) => {
            let masked: Vec<(Vec<f64>, Vec<f64>)> = batch
                .iter()
                .enumerate()
                .map(|(slot, e)| {
                    let mut r = m.training_mask_rng(step, slot);
                    let mask = apply_mask(&vec![1.0; m.shape.dim], m.dropout, &mut r);
                    let apply = |z: &[f64]| z.iter().zip(&mask).map(|(a, b)| a * b).collect::<Vec<f64>>();
                    (apply(e.chosen.as_slice()), apply(e.rejected.as_slice()))
                })
                .collect();
            let pairs: Vec<(&[f64], &[f64])> =
                masked.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
            let (loss, grad) = member_objective(&m.shape, &m.params, None, &pairs, config, exec);
            Ok((loss, vec![grad]))
        }
        HeadModel::BayLin(m) => {
            let diffs: Vec<Vec<f64>> = batch.iter().map(|e| e.difference()).collect();
            let theta = &m.posterior().theta_map;
            let lambda = config.lambda_l2;
            Ok((
                neg_log_posterior(theta, &diffs, lambda),
                vec![neg_log_posterior_grad(theta, &diffs, lambda)],
            ))
        }
    }
}

fn ensemble_objective<H: Head>(
    head: &H,
    members: &[Vec<f64>],
    init: &[Vec<f64>],
    divisor: f64,
    pairs: &[(&[f64], &[f64])],
    config: &LossConfig,
    exec: Exec,
) -> (f64, Vec<Vec<f64>>) {
    let k = members.len() as f64;
    let idx: Vec<usize> = (0..members.len()).collect();
    let per_member = exec.map(&idx, |&i| {
        member_objective(
            head,
            &members[i],
            Some((&init[i], divisor)),
            pairs,
            config,
            Exec::Sequential,
        )
    });
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(members.len());
    for (l, mut g) in per_member {
        loss += l;
        g.iter_mut().for_each(|v| *v /= k);
        grads.push(g);
    }
    (loss / k, grads)
}

/// The ensemble training objective value on `batch`.
pub fn ensemble_loss(model: &HeadModel, batch: &[&PreferenceExample], config: &LossConfig) -> Result<f64> {
    loss_and_gradient(model, batch, config, 0, Exec::default()).map(|(l, _)| l)
}
