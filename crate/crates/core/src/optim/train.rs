use rand::seq::SliceRandom;
use rand::Rng as _;

use super::adam::{Adam, AdamConfig};
use super::loss::{loss_and_gradient, member_objective, AnchorNorm, LossConfig};
use super::newton::NewtonConfig;
use super::schedule::TrainSchedule;
use crate::corpus::{PreferenceDataset, PreferenceExample};
use crate::error::{Error, Result};
use crate::heads::{laplace_fit, BayesLinearModel, Head, HeadModel};
use crate::par::Exec;
use crate::rng;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: HeadModel,
    /// Training objective per optimisation step (per Newton iteration for
    /// the Bayesian linear head).
    pub loss_trace: Vec<f64>,
    /// Learning rate used at each step; empty for the Bayesian linear head.
    pub lr_trace: Vec<f64>,
}

/// Trainable parameter blocks: one per ensemble member, otherwise a single
/// block. Frozen parts (backbone, init snapshots) are excluded.
pub fn trainable_blocks(model: &HeadModel) -> Vec<&[f64]> {
    match model {
        HeadModel::EnsMlp(m) => m.members.iter().map(Vec::as_slice).collect(),
        HeadModel::EnsLora(m) => m.members.iter().map(Vec::as_slice).collect(),
        HeadModel::McDropout(m) => vec![m.params.as_slice()],
        HeadModel::BayLin(m) => vec![m.posterior().theta_map.as_slice()],
    }
}

/// Trains with the default execution mode.
pub fn train(
    model: &HeadModel,
    dataset: &PreferenceDataset,
    schedule: &TrainSchedule,
    config: &LossConfig,
) -> Result<TrainOutcome> {
    train_with(model, dataset, schedule, config, Exec::default())
}

/// Mini-batch Adam with the warmup/cosine schedule, or a Newton MAP fit plus
/// Laplace Hessian for the Bayesian linear head.
///
/// Ensemble members see the same shuffled batches (unless `bootstrap` is
/// set) and are optimised independently, in parallel under
/// [`Exec::Parallel`]. Results are identical for every execution mode.
pub fn train_with(
    model: &HeadModel,
    dataset: &PreferenceDataset,
    schedule: &TrainSchedule,
    config: &LossConfig,
    exec: Exec,
) -> Result<TrainOutcome> {
    schedule.validate()?;
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("cannot train on an empty dataset".into()));
    }
    if dataset.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: dataset.dim(),
            line: None,
        });
    }
    let examples = dataset.examples();
    let lr = schedule.lr_schedule(examples.len());
    let lr_trace: Vec<f64> = (0..lr.total_steps).map(|t| lr.lr(t)).collect();
    let adam = AdamConfig {
        beta1: schedule.adam_betas.0,
        beta2: schedule.adam_betas.1,
        eps: schedule.adam_eps,
        weight_decay: schedule.weight_decay,
    };

    let mut trained = model.clone();
    let loss_trace = match &mut trained {
        HeadModel::EnsMlp(m) => {
            let div = anchor_divisor(config.anchor_norm, m.shape.num_params(), m.shape.dim);
            train_members(&m.shape, &mut m.members, &m.init_params, div, examples, schedule, config, &lr_trace, adam, exec)?
        }
        HeadModel::EnsLora(m) => {
            let div = anchor_divisor(config.anchor_norm, m.shape.num_params(), m.shape.dim);
            train_members(&m.shape, &mut m.members, &m.init_params, div, examples, schedule, config, &lr_trace, adam, exec)?
        }
        HeadModel::McDropout(_) => {
            let mut opt = Adam::new(trainable_blocks(&trained)[0].len(), adam);
            let mut trace = Vec::with_capacity(lr_trace.len());
            let mut step = 0usize;
            for epoch in 0..schedule.epochs {
                let order = epoch_order(examples.len(), schedule.seed, epoch, None, false);
                for chunk in order.chunks(schedule.batch_size) {
                    let batch: Vec<&PreferenceExample> = chunk.iter().map(|&i| &examples[i]).collect();
                    let (loss, grads) = loss_and_gradient(&trained, &batch, config, step as u64, exec)?;
                    if !loss.is_finite() {
                        return Err(Error::Diverged { step, loss });
                    }
                    if let HeadModel::McDropout(m) = &mut trained {
                        opt.step(&mut m.params, &grads[0], lr_trace[step]);
                    }
                    trace.push(loss);
                    step += 1;
                }
            }
            trace
        }
        HeadModel::BayLin(m) => {
            let weighted = m.posterior().weighted;
            let newton = NewtonConfig::default();
            let posterior = laplace_fit(dataset, config.lambda_l2, weighted, &newton)?;
            let diffs: Vec<Vec<f64>> = examples.iter().map(|e| e.difference()).collect();
            let final_loss = crate::heads::neg_log_posterior(&posterior.theta_map, &diffs, config.lambda_l2);
            *m = BayesLinearModel::new(posterior)?;
            return Ok(TrainOutcome {
                model: trained,
                loss_trace: vec![final_loss],
                lr_trace: Vec::new(),
            });
        }
    };
    Ok(TrainOutcome {
        model: trained,
        loss_trace,
        lr_trace,
    })
}

fn anchor_divisor(norm: AnchorNorm, num_params: usize, dim: usize) -> f64 {
    match norm {
        AnchorNorm::MemberParams => num_params as f64,
        AnchorNorm::EmbeddingDim => dim as f64,
    }
}

/// Visiting order for one epoch: a seeded permutation, or for bootstrap a
/// member-specific resample with replacement.
fn epoch_order(n: usize, seed: u64, epoch: usize, member: Option<usize>, bootstrap: bool) -> Vec<usize> {
    if bootstrap {
        let member_seed = rng::derive_seed(seed, member.unwrap_or(0) as u64 + 1);
        let mut r = rng::stream(member_seed, epoch as u64);
        return (0..n).map(|_| r.random_range(0..n)).collect();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, epoch as u64));
    order
}

#[allow(clippy::too_many_arguments)]
fn train_members<H: Head>(
    head: &H,
    members: &mut [Vec<f64>],
    init: &[Vec<f64>],
    divisor: f64,
    examples: &[PreferenceExample],
    schedule: &TrainSchedule,
    config: &LossConfig,
    lr_trace: &[f64],
    adam: AdamConfig,
    exec: Exec,
) -> Result<Vec<f64>> {
    let k = members.len() as f64;
    let traces = exec.map_mut(members, |idx, params| -> std::result::Result<Vec<f64>, (usize, f64)> {
        let mut opt = Adam::new(params.len(), adam);
        let mut trace = Vec::with_capacity(lr_trace.len());
        let mut step = 0usize;
        for epoch in 0..schedule.epochs {
            let order = epoch_order(examples.len(), schedule.seed, epoch, Some(idx), schedule.bootstrap);
            for chunk in order.chunks(schedule.batch_size) {
                let pairs: Vec<(&[f64], &[f64])> = chunk
                    .iter()
                    .map(|&i| (examples[i].chosen.as_slice(), examples[i].rejected.as_slice()))
                    .collect();
                let (loss, mut grad) =
                    member_objective(head, params, Some((&init[idx], divisor)), &pairs, config, Exec::Sequential);
                if !loss.is_finite() {
                    return Err((step, loss));
                }
                grad.iter_mut().for_each(|g| *g /= k);
                opt.step(params, &grad, lr_trace[step]);
                trace.push(loss);
                step += 1;
            }
        }
        Ok(trace)
    });

    let mut first_failure: Option<(usize, f64)> = None;
    let mut ok = Vec::with_capacity(traces.len());
    for t in traces {
        match t {
            Ok(tr) => ok.push(tr),
            Err((step, loss)) => {
                if first_failure.is_none_or(|(s, _)| step < s) {
                    first_failure = Some((step, loss));
                }
            }
        }
    }
    if let Some((step, loss)) = first_failure {
        return Err(Error::Diverged { step, loss });
    }
    let steps = lr_trace.len();
    Ok((0..steps)
        .map(|t| ok.iter().map(|tr| tr[t]).sum::<f64>() / k)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, NoiseModel, SyntheticWorld};
    use crate::heads::{model_init, HeadConfig};

    fn separable(n: usize) -> PreferenceDataset {
        let world = SyntheticWorld::random(4, NoiseModel::Deterministic, 1, 1.0).unwrap();
        generate_synthetic(&world, n, 2).unwrap()
    }

    fn win_rate(model: &HeadModel, ds: &PreferenceDataset) -> f64 {
        let wins = ds
            .examples()
            .iter()
            .filter(|e| {
                model.predict(e.chosen.as_slice(), None).unwrap().reward
                    > model.predict(e.rejected.as_slice(), None).unwrap().reward
            })
            .count();
        wins as f64 / ds.len() as f64
    }

    #[test]
    fn separable_data_is_learned() {
        let ds = separable(400);
        let model = model_init(&HeadConfig::EnsMlp { members: 2, hidden: 16 }, 4, 3).unwrap();
        let schedule = TrainSchedule {
            base_lr: 1e-2,
            epochs: 5,
            batch_size: 32,
            seed: 4,
            ..TrainSchedule::default()
        };
        let out = train(&model, &ds, &schedule, &LossConfig::unregularized()).unwrap();
        assert_eq!(out.loss_trace.len(), 5 * 13);
        assert!(win_rate(&out.model, &ds) >= 0.95);
        assert!(out.loss_trace.last().unwrap() < &out.loss_trace[0]);
    }

    #[test]
    fn training_is_deterministic_across_modes() {
        let ds = separable(100);
        for cfg in [
            HeadConfig::EnsMlp { members: 3, hidden: 6 },
            HeadConfig::EnsLora { members: 2, rank: 2, alpha_lora: 4.0 },
            HeadConfig::McDropout { hidden: 6, dropout: 0.2, masks: 4 },
        ] {
            let model = model_init(&cfg, 4, 5).unwrap();
            let s = TrainSchedule { base_lr: 5e-3, batch_size: 16, epochs: 2, seed: 9, ..TrainSchedule::default() };
            let a = train_with(&model, &ds, &s, &LossConfig::default(), Exec::Parallel).unwrap();
            let b = train_with(&model, &ds, &s, &LossConfig::default(), Exec::Sequential).unwrap();
            assert_eq!(a.model, b.model);
            assert_eq!(a.loss_trace, b.loss_trace);
            assert_ne!(a.model, model);
        }
    }

    #[test]
    fn lr_trace_follows_schedule() {
        let ds = separable(640);
        let model = model_init(&HeadConfig::EnsMlp { members: 2, hidden: 4 }, 4, 0).unwrap();
        let s = TrainSchedule { base_lr: 0.01, batch_size: 16, ..TrainSchedule::default() };
        let out = train(&model, &ds, &s, &LossConfig::default()).unwrap();
        assert_eq!(out.lr_trace.len(), 40);
        assert_eq!(out.lr_trace[0], 0.0);
        assert_eq!(out.lr_trace[2], 0.01);
        assert!(*out.lr_trace.last().unwrap() < 1e-4);
    }

    #[test]
    fn divergence_is_reported() {
        let ds = separable(64);
        let model = model_init(&HeadConfig::EnsMlp { members: 2, hidden: 4 }, 4, 0).unwrap();
        let s = TrainSchedule { base_lr: 1e300, warmup_fraction: 0.0, batch_size: 8, epochs: 3, ..TrainSchedule::default() };
        match train(&model, &ds, &s, &LossConfig::default()) {
            Err(Error::Diverged { step, .. }) => assert!(step < 24),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn bootstrap_changes_member_data() {
        let ds = separable(64);
        let model = model_init(&HeadConfig::EnsMlp { members: 2, hidden: 4 }, 4, 0).unwrap();
        let base = TrainSchedule { base_lr: 0.01, batch_size: 8, ..TrainSchedule::default() };
        let boot = TrainSchedule { bootstrap: true, ..base.clone() };
        let a = train(&model, &ds, &base, &LossConfig::default()).unwrap();
        let b = train(&model, &ds, &boot, &LossConfig::default()).unwrap();
        assert_ne!(a.model, b.model);
        assert_ne!(epoch_order(10, 1, 0, Some(0), true), epoch_order(10, 1, 0, Some(1), true));
    }

    #[test]
    fn bayes_linear_training_fits_map() {
        let ds = separable(200);
        let model = model_init(&HeadConfig::default_for(crate::heads::Architecture::BayLin), 4, 0).unwrap();
        let out = train(&model, &ds, &TrainSchedule::default(), &LossConfig::default()).unwrap();
        assert!(win_rate(&out.model, &ds) >= 0.95);
        assert!(out.lr_trace.is_empty());
    }
}
