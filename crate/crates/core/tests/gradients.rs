mod support;

use reward_uq::corpus::NoiseModel;
use reward_uq::heads::{model_init, HeadConfig};
use reward_uq::optim::{loss_and_gradient, LossConfig};
use reward_uq::par::Exec;

const D: usize = 8;

fn configs() -> Vec<HeadConfig> {
    vec![
        HeadConfig::EnsMlp { members: 3, hidden: 16 },
        HeadConfig::EnsLora { members: 3, rank: 2, alpha_lora: 4.0 },
        HeadConfig::McDropout { hidden: 16, dropout: 0.25, masks: 5 },
        HeadConfig::BayLin { prior_precision: 0.01, weighted_hessian: false },
    ]
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let ds = support::synthetic(D, 10, NoiseModel::Bernoulli, 1, 2);
    let batch: Vec<_> = ds.examples().iter().collect();
    let cfg = LossConfig { lambda_anchor: 0.3, gamma_center: 0.05, lambda_l2: 0.1, ..LossConfig::default() };
    for (k, head) in configs().into_iter().enumerate() {
        for seed in 0..3 {
            let model = support::jitter(&model_init(&head, D, seed).unwrap(), 100 + seed, 0.3);
            let err = support::gradient_check(&model, &batch, &cfg, 7, 1e-5, 1e-6);
            assert!(err <= 1e-4, "config {k} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn gradients_are_identical_across_execution_modes() {
    let ds = support::synthetic(D, 37, NoiseModel::Bernoulli, 3, 4);
    let batch: Vec<_> = ds.examples().iter().collect();
    for head in configs() {
        let model = model_init(&head, D, 9).unwrap();
        let a = loss_and_gradient(&model, &batch, &LossConfig::default(), 2, Exec::Parallel).unwrap();
        let b = loss_and_gradient(&model, &batch, &LossConfig::default(), 2, Exec::Sequential).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn frozen_backbone_has_no_gradient_slot() {
    let model = model_init(&HeadConfig::EnsLora { members: 2, rank: 3, alpha_lora: 6.0 }, D, 0).unwrap();
    let blocks = reward_uq::optim::trainable_blocks(&model);
    assert_eq!(blocks.len(), 2);
    if let reward_uq::heads::HeadModel::EnsLora(m) = &model {
        assert_eq!(blocks[0].len(), reward_uq::heads::Head::num_params(&m.shape));
        assert!(blocks[0].len() < D * D);
    }
}
