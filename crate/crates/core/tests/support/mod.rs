//! Shared helpers for the integration and acceptance tests: an independent
//! metric oracle, finite-difference gradient checks and fixture builders.

#![allow(dead_code)]

use rand::Rng as _;
use reward_uq::corpus::{generate_synthetic, NoiseModel, PreferenceDataset, PreferenceExample, SyntheticWorld};
use reward_uq::heads::{BayesLinearModel, HeadModel, RewardEstimate};
use reward_uq::numeric::sigmoid;
use reward_uq::optim::{loss_and_gradient, LossConfig};
use reward_uq::par::Exec;
use reward_uq::rng;

pub fn synthetic(dim: usize, n: usize, noise: NoiseModel, world_seed: u64, seed: u64) -> PreferenceDataset {
    let world = SyntheticWorld::random(dim, noise, world_seed, 1.0).unwrap();
    generate_synthetic(&world, n, seed).unwrap()
}

/// Random estimates with a shared β; ties in reward and in interval
/// endpoints are made likely so that edge cases are exercised.
pub fn random_scored(r: &mut rng::Rng, n: usize) -> Vec<(RewardEstimate, RewardEstimate)> {
    let beta = [0.5, 1.0, 2.0][r.random_range(0..3)];
    let grid = |r: &mut rng::Rng| r.random_range(-8i32..=8) as f64 * 0.25;
    (0..n)
        .map(|_| {
            let est = |r: &mut rng::Rng| {
                let reward = if r.random_bool(0.5) { grid(r) } else { r.random_range(-2.0..2.0) };
                let u = match r.random_range(0..4) {
                    0 => 0.0,
                    1 => r.random_range(0i32..4) as f64 * 0.125,
                    _ => r.random_range(0.0..1.5),
                };
                RewardEstimate::new(reward, u, beta).unwrap()
            };
            (est(r), est(r))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBin {
    pub count: u64,
    pub mean_pred: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub freq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveReport {
    pub counts: [u64; 4],
    pub win_rate: f64,
    pub rates: [f64; 4],
    pub rs: Option<f64>,
    pub ece: f64,
    pub elce: f64,
    pub euce: f64,
    pub bins: Vec<NaiveBin>,
    pub lower_bins: Vec<NaiveBin>,
    pub upper_bins: Vec<NaiveBin>,
}

/// Metric suite written straight from the definitions: per-example set
/// membership, then one scan over all items for every bin.
pub fn naive_report(pairs: &[(RewardEstimate, RewardEstimate)], alpha: f64, m: usize) -> NaiveReport {
    let mut counts = [0u64; 4]; // ct, ut, cf, uf
    for (c, r) in pairs {
        let is_true = c.reward > r.reward;
        let overlap = !(c.upper < r.lower || r.upper < c.lower);
        let slot = match (is_true, overlap) {
            (true, false) => 0,
            (true, true) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        counts[slot] += 1;
    }
    let n = pairs.len() as f64;
    let rates = counts.map(|c| c as f64 / n);
    let t = (counts[0] + counts[1]) as f64;
    let f = (counts[2] + counts[3]) as f64;
    let rs = if t + alpha * f == 0.0 || f + alpha * t == 0.0 {
        None
    } else {
        Some(counts[0] as f64 / (t + alpha * f) - counts[2] as f64 / (f + alpha * t))
    };

    // (p_hat, p_lower, p_upper, label): originals first, then their flips.
    let mut items = Vec::new();
    for (c, r) in pairs {
        let p = sigmoid(c.reward - r.reward);
        let lo = sigmoid(c.lower - r.upper);
        let up = sigmoid(c.upper - r.lower);
        items.push((p, lo, up, 1.0));
    }
    for k in 0..pairs.len() {
        let (p, lo, up, _) = items[k];
        items.push((1.0 - p, 1.0 - up, 1.0 - lo, 0.0));
    }
    let total = items.len();
    let table = |key: usize| -> Vec<NaiveBin> {
        (0..m)
            .map(|i| {
                let lo_edge = i as f64 / m as f64;
                let hi_edge = (i + 1) as f64 / m as f64;
                let inside = |v: f64| lo_edge <= v && (v < hi_edge || (i == m - 1 && v <= 1.0));
                let (mut cnt, mut sp, mut sl, mut su, mut pos) = (0u64, 0.0, 0.0, 0.0, 0.0);
                for it in &items {
                    let v = [it.0, it.1, it.2][key];
                    if inside(v) {
                        cnt += 1;
                        sp += it.0;
                        sl += it.1;
                        su += it.2;
                        pos += it.3;
                    }
                }
                let mean = |s: f64| if cnt == 0 { 0.0 } else { s / cnt as f64 };
                NaiveBin { count: cnt, mean_pred: mean(sp), mean_lower: mean(sl), mean_upper: mean(su), freq: mean(pos) }
            })
            .collect()
    };
    let bins = table(0);
    let lower_bins = table(1);
    let upper_bins = table(2);
    let weigh = |bs: &[NaiveBin], gap: &dyn Fn(&NaiveBin) -> f64| {
        let mut s = 0.0;
        for b in bs {
            if b.count > 0 {
                s += b.count as f64 / total as f64 * gap(b);
            }
        }
        s
    };
    NaiveReport {
        counts,
        win_rate: t / n,
        rates,
        rs,
        ece: weigh(&bins, &|b| (b.freq - b.mean_pred).abs()),
        elce: weigh(&lower_bins, &|b| (b.mean_lower - b.freq).max(0.0)),
        euce: weigh(&upper_bins, &|b| (b.freq - b.mean_upper).max(0.0)),
        bins,
        lower_bins,
        upper_bins,
    }
}

/// Copy of `model` with one trainable coordinate shifted by `delta`.
pub fn perturbed(model: &HeadModel, block: usize, i: usize, delta: f64) -> HeadModel {
    let mut m = model.clone();
    match &mut m {
        HeadModel::EnsMlp(e) => e.members[block][i] += delta,
        HeadModel::EnsLora(e) => e.members[block][i] += delta,
        HeadModel::McDropout(d) => d.params[i] += delta,
        HeadModel::BayLin(b) => {
            let mut p = b.posterior().clone();
            p.theta_map[i] += delta;
            *b = BayesLinearModel::new(p).unwrap();
        }
    }
    m
}

/// Adds uniform noise to every trainable parameter so that no gradient
/// vanishes by construction (e.g. a zero-initialised adapter factor).
pub fn jitter(model: &HeadModel, seed: u64, scale: f64) -> HeadModel {
    let mut r = rng::from_seed(seed);
    let mut m = model.clone();
    let mut shake = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x += r.random_range(-scale..scale));
    match &mut m {
        HeadModel::EnsMlp(e) => e.members.iter_mut().for_each(&mut shake),
        HeadModel::EnsLora(e) => e.members.iter_mut().for_each(&mut shake),
        HeadModel::McDropout(d) => shake(&mut d.params),
        HeadModel::BayLin(b) => {
            let mut p = b.posterior().clone();
            shake(&mut p.theta_map);
            *b = BayesLinearModel::new(p).unwrap();
        }
    }
    m
}

/// Largest entrywise relative error |a − b| / max(|a|, |b|, floor) between
/// the analytic gradient and central differences with step `h`.
pub fn gradient_check(
    model: &HeadModel,
    batch: &[&PreferenceExample],
    cfg: &LossConfig,
    step: u64,
    h: f64,
    floor: f64,
) -> f64 {
    let (_, grads) = loss_and_gradient(model, batch, cfg, step, Exec::Sequential).unwrap();
    let mut worst: f64 = 0.0;
    for (b, g) in grads.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let lp = loss_and_gradient(&perturbed(model, b, i, h), batch, cfg, step, Exec::Sequential).unwrap().0;
            let lm = loss_and_gradient(&perturbed(model, b, i, -h), batch, cfg, step, Exec::Sequential).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(floor));
        }
    }
    worst
}
