//! Built-in invariant suite run by the `selfcheck` command.
//!
//! Every check is seeded, so the structured output is byte-identical across
//! runs and execution modes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{generate_synthetic, symmetrize, NoiseModel, SyntheticWorld};
use crate::error::{Error, Result};
use crate::heads::{
    laplace_fit, laplace_update, model_init, HeadConfig, HeadModel, LaplacePosterior, MlpEnsembleModel, MlpShape,
    RewardEstimate,
};
use crate::metrics::{
    bound_calibration, preference_bounds, ranking_score, ranking_score_from_rates, ranking_weight,
    unified_ranking_score, LabeledPredictions, UqConfusion,
};
use crate::optim::{member_objective, train_with, LossConfig, NewtonConfig, TrainSchedule};
use crate::par::Exec;
use crate::rng;

pub const SELFCHECK_SCHEMA: &str = "reward-uq/selfcheck/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfcheckReport {
    pub schema: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl SelfcheckReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::json("selfcheck report", e))
    }
}

fn max_error_check(name: &str, err: f64, tol: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: err <= tol,
        detail: format!("max error {err:e} (tolerance {tol:e})"),
    }
}

fn from_result(name: &str, r: Result<CheckResult>) -> CheckResult {
    r.unwrap_or_else(|e| CheckResult {
        name: name.to_string(),
        passed: false,
        detail: format!("error: {e}"),
    })
}

/// Runs every built-in check with the given execution mode.
pub fn run_selfcheck(exec: Exec) -> SelfcheckReport {
    let checks = vec![
        from_result("ranking_score_fixtures", rs_fixtures()),
        from_result("ranking_score_invariances", rs_invariances(200)),
        from_result("ranking_weight_fixtures", weight_fixtures()),
        from_result("unified_ranking_form", unified_form(200)),
        from_result("bound_symmetry", bound_symmetry(100)),
        from_result("ensemble_degeneracy", ensemble_degeneracy(100)),
        from_result("reward_shift", reward_shift()),
        from_result("incremental_hessian", incremental_hessian(20)),
        from_result("training_determinism", training_determinism(exec)),
    ];
    SelfcheckReport {
        schema: SELFCHECK_SCHEMA.to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn rs_fixtures() -> Result<CheckResult> {
    type Case = ((u64, u64, u64, u64), f64, f64);
    let cases: [Case; 6] = [
        ((40, 60, 2, 8), 0.0, 0.2),
        ((40, 60, 2, 8), 1.0, 38.0 / 110.0),
        ((42, 63, 1, 4), 0.0, 0.2),
        ((70, 30, 5, 5), 0.0, 0.2),
        ((40, 8, 2, 60), 1.0, 38.0 / 110.0),
        ((48, 52, 10, 0), 1.0, 38.0 / 110.0),
    ];
    let mut err: f64 = 0.0;
    for ((ct, ut, cf, uf), a, want) in cases {
        err = err.max((ranking_score(&UqConfusion::from_counts(ct, ut, cf, uf), a)? - want).abs());
    }
    Ok(max_error_check("ranking_score_fixtures", err, 1e-12))
}

fn rs_invariances(trials: usize) -> Result<CheckResult> {
    let mut r = rng::stream(0x5253, 0);
    let mut err: f64 = 0.0;
    for _ in 0..trials {
        let v: [f64; 4] = std::array::from_fn(|_| r.random_range(1..200) as f64);
        let [ct, ut, cf, uf] = v;
        let (t, f) = (ct + ut, cf + uf);
        let rs = |a: [f64; 4], alpha| ranking_score_from_rates(a[0], a[1], a[2], a[3], alpha);
        let base0 = rs(v, 0.0)?;
        let base1 = rs(v, 1.0)?;
        // Rescale T and F while keeping the confident ratios.
        let d = r.random_range(-0.9..0.9) * t.min(f);
        let s = [ct * (1.0 + d / t), ut * (1.0 + d / t), cf * (1.0 - d / f), uf * (1.0 - d / f)];
        err = err.max((rs(s, 0.0)? - base0).abs());
        // Move confident mass in proportion to T and F.
        let d = r.random_range(0.0..1.0) * (ut / t).min(uf / f);
        let s = [ct + d * t, ut - d * t, cf + d * f, uf - d * f];
        err = err.max((rs(s, 0.0)? - base0).abs());
        // Exchange mass between UT and UF.
        let d = r.random_range(-1.0..1.0) * ut.min(uf);
        let s = [ct, ut + d, cf, uf - d];
        err = err.max((rs(s, 1.0)? - base1).abs());
        // Add the same confident mass on both sides.
        let d = r.random_range(0.0..1.0) * ut.min(uf);
        let s = [ct + d, ut - d, cf + d, uf - d];
        err = err.max((rs(s, 1.0)? - base1).abs());
    }
    Ok(max_error_check("ranking_score_invariances", err, 1e-10))
}

fn weight_fixtures() -> Result<CheckResult> {
    let mut err: f64 = 0.0;
    for (x, want) in [(0.6, 0.88), (0.8, 0.95), (0.4, 0.77), (0.2, 0.56)] {
        err = err.max((ranking_weight(x, 0.2)? - want).abs());
    }
    Ok(max_error_check("ranking_weight_fixtures", err, 0.005))
}

fn unified_form(trials: usize) -> Result<CheckResult> {
    let mut r = rng::stream(0x5546, 0);
    let mut err: f64 = 0.0;
    for _ in 0..trials {
        let c = UqConfusion::from_counts(
            r.random_range(0..100),
            r.random_range(1..100),
            r.random_range(0..100),
            r.random_range(1..100),
        );
        let alpha = r.random_range(0.0..=1.0);
        err = err.max((ranking_score(&c, alpha)? - unified_ranking_score(&c, alpha)?).abs());
    }
    Ok(max_error_check("unified_ranking_form", err, 1e-12))
}

fn random_estimate(r: &mut rng::Rng) -> Result<RewardEstimate> {
    RewardEstimate::new(r.random_range(-3.0..3.0), r.random_range(0.0..1.0), r.random_range(0.1..3.0))
}

fn bound_symmetry(trials: usize) -> Result<CheckResult> {
    let mut r = rng::stream(0x4253, 0);
    let mut err: f64 = 0.0;
    for _ in 0..trials {
        let n = r.random_range(1..60);
        let mut bounds = Vec::with_capacity(n);
        for _ in 0..n {
            let (a, b) = (random_estimate(&mut r)?, random_estimate(&mut r)?);
            let orig = preference_bounds(&a, &b);
            let flip = preference_bounds(&b, &a);
            err = err.max((flip.p_upper - (1.0 - orig.p_lower)).abs());
            err = err.max((flip.p_lower - (1.0 - orig.p_upper)).abs());
            bounds.push(orig);
        }
        let c = bound_calibration(&LabeledPredictions::from_originals(&bounds), 10)?;
        err = err.max((c.elce - c.euce).abs());
    }
    Ok(max_error_check("bound_symmetry", err, 1e-12))
}

fn ensemble_degeneracy(trials: usize) -> Result<CheckResult> {
    let shape = MlpShape::new(6, 8);
    let member = shape.init(11);
    let model = HeadModel::EnsMlp(MlpEnsembleModel {
        shape,
        members: vec![member.clone(); 4],
        init_params: vec![member; 4],
    });
    let mut r = rng::stream(0x4544, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let z: Vec<f64> = (0..6).map(|_| r.random_range(-4.0..4.0)).collect();
        worst = worst.max(model.reward_and_uncertainty(&z)?.1);
    }
    Ok(CheckResult {
        name: "ensemble_degeneracy".into(),
        passed: worst == 0.0,
        detail: format!("max uncertainty {worst:e}"),
    })
}

fn reward_shift() -> Result<CheckResult> {
    let shape = MlpShape::new(3, 5);
    let params = shape.init(4);
    let mut shifted = params.clone();
    let c = 0.75;
    shifted[shape.output_bias_index()] += c;
    let mut r = rng::stream(0x5348, 0);
    let zs: Vec<Vec<f64>> = (0..16).map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let pairs: Vec<(&[f64], &[f64])> = zs.chunks(2).map(|p| (p[0].as_slice(), p[1].as_slice())).collect();
    let bce_only = LossConfig { gamma_center: 0.0, ..LossConfig::unregularized() };
    let (l0, _) = member_objective(&shape, &params, None, &pairs, &bce_only, Exec::Sequential);
    let (l1, _) = member_objective(&shape, &shifted, None, &pairs, &bce_only, Exec::Sequential);
    let gamma = 0.3;
    let centered = LossConfig { gamma_center: gamma, ..bce_only };
    let (c0, _) = member_objective(&shape, &params, None, &pairs, &centered, Exec::Sequential);
    let (c1, _) = member_objective(&shape, &shifted, None, &pairs, &centered, Exec::Sequential);
    let n = pairs.len() as f64;
    let mean_sum = pairs
        .iter()
        .map(|(a, b)| crate::heads::Head::reward(&shape, &params, a) + crate::heads::Head::reward(&shape, &params, b))
        .sum::<f64>()
        / n;
    let expected = gamma * (4.0 * c * mean_sum + 4.0 * c * c);
    let bce_err = (l1 - l0).abs();
    let center_err = ((c1 - c0) - expected).abs();
    Ok(CheckResult {
        name: "reward_shift".into(),
        passed: bce_err <= 1e-12 && center_err <= 1e-10,
        detail: format!("bce change {bce_err:e}, centering error {center_err:e}"),
    })
}

fn incremental_hessian(trials: usize) -> Result<CheckResult> {
    let mut err: f64 = 0.0;
    for t in 0..trials as u64 {
        let world = SyntheticWorld::random(4, NoiseModel::Bernoulli, t, 1.0)?;
        let ds = generate_synthetic(&world, 20, t + 1000)?;
        let batch = laplace_fit(&ds, 0.5, false, &NewtonConfig::default())?;
        let mut inc = LaplacePosterior::prior(4, 0.5, false)?;
        for e in ds.examples() {
            inc = laplace_update(&inc, e)?;
        }
        for (a, b) in batch.hessian.iter().zip(&inc.hessian) {
            err = err.max((a - b).abs());
        }
    }
    Ok(max_error_check("incremental_hessian", err, 1e-10))
}

fn training_determinism(exec: Exec) -> Result<CheckResult> {
    let world = SyntheticWorld::random(4, NoiseModel::Bernoulli, 3, 2.0)?;
    let ds = symmetrize(&generate_synthetic(&world, 48, 4)?)?;
    let schedule = TrainSchedule { base_lr: 0.01, batch_size: 16, seed: 5, ..TrainSchedule::default() };
    let model = model_init(&HeadConfig::EnsMlp { members: 3, hidden: 6 }, 4, 6)?;
    let a = train_with(&model, &ds, &schedule, &LossConfig::default(), exec)?;
    let b = train_with(&model, &ds, &schedule, &LossConfig::default(), Exec::Sequential)?;
    let same = a.model == b.model && a.loss_trace == b.loss_trace;
    Ok(CheckResult {
        name: "training_determinism".into(),
        passed: same,
        detail: format!("final loss {}", a.loss_trace.last().copied().unwrap_or(f64::NAN)),
    })
}
