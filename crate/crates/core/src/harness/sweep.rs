use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::aggregate::{aggregate_by_category, CategoryWeights};
use super::manifest::ExperimentManifest;
use super::selection::{select_candidates, CandidateMetrics, CandidateRecord, SelectionLedger, SelectionRule};
use crate::corpus::{load_dataset, PreferenceDataset};
use crate::error::{Error, Result};
use crate::heads::{model_init, Architecture, HeadConfig};
use crate::metrics::{report_from_scored, score_pairs, DEFAULT_BINS};
use crate::optim::{train_with, LossConfig, TrainSchedule};
use crate::par::{with_workers, Exec};
use crate::rng::derive_seed;

pub const SWEEP_SCHEMA: &str = "reward-uq/sweep/v1";
pub const SWEEP_RESULT_SCHEMA: &str = "reward-uq/sweep-result/v1";
/// Default number of concurrently trained candidates.
pub const WORKERS_ENV: &str = "REWARD_UQ_WORKERS";

/// Candidate whose metrics are already known; used instead of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedCandidate {
    pub config: String,
    pub ece: f64,
    pub ebce: f64,
    pub rs_alpha: Option<f64>,
    #[serde(default)]
    pub win_rate: f64,
}

/// Hyperparameter sweep description.
///
/// Grid keys name fields of the head config (`members`, `hidden`, `rank`,
/// `alpha_lora`, `dropout`, `masks`, `prior_precision`,
/// `weighted_hessian`), the schedule (`base_lr`, `warmup_fraction`,
/// `batch_size`, `epochs`, `weight_decay`, `bootstrap`), the loss
/// (`lambda_anchor`, `gamma_center`, `lambda_l2`) or `beta`. Booleans take
/// 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub schema: String,
    pub arch: Architecture,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<TrainSchedule>,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_weights: Option<PathBuf>,
    #[serde(default)]
    pub selection: SelectionRule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_bins")]
    pub m_bins: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<FixedCandidate>,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

impl SweepSpec {
    /// Grid sweep over the given training and validation files.
    pub fn new(arch: Architecture, grid: BTreeMap<String, Vec<f64>>, train: PathBuf, validation: PathBuf) -> Self {
        SweepSpec {
            schema: SWEEP_SCHEMA.to_string(),
            arch,
            grid,
            head: None,
            schedule: None,
            loss: LossConfig::default(),
            train: Some(train),
            validation: Some(validation),
            category_weights: None,
            selection: SelectionRule::default(),
            seed: 0,
            workers: None,
            beta: None,
            m_bins: DEFAULT_BINS,
            candidates: Vec::new(),
        }
    }

    /// Reads a spec; relative paths are taken relative to the spec file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: SweepSpec =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut spec.train, &mut spec.validation, &mut spec.category_weights].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SWEEP_SCHEMA {
            return Err(Error::InvalidConfig(format!("unsupported sweep schema {:?}", self.schema)));
        }
        self.selection.validate()?;
        if self.m_bins == 0 {
            return Err(Error::InvalidConfig("m_bins must be positive".into()));
        }
        if !self.candidates.is_empty() {
            return Ok(());
        }
        if self.grid.is_empty() || self.grid.values().any(Vec::is_empty) {
            return Err(Error::InvalidConfig("grid must have at least one value per entry".into()));
        }
        if self.train.is_none() || self.validation.is_none() {
            return Err(Error::InvalidConfig("grid sweeps need train and validation datasets".into()));
        }
        if let Some(h) = &self.head {
            if h.architecture() != self.arch {
                return Err(Error::InvalidConfig("head config does not match arch".into()));
            }
        }
        // Every grid point must map onto a valid configuration.
        for point in expand_grid(&self.grid) {
            self.resolve(&point)?;
        }
        Ok(())
    }

    fn base_schedule(&self) -> TrainSchedule {
        self.schedule.clone().unwrap_or_else(|| match self.arch {
            Architecture::EnsLora => TrainSchedule::for_adapters(),
            _ => TrainSchedule::default(),
        })
    }

    /// Head, schedule, loss and β for one grid point.
    pub fn resolve(&self, point: &BTreeMap<String, f64>) -> Result<(HeadConfig, TrainSchedule, LossConfig, Option<f64>)> {
        let head = self.head.clone().unwrap_or_else(|| HeadConfig::default_for(self.arch));
        let to_value = |v: std::result::Result<Value, serde_json::Error>| v.map_err(|e| Error::json("sweep config", e));
        let mut objs = [
            to_value(serde_json::to_value(&head))?,
            to_value(serde_json::to_value(self.base_schedule()))?,
            to_value(serde_json::to_value(&self.loss))?,
        ];
        let mut beta = self.beta;
        for (key, &v) in point {
            if key == "beta" {
                beta = Some(v);
                continue;
            }
            let slot = objs
                .iter_mut()
                .filter_map(|o| o.as_object_mut())
                .find_map(|o| if key != "arch" { o.get_mut(key) } else { None })
                .ok_or_else(|| Error::InvalidConfig(format!("unknown hyperparameter {key:?}")))?;
            *slot = coerce(key, slot, v)?;
        }
        let [h, s, l] = objs;
        let from = |what: &str, e: serde_json::Error| Error::InvalidConfig(format!("{what}: {e}"));
        let head: HeadConfig = serde_json::from_value(h).map_err(|e| from("head", e))?;
        let schedule: TrainSchedule = serde_json::from_value(s).map_err(|e| from("schedule", e))?;
        let loss: LossConfig = serde_json::from_value(l).map_err(|e| from("loss", e))?;
        head.validate()?;
        schedule.validate()?;
        loss.validate()?;
        if let Some(b) = beta {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidConfig(format!("beta must be positive, got {b}")));
            }
        }
        Ok((head, schedule, loss, beta))
    }
}

fn coerce(key: &str, current: &Value, v: f64) -> Result<Value> {
    let bad = || Error::InvalidConfig(format!("value {v} does not fit hyperparameter {key:?}"));
    match current {
        Value::Bool(_) if v == 0.0 || v == 1.0 => Ok(Value::Bool(v == 1.0)),
        Value::Number(n) if n.is_u64() => {
            if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
                Ok(Value::from(v as u64))
            } else {
                Err(bad())
            }
        }
        Value::Number(_) if v.is_finite() => Ok(Value::from(v)),
        _ => Err(bad()),
    }
}

/// Cartesian product in key order; the last key varies fastest.
pub fn expand_grid(grid: &BTreeMap<String, Vec<f64>>) -> Vec<BTreeMap<String, f64>> {
    let mut points = vec![BTreeMap::new()];
    for (key, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.insert(key.clone(), v);
                    q
                })
            })
            .collect();
    }
    points
}

/// `name=value` pairs in key order.
pub fn config_string(point: &BTreeMap<String, f64>) -> String {
    point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

/// Candidate records, the selection ledger and the manifest for a rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub schema: String,
    pub candidates: Vec<CandidateRecord>,
    pub ledger: SelectionLedger,
    pub manifest: ExperimentManifest,
}

impl SweepOutcome {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::json("sweep outcome", e))
    }
}

/// Worker bound: the spec value, else the environment variable, else 1.
pub fn resolve_workers(spec_workers: Option<usize>) -> usize {
    spec_workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .unwrap_or(1)
        .max(1)
}

struct SweepData {
    train: PreferenceDataset,
    validation: PreferenceDataset,
    weights: Option<CategoryWeights>,
}

/// Trains one model per grid point, evaluates it on the validation set and
/// applies the selection rule. Runtime failures of a candidate (divergence,
/// non-convergence) are recorded as filtered candidates; invalid input
/// aborts the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    if !spec.candidates.is_empty() {
        let candidates: Vec<CandidateRecord> = spec
            .candidates
            .iter()
            .enumerate()
            .map(|(index, c)| CandidateRecord {
                index,
                config: c.config.clone(),
                seed: derive_seed(spec.seed, index as u64),
                metrics: Some(CandidateMetrics {
                    ece: c.ece,
                    ebce: c.ebce,
                    rs_alpha: c.rs_alpha,
                    win_rate: c.win_rate,
                }),
                failure: None,
                report: None,
            })
            .collect();
        let ledger = select_candidates(&candidates, &spec.selection)?;
        let manifest = ExperimentManifest::for_sweep(spec, &candidates)?;
        return Ok(SweepOutcome {
            schema: SWEEP_RESULT_SCHEMA.to_string(),
            candidates,
            ledger,
            manifest,
        });
    }

    let train = load_dataset(spec.train.as_ref().expect("validated"), None)?;
    let validation = load_dataset(spec.validation.as_ref().expect("validated"), Some(train.dim()))?;
    let weights = spec.category_weights.as_ref().map(CategoryWeights::load).transpose()?;
    let data = SweepData { train, validation, weights };
    let points = expand_grid(&spec.grid);
    let workers = resolve_workers(spec.workers);

    let run = |exec_outer: Exec, exec_inner: Exec| -> Result<Vec<CandidateRecord>> {
        exec_outer
            .map_range(points.len(), |i| run_candidate(spec, &data, i, &points[i], exec_inner))
            .into_iter()
            .collect()
    };
    let candidates = if workers <= 1 {
        run(Exec::Sequential, Exec::default())?
    } else {
        with_workers(workers, |exec| run(exec, exec))?
    };
    let ledger = select_candidates(&candidates, &spec.selection)?;
    let manifest = ExperimentManifest::for_sweep(spec, &candidates)?;
    Ok(SweepOutcome {
        schema: SWEEP_RESULT_SCHEMA.to_string(),
        candidates,
        ledger,
        manifest,
    })
}

fn run_candidate(
    spec: &SweepSpec,
    data: &SweepData,
    index: usize,
    point: &BTreeMap<String, f64>,
    exec: Exec,
) -> Result<CandidateRecord> {
    let seed = derive_seed(spec.seed, index as u64);
    let (head, mut schedule, loss, beta) = spec.resolve(point)?;
    schedule.seed = derive_seed(seed, 1);
    let mut record = CandidateRecord {
        index,
        config: config_string(point),
        seed,
        metrics: None,
        failure: None,
        report: None,
    };
    let runtime = |e: Error| -> Result<String> {
        if e.is_validation() {
            return Err(e);
        }
        Ok(match e {
            Error::Diverged { step, .. } => format!("diverged at step {step}"),
            other => other.to_string(),
        })
    };
    let model = model_init(&head, data.train.dim(), derive_seed(seed, 0))?;
    let trained = match train_with(&model, &data.train, &schedule, &loss, exec) {
        Ok(out) => out.model,
        Err(e) => {
            record.failure = Some(runtime(e)?);
            return Ok(record);
        }
    };
    let originals = data.validation.originals();
    let report = score_pairs(&trained, originals, beta, exec).and_then(|scored| match &data.weights {
        Some(w) => aggregate_by_category(originals, &scored, w, spec.selection.alpha, spec.m_bins),
        None => report_from_scored(&scored, spec.selection.alpha, spec.m_bins),
    });
    match report {
        Ok(r) => {
            record.metrics = Some(CandidateMetrics::from(&r));
            record.report = Some(r);
        }
        Err(e) => record.failure = Some(runtime(e)?),
    }
    Ok(record)
}
