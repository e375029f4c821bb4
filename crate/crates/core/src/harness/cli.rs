//! Command line front end.
//!
//! Exit status: 0 on success, 1 for invalid input or usage, 2 for runtime
//! failures (divergence, non-convergence, failed selfcheck).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::aggregate::{aggregate_by_category, CategoryWeights};
use super::export::{render_structured, render_tabular, ReportEntry};
use super::manifest::ExperimentManifest;
use super::selfcheck::run_selfcheck;
use super::sweep::{run_sweep, SweepSpec};
use crate::corpus::{generate_synthetic, load_dataset, save_dataset, symmetrize, NoiseModel, PreferenceDataset, SyntheticWorld};
use crate::error::{Error, Result};
use crate::heads::{load_checkpoint, model_init, save_checkpoint, Architecture};
use crate::metrics::{report_from_scored, score_pairs, MetricReport, DEFAULT_ALPHA, DEFAULT_BINS, REPORT_SCHEMA};
use crate::optim::train_with;
use crate::par::Exec;
use crate::rng::derive_seed;

#[derive(Parser, Debug)]
#[command(name = "reward-uq", version, about = "Uncertainty-aware reward models over preference embeddings")]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic preference dataset.
    Generate(GenerateArgs),
    /// Train one model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run a hyperparameter sweep, or verify a sweep manifest.
    Sweep(SweepArgs),
    /// Combine metric reports into structured and tabular exports.
    Report(ReportArgs),
    /// Run the built-in invariant suite.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    n: usize,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the true reward weights; defaults to --seed.
    #[arg(long)]
    world_seed: Option<u64>,
    /// `bernoulli` or `deterministic` labels.
    #[arg(long, default_value = "bernoulli")]
    mode: NoiseModel,
    #[arg(long, default_value_t = 1.0)]
    weight_norm: f64,
    /// Append the flipped copy of every comparison.
    #[arg(long)]
    symmetrize: bool,
    /// Category attached to every example.
    #[arg(long)]
    category: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    arch: Architecture,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "model.ckpt")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    members: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    alpha_lora: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    masks: Option<usize>,
    #[arg(long)]
    prior_precision: Option<f64>,
    #[arg(long)]
    weighted_hessian: bool,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long)]
    bootstrap: bool,
    #[arg(long)]
    lambda_anchor: Option<f64>,
    #[arg(long)]
    gamma_center: Option<f64>,
    #[arg(long)]
    lambda_l2: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, default_value = "model.ckpt")]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Interval width multiplier; defaults to the architecture's value.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Category weights file; aggregates per category when given.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, required_unless_present = "rerun", conflicts_with = "rerun")]
    spec: Option<PathBuf>,
    /// Rerun a manifest and check that every record reproduces.
    #[arg(long)]
    rerun: Option<PathBuf>,
    /// Write the full outcome here; only the selection is printed.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Metric report files (as written by `eval --out`).
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Method label; defaults to each input's file stem.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value = "-")]
    dataset: String,
    #[arg(long, default_value = "-")]
    model_size: String,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    tsv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelfcheckArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a, exec),
        Command::Eval(a) => eval(a, exec),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
        Command::Selfcheck(a) => {
            let r = run_selfcheck(exec);
            emit(&r.to_json()?, a.out.as_deref())?;
            for c in r.checks.iter().filter(|c| !c.passed) {
                eprintln!("selfcheck failed: {}: {}", c.name, c.detail);
            }
            Ok(if r.passed { 0 } else { 2 })
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(what: &str, v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::json(what, e))
}

fn generate(a: GenerateArgs) -> Result<i32> {
    let world = SyntheticWorld::random(a.dim, a.mode, a.world_seed.unwrap_or(a.seed), a.weight_norm)?;
    let mut ds = generate_synthetic(&world, a.n, a.seed)?;
    if let Some(cat) = &a.category {
        let examples = ds.examples().iter().cloned().map(|e| e.with_category(cat.clone())).collect();
        ds = PreferenceDataset::new(ds.dim(), examples)?;
    }
    if a.symmetrize {
        ds = symmetrize(&ds)?;
    }
    save_dataset(&ds, &a.out)?;
    Ok(0)
}

fn train(a: TrainArgs, exec: Exec) -> Result<i32> {
    let data = load_dataset(&a.data, None)?;
    let mut overrides = BTreeMap::new();
    let mut set = |k: &str, v: Option<f64>| {
        if let Some(v) = v {
            overrides.insert(k.to_string(), v);
        }
    };
    set("members", a.members.map(|v| v as f64));
    set("hidden", a.hidden.map(|v| v as f64));
    set("rank", a.rank.map(|v| v as f64));
    set("alpha_lora", a.alpha_lora);
    set("dropout", a.dropout);
    set("masks", a.masks.map(|v| v as f64));
    set("prior_precision", a.prior_precision);
    set("weighted_hessian", a.weighted_hessian.then_some(1.0));
    set("base_lr", a.lr);
    set("epochs", a.epochs.map(|v| v as f64));
    set("batch_size", a.batch_size.map(|v| v as f64));
    set("warmup_fraction", a.warmup_fraction);
    set("bootstrap", a.bootstrap.then_some(1.0));
    set("lambda_anchor", a.lambda_anchor);
    set("gamma_center", a.gamma_center);
    set("lambda_l2", a.lambda_l2);
    let spec = SweepSpec::new(a.arch, BTreeMap::new(), a.data.clone(), a.data.clone());
    let (head, mut schedule, loss, _) = spec.resolve(&overrides)?;
    schedule.seed = derive_seed(a.seed, 1);
    let model = model_init(&head, data.dim(), derive_seed(a.seed, 0))?;
    let out = train_with(&model, &data, &schedule, &loss, exec)?;
    save_checkpoint(&out.model, &a.out)?;
    let summary = serde_json::json!({
        "arch": a.arch.tag(),
        "checkpoint": a.out,
        "steps": out.loss_trace.len(),
        "final_loss": out.loss_trace.last(),
    });
    emit(&to_json("train summary", &summary)?, None)?;
    Ok(0)
}

fn eval(a: EvalArgs, exec: Exec) -> Result<i32> {
    let model = load_checkpoint(&a.checkpoint)?;
    let data = load_dataset(&a.data, Some(model.dim()))?;
    let scored = score_pairs(&model, data.originals(), a.beta, exec)?;
    let report: MetricReport = match &a.weights {
        Some(w) => aggregate_by_category(data.originals(), &scored, &CategoryWeights::load(w)?, a.alpha, a.bins)?,
        None => report_from_scored(&scored, a.alpha, a.bins)?,
    };
    emit(&to_json("metric report", &report)?, a.out.as_deref())?;
    Ok(0)
}

fn sweep(a: SweepArgs) -> Result<i32> {
    if let Some(path) = &a.rerun {
        let check = ExperimentManifest::load(path)?.verify()?;
        emit(&to_json("manifest check", &check)?, a.out.as_deref())?;
        return Ok(if check.reproduced { 0 } else { 2 });
    }
    let mut spec = SweepSpec::load(a.spec.as_ref().expect("required by clap"))?;
    if a.workers.is_some() {
        spec.workers = a.workers;
    }
    let outcome = run_sweep(&spec)?;
    if let Some(m) = &a.manifest {
        outcome.manifest.save(m)?;
    }
    match &a.out {
        Some(p) => {
            emit(&outcome.to_json()?, Some(p))?;
            let line = match outcome.ledger.selected {
                Some(i) => format!("selected: {} (candidate {i})\n", outcome.candidates[i].config),
                None => "selected: none\n".to_string(),
            };
            emit(&line, None)?;
        }
        None => emit(&outcome.to_json()?, None)?,
    }
    Ok(0)
}

fn report(a: ReportArgs) -> Result<i32> {
    let mut entries = Vec::with_capacity(a.inputs.len());
    for path in &a.inputs {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: MetricReport =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::InvalidInput(format!("{}: unsupported report schema {:?}", path.display(), report.schema)));
        }
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        entries.push(ReportEntry {
            method: a.method.clone().unwrap_or(stem),
            dataset: a.dataset.clone(),
            model_size: a.model_size.clone(),
            report,
        });
    }
    if let Some(p) = &a.json {
        emit(&render_structured(&entries)?, Some(p))?;
    }
    if let Some(p) = &a.tsv {
        emit(&render_tabular(&entries), Some(p))?;
    }
    if a.json.is_none() && a.tsv.is_none() {
        emit(&render_tabular(&entries), None)?;
    }
    Ok(0)
}
