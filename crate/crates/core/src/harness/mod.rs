//! Sweeps, model selection, category aggregation, report export, manifests
//! and the command line front end.

mod aggregate;
pub mod cli;
mod export;
mod manifest;
mod selection;
pub mod selfcheck;
mod sweep;

pub use aggregate::{aggregate_by_category, CategoryWeight, CategoryWeights, WEIGHTS_SCHEMA};
pub use export::{
    export_report, load_report_set, render_structured, render_tabular, ReportEntry, ReportFormat, ReportSet,
    REPORT_SET_SCHEMA,
};
pub use manifest::{sha256_file, sha256_hex, ExperimentManifest, FileDigest, ManifestCheck, RecordDigest, MANIFEST_SCHEMA};
pub use selection::{
    select_candidates, CandidateMetrics, CandidateRecord, FilteredCandidate, RankedCandidate, SelectionLedger,
    SelectionRule,
};
pub use sweep::{
    config_string, expand_grid, resolve_workers, run_sweep, FixedCandidate, SweepOutcome, SweepSpec,
    SWEEP_RESULT_SCHEMA, SWEEP_SCHEMA, WORKERS_ENV,
};
