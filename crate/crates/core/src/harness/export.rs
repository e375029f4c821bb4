use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{CalibrationBins, MetricReport};

pub const REPORT_SET_SCHEMA: &str = "reward-uq/report-set/v1";

/// One report with the labels of the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub method: String,
    pub dataset: String,
    pub model_size: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    pub schema: String,
    pub entries: Vec<ReportEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// JSON document with every field, re-readable with [`load_report_set`].
    Structured,
    /// Tab-separated summary rows followed by the bin tables.
    Tabular,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured" | "json" => Ok(ReportFormat::Structured),
            "tabular" | "tsv" => Ok(ReportFormat::Tabular),
            other => Err(Error::InvalidInput(format!("unknown report format {other:?}"))),
        }
    }
}

pub fn render_structured(entries: &[ReportEntry]) -> Result<String> {
    let set = ReportSet {
        schema: REPORT_SET_SCHEMA.to_string(),
        entries: entries.to_vec(),
    };
    serde_json::to_string_pretty(&set)
        .map(|s| s + "\n")
        .map_err(|e| Error::json("report set", e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn render_tabular(entries: &[ReportEntry]) -> String {
    let mut out = String::from(
        "method\tdataset\tmodel_size\tn\twin_rate\tct_rate\tut_rate\tcf_rate\tuf_rate\talpha\trs_alpha\tbeta\tece\telce\teuce\tebce\n",
    );
    for e in entries {
        let r = &e.report;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.method,
            e.dataset,
            e.model_size,
            r.n,
            r.win_rate,
            r.ct_rate,
            r.ut_rate,
            r.cf_rate,
            r.uf_rate,
            r.alpha,
            opt(r.rs_alpha),
            r.beta,
            r.ece,
            r.elce,
            r.euce,
            r.ebce
        );
    }
    out.push_str("\nmethod\tdataset\tmodel_size\tbinned_by\tlo\thi\tcount\tmean_pred\tmean_lower\tmean_upper\tfreq\n");
    for e in entries {
        let r = &e.report;
        for (kind, bins) in [("p_hat", &r.bins), ("p_lower", &r.lower_bins), ("p_upper", &r.upper_bins)] {
            for b in bins.iter().flat_map(|t: &CalibrationBins| t.bins.iter()) {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{kind}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    e.method, e.dataset, e.model_size, b.lo, b.hi, b.count, b.mean_pred, b.mean_lower, b.mean_upper, b.freq
                );
            }
        }
    }
    out
}

/// Writes `entries` to `path` in the requested format.
pub fn export_report(entries: &[ReportEntry], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Structured => render_structured(entries)?,
        ReportFormat::Tabular => render_tabular(entries),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_report_set(path: impl AsRef<Path>) -> Result<ReportSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let set: ReportSet = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    if set.schema != REPORT_SET_SCHEMA {
        return Err(Error::InvalidInput(format!("unsupported report schema {:?}", set.schema)));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::RewardEstimate;
    use crate::metrics::{report_from_scored, ScoredPair};

    fn entry(method: &str) -> ReportEntry {
        let e = |r, u| RewardEstimate::new(r, u, 2.0).unwrap();
        let scored = [
            ScoredPair { chosen: e(0.4, 0.1), rejected: e(-0.3, 0.05) },
            ScoredPair { chosen: e(0.1, 0.3), rejected: e(0.2, 0.01) },
        ];
        ReportEntry {
            method: method.into(),
            dataset: "syn".into(),
            model_size: "d4".into(),
            report: report_from_scored(&scored, 0.2, 10).unwrap(),
        }
    }

    #[test]
    fn structured_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let entries = vec![entry("ens-mlp"), entry("bay-lin")];
        export_report(&entries, ReportFormat::Structured, &path).unwrap();
        assert_eq!(load_report_set(&path).unwrap().entries, entries);
    }

    #[test]
    fn tabular_has_row_per_entry_and_bin_tables() {
        let text = render_tabular(&[entry("a"), entry("b")]);
        let mut parts = text.split("\n\n");
        let summary: Vec<_> = parts.next().unwrap().lines().collect();
        assert_eq!(summary.len(), 3);
        assert!(summary[1].starts_with("a\tsyn\td4\t2\t"));
        let bins: Vec<_> = parts.next().unwrap().lines().skip(1).collect();
        assert_eq!(bins.len(), 2 * 3 * 10);
    }

    #[test]
    fn unwritable_path_fails() {
        let err = export_report(&[entry("a")], ReportFormat::Tabular, "/nonexistent-dir/x.tsv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
