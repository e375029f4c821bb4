use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Embedding, PreferenceDataset, PreferenceExample};
use crate::error::{Error, Result};

pub const DATASET_SCHEMA: &str = "reward-uq/dataset/v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema: String,
    dim: usize,
    #[serde(default)]
    symmetrized: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    chosen: Vec<f64>,
    rejected: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

/// Reads a line-delimited dataset file.
///
/// An optional first line `{"schema": ..., "dim": d, "symmetrized": b}` fixes
/// the dimension and orientation flag; otherwise the dimension comes from
/// `expected_dim` or the first record. Blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<PreferenceDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut dim = expected_dim;
    let mut symmetrized = false;
    let mut examples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if examples.is_empty() && text.contains("\"schema\"") {
            let header: Header =
                serde_json::from_str(text).map_err(|e| parse_err(lineno, e.to_string()))?;
            if header.schema != DATASET_SCHEMA {
                return Err(parse_err(lineno, format!("unsupported schema {:?}", header.schema)));
            }
            if let Some(d) = expected_dim {
                if d != header.dim {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: header.dim,
                        line: Some(lineno),
                    });
                }
            }
            dim = Some(header.dim);
            symmetrized = header.symmetrized;
            continue;
        }
        let record: Record =
            serde_json::from_str(text).map_err(|e| parse_err(lineno, e.to_string()))?;
        let d = *dim.get_or_insert(record.chosen.len());
        for (found, _) in [(record.chosen.len(), "chosen"), (record.rejected.len(), "rejected")] {
            if found != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found,
                    line: Some(lineno),
                });
            }
        }
        let chosen = Embedding::new(record.chosen)
            .map_err(|_| parse_err(lineno, "non-finite value in chosen".into()))?;
        let rejected = Embedding::new(record.rejected)
            .map_err(|_| parse_err(lineno, "non-finite value in rejected".into()))?;
        let weight = record.weight.unwrap_or(1.0);
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(parse_err(lineno, format!("invalid weight {weight}")));
        }
        examples.push(PreferenceExample {
            id: record.id,
            chosen,
            rejected,
            category: record.category,
            weight,
        });
    }

    let dim = dim.ok_or_else(|| {
        Error::InvalidInput(format!(
            "{}: empty dataset and no expected dimension",
            path.display()
        ))
    })?;
    PreferenceDataset::from_parts(dim, examples, symmetrized)
}

/// Writes a dataset with a schema header followed by one record per line.
///
/// Numbers use the shortest representation that parses back to the same
/// binary64 value, so save followed by load is the identity.
pub fn save_dataset(dataset: &PreferenceDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = Header {
        schema: DATASET_SCHEMA.to_string(),
        dim: dataset.dim(),
        symmetrized: dataset.is_symmetrized(),
    };
    let write = |out: &mut BufWriter<File>, line: String| -> Result<()> {
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    };
    write(&mut out, serde_json::to_string(&header).map_err(|e| Error::json("header", e))?)?;
    for ex in dataset.examples() {
        let record = Record {
            id: ex.id.clone(),
            chosen: ex.chosen.as_slice().to_vec(),
            rejected: ex.rejected.as_slice().to_vec(),
            category: ex.category.clone(),
            weight: (ex.weight != 1.0).then_some(ex.weight),
        };
        write(&mut out, serde_json::to_string(&record).map_err(|e| Error::json("record", e))?)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::symmetrize;
    use proptest::prelude::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_headerless_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.jsonl",
            "{\"id\":\"a\",\"chosen\":[1,2,3,4],\"rejected\":[0,0,0,0]}\n\
             {\"id\":\"b\",\"chosen\":[1,2,3,4],\"rejected\":[0,0,0,1],\"category\":\"chat\",\"weight\":0.5}\n",
        );
        let ds = load_dataset(&p, None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.examples()[1].weight, 0.5);
        assert_eq!(ds.examples()[1].category.as_deref(), Some("chat"));
        assert_eq!(ds.examples()[0].weight, 1.0);
    }

    #[test]
    fn dimension_mismatch_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.jsonl",
            "{\"id\":\"a\",\"chosen\":[1,2,3,4],\"rejected\":[0,0,0,0]}\n\
             {\"id\":\"b\",\"chosen\":[1,2,3,4,5],\"rejected\":[0,0,0,0,0]}\n",
        );
        match load_dataset(&p, None) {
            Err(Error::DimensionMismatch { expected: 4, found: 5, line: Some(2) }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_nonfinite_records_report_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bad.jsonl", "{\"id\":\"a\",\"chosen\":[1],\"rejected\":[0]}\nnot json\n");
        assert!(matches!(load_dataset(&p, None), Err(Error::Parse { line: 2, .. })));
        let p = write(&dir, "inf.jsonl", "{\"id\":\"a\",\"chosen\":[1e999],\"rejected\":[0]}\n");
        assert!(matches!(load_dataset(&p, None), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_file_needs_expected_dim() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "empty.jsonl", "");
        assert!(load_dataset(&p, None).is_err());
        let ds = load_dataset(&p, Some(3)).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.dim(), 3);
    }

    #[test]
    fn symmetrized_flag_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ex = PreferenceExample::new(
            "a",
            Embedding::new(vec![0.1, 0.2]).unwrap(),
            Embedding::new(vec![0.3, -0.7]).unwrap(),
        )
        .unwrap()
        .with_category("safety");
        let ds = symmetrize(&PreferenceDataset::new(2, vec![ex]).unwrap()).unwrap();
        let p = dir.path().join("s.jsonl");
        save_dataset(&ds, &p).unwrap();
        assert_eq!(load_dataset(&p, None).unwrap(), ds);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
            -1e3..1e3f64,
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn save_then_load_is_identity(
            dim in 1usize..6,
            rows in prop::collection::vec((prop::collection::vec(finite(), 12), 0.0..4.0f64, any::<bool>()), 0..8),
        ) {
            let examples: Vec<_> = rows.iter().enumerate().map(|(i, (vals, w, cat))| {
                let mut ex = PreferenceExample::new(
                    format!("e{i}"),
                    Embedding::new(vals[..dim].to_vec()).unwrap(),
                    Embedding::new(vals[6..6 + dim].to_vec()).unwrap(),
                ).unwrap().with_weight(*w).unwrap();
                if *cat { ex = ex.with_category("c\"at"); }
                ex
            }).collect();
            let ds = PreferenceDataset::new(dim, examples).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.jsonl");
            save_dataset(&ds, &p).unwrap();
            let back = load_dataset(&p, None).unwrap();
            for (a, b) in back.examples().iter().zip(ds.examples()) {
                for (x, y) in a.chosen.as_slice().iter().zip(b.chosen.as_slice()) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            prop_assert_eq!(back, ds);
        }
    }
}
