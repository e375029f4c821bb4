//! Preference data model, dataset files and synthetic Bradley-Terry worlds.

mod io;
mod synthetic;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, save_dataset, DATASET_SCHEMA};
pub use synthetic::{
    generate_synthetic, true_preference_probability, FeatureDistribution, NoiseModel,
    SyntheticWorld,
};

/// A fixed-length feature vector produced by a frozen backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Builds an embedding, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding".into()));
        }
        Ok(Embedding(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// One pairwise comparison: `chosen` was preferred over `rejected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceExample {
    pub id: String,
    pub chosen: Embedding,
    pub rejected: Embedding,
    pub category: Option<String>,
    pub weight: f64,
}

impl PreferenceExample {
    pub fn new(id: impl Into<String>, chosen: Embedding, rejected: Embedding) -> Result<Self> {
        let ex = PreferenceExample {
            id: id.into(),
            chosen,
            rejected,
            category: None,
            weight: 1.0,
        };
        ex.validate()?;
        Ok(ex)
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        self.weight = weight;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.chosen.len()
    }

    /// Feature difference z⁺ − z⁻.
    pub fn difference(&self) -> Vec<f64> {
        crate::numeric::sub(self.chosen.as_slice(), self.rejected.as_slice())
    }

    /// The same comparison with chosen and rejected swapped.
    pub fn flipped(&self) -> Self {
        PreferenceExample {
            id: format!("{}~flip", self.id),
            chosen: self.rejected.clone(),
            rejected: self.chosen.clone(),
            category: self.category.clone(),
            weight: self.weight,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.chosen.len() != self.rejected.len() {
            return Err(Error::DimensionMismatch {
                expected: self.chosen.len(),
                found: self.rejected.len(),
                line: None,
            });
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "example {}: weight must be finite and non-negative, got {}",
                self.id, self.weight
            )));
        }
        Ok(())
    }
}

/// An ordered, validated collection of comparisons sharing one dimension.
///
/// When `symmetrized` is set, the second half holds the flipped counterpart
/// of the first half, in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceDataset {
    examples: Vec<PreferenceExample>,
    dim: usize,
    symmetrized: bool,
}

impl PreferenceDataset {
    pub fn new(dim: usize, examples: Vec<PreferenceExample>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dataset dimension must be positive".into()));
        }
        for ex in &examples {
            ex.validate()?;
            if ex.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ex.dim(),
                    line: None,
                });
            }
        }
        Ok(PreferenceDataset {
            examples,
            dim,
            symmetrized: false,
        })
    }

    pub(crate) fn from_parts(dim: usize, examples: Vec<PreferenceExample>, symmetrized: bool) -> Result<Self> {
        let mut ds = Self::new(dim, examples)?;
        if symmetrized {
            if ds.examples.len() % 2 != 0 {
                return Err(Error::InvalidInput(
                    "symmetrized dataset must have an even number of examples".into(),
                ));
            }
            let half = ds.examples.len() / 2;
            for (a, b) in ds.examples[..half].iter().zip(&ds.examples[half..]) {
                if a.chosen != b.rejected || a.rejected != b.chosen {
                    return Err(Error::InvalidInput(format!(
                        "symmetrized dataset: {} is not the flip of {}",
                        b.id, a.id
                    )));
                }
            }
            ds.symmetrized = true;
        }
        Ok(ds)
    }

    pub fn examples(&self) -> &[PreferenceExample] {
        &self.examples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    /// The examples in their original orientation: the first half of a
    /// symmetrized dataset, otherwise everything.
    pub fn originals(&self) -> &[PreferenceExample] {
        if self.symmetrized {
            &self.examples[..self.examples.len() / 2]
        } else {
            &self.examples
        }
    }

    /// Pairs of indices whose comparisons are already mirror images of each
    /// other in the raw data. Such duplicates are reported, never merged.
    pub fn organic_flip_pairs(&self) -> Vec<(usize, usize)> {
        let key = |a: &Embedding, b: &Embedding| -> Vec<u64> {
            a.as_slice()
                .iter()
                .chain(b.as_slice())
                .map(|v| v.to_bits())
                .collect()
        };
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut pairs = Vec::new();
        for (i, ex) in self.originals().iter().enumerate() {
            if let Some(&j) = seen.get(&key(&ex.rejected, &ex.chosen)) {
                pairs.push((j, i));
            }
            seen.entry(key(&ex.chosen, &ex.rejected)).or_insert(i);
        }
        pairs
    }

    /// Sub-dataset with the given examples, keeping the dimension.
    pub fn subset(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new(self.dim, self.originals()[range].to_vec())
    }
}

/// Appends the flipped counterpart of every example, preserving the original
/// order as a prefix.
pub fn symmetrize(dataset: &PreferenceDataset) -> Result<PreferenceDataset> {
    if dataset.symmetrized {
        return Err(Error::AlreadySymmetrized);
    }
    let mut examples = dataset.examples.clone();
    examples.extend(dataset.examples.iter().map(PreferenceExample::flipped));
    Ok(PreferenceDataset {
        examples,
        dim: dataset.dim,
        symmetrized: true,
    })
}
