use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::PreferenceExample;
use crate::error::{Error, Result};
use crate::metrics::{ranking_score_from_rates, report_from_scored, MetricReport, ScoredPair, REPORT_SCHEMA};

pub const WEIGHTS_SCHEMA: &str = "reward-uq/category-weights/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryWeight {
    pub group: String,
    pub weight: f64,
}

/// Subcategory → (group, weight within the group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryWeights {
    #[serde(default = "weights_schema")]
    pub schema: String,
    pub categories: BTreeMap<String, CategoryWeight>,
}

fn weights_schema() -> String {
    WEIGHTS_SCHEMA.to_string()
}

impl CategoryWeights {
    pub fn new(categories: BTreeMap<String, CategoryWeight>) -> Result<Self> {
        let w = CategoryWeights { schema: weights_schema(), categories };
        w.validate()?;
        Ok(w)
    }

    /// Every category in its own group with weight 1.
    pub fn uniform<'a>(categories: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        Self::new(
            categories
                .into_iter()
                .map(|c| (c.to_string(), CategoryWeight { group: c.to_string(), weight: 1.0 }))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != WEIGHTS_SCHEMA {
            return Err(Error::InvalidConfig(format!("unsupported weights schema {:?}", self.schema)));
        }
        if self.categories.is_empty() {
            return Err(Error::InvalidConfig("category weights are empty".into()));
        }
        for (name, cw) in &self.categories {
            if !(cw.weight.is_finite() && cw.weight > 0.0) {
                return Err(Error::InvalidConfig(format!("weight of {name:?} must be positive")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let w: Self = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        w.validate()?;
        Ok(w)
    }
}

/// Averaged quantities; the ranking score is derived from these last.
const AVERAGED: usize = 9;

fn scalars(r: &MetricReport) -> [f64; AVERAGED] {
    [r.win_rate, r.ct_rate, r.ut_rate, r.cf_rate, r.uf_rate, r.ece, r.elce, r.euce, r.ebce]
}

/// Per-subcategory metrics, weighted within each group, averaged over groups
/// without weights; RS_α is then computed from the averaged rates.
pub fn aggregate_by_category(
    examples: &[PreferenceExample],
    scored: &[ScoredPair],
    weights: &CategoryWeights,
    alpha: f64,
    m_bins: usize,
) -> Result<MetricReport> {
    weights.validate()?;
    if examples.len() != scored.len() {
        return Err(Error::InvalidInput("examples and predictions differ in length".into()));
    }
    let mut by_cat: BTreeMap<&str, Vec<ScoredPair>> = weights.categories.keys().map(|k| (k.as_str(), Vec::new())).collect();
    for (e, s) in examples.iter().zip(scored) {
        let cat = e
            .category
            .as_deref()
            .ok_or_else(|| Error::InvalidInput(format!("example {:?} has no category", e.id)))?;
        by_cat
            .get_mut(cat)
            .ok_or_else(|| Error::InvalidInput(format!("unknown category {cat:?}")))?
            .push(*s);
    }

    // group -> (Σ w·x, Σ w)
    let mut groups: BTreeMap<&str, ([f64; AVERAGED], f64)> = BTreeMap::new();
    for (cat, pairs) in &by_cat {
        if pairs.is_empty() {
            return Err(Error::InvalidInput(format!("category {cat:?} has no examples")));
        }
        let cw = &weights.categories[*cat];
        let r = report_from_scored(pairs, alpha, m_bins)?;
        let entry = groups.entry(cw.group.as_str()).or_insert(([0.0; AVERAGED], 0.0));
        for (acc, x) in entry.0.iter_mut().zip(scalars(&r)) {
            *acc += cw.weight * x;
        }
        entry.1 += cw.weight;
    }
    let g = groups.len() as f64;
    let mut avg = [0.0; AVERAGED];
    for (sums, total) in groups.values() {
        for (a, s) in avg.iter_mut().zip(sums) {
            *a += s / total;
        }
    }
    avg.iter_mut().for_each(|a| *a /= g);
    let [win_rate, ct_rate, ut_rate, cf_rate, uf_rate, ece, elce, euce, ebce] = avg;
    let rs_alpha = match ranking_score_from_rates(ct_rate, ut_rate, cf_rate, uf_rate, alpha) {
        Ok(v) => Some(v),
        Err(Error::UndefinedScore { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        schema: REPORT_SCHEMA.to_string(),
        n: scored.len() as u64,
        win_rate,
        ct_rate,
        ut_rate,
        cf_rate,
        uf_rate,
        alpha,
        rs_alpha,
        beta: scored[0].chosen.beta,
        ece,
        elce,
        euce,
        ebce,
        m_bins,
        confusion: None,
        bins: None,
        lower_bins: None,
        upper_bins: None,
    })
}
