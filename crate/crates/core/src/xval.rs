//! Cross-validation run records and grid aggregation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::metrics::MetricBundle;
use crate::{Error, Result};

/// Metrics that can be aggregated over runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Precision,
    Recall,
    F1,
    Certainty,
    Abundance,
    GrainCount,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Precision,
        Metric::Recall,
        Metric::F1,
        Metric::Certainty,
        Metric::Abundance,
        Metric::GrainCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::Certainty => "certainty",
            Metric::Abundance => "abundance",
            Metric::GrainCount => "grain_count",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One fold of one experiment configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub architecture: String,
    pub lambda: f64,
    pub finetune_level: String,
    pub fold_index: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub metrics: MetricBundle,
    /// Overrides `metrics.grain_count` when present.
    #[cfg_attr(
        feature = "serde",
        serde(
            default,
            deserialize_with = "na::opt_u64",
            skip_serializing_if = "Option::is_none"
        )
    )]
    pub grain_count: Option<u64>,
}

impl RunRecord {
    pub fn validate(&self, k: Option<usize>) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if let Some(k) = k {
            if self.fold_index >= k {
                return Err(Error::InvalidParameter(format!(
                    "fold_index {} outside 0..{k}",
                    self.fold_index
                )));
            }
        }
        Ok(())
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        let b = &self.metrics;
        match m {
            Metric::Precision => b.precision,
            Metric::Recall => b.recall,
            Metric::F1 => b.f1,
            Metric::Certainty => b.certainty,
            Metric::Abundance => b.abundance,
            Metric::GrainCount => self.grain_count.or(b.grain_count).map(|c| c as f64),
        }
    }
}

/// Record fields that can form a group key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyField {
    Architecture,
    Lambda,
    FinetuneLevel,
}

impl KeyField {
    pub const ALL: [KeyField; 3] = [
        KeyField::Architecture,
        KeyField::Lambda,
        KeyField::FinetuneLevel,
    ];

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "architecture" | "arch" => Some(KeyField::Architecture),
            "lambda" => Some(KeyField::Lambda),
            "finetune_level" | "finetune" => Some(KeyField::FinetuneLevel),
            _ => None,
        }
    }
}

/// Group identity; fields not grouped on are `None`.
#[derive(Debug, Clone, Default)]
pub struct GroupKey {
    pub architecture: Option<String>,
    pub lambda: Option<f64>,
    pub finetune_level: Option<String>,
}

impl GroupKey {
    fn of(r: &RunRecord, fields: &[KeyField]) -> Self {
        let mut k = GroupKey::default();
        for f in fields {
            match f {
                KeyField::Architecture => k.architecture = Some(r.architecture.clone()),
                // Adding zero folds -0.0 into 0.0.
                KeyField::Lambda => k.lambda = Some(r.lambda + 0.0),
                KeyField::FinetuneLevel => k.finetune_level = Some(r.finetune_level.clone()),
            }
        }
        k
    }
}

fn cmp_lambda(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => a.is_some().cmp(&b.is_some()),
    }
}

impl Ord for GroupKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.architecture
            .cmp(&other.architecture)
            .then_with(|| cmp_lambda(self.lambda, other.lambda))
            .then_with(|| self.finetune_level.cmp(&other.finetune_level))
    }
}

impl PartialOrd for GroupKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for GroupKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for GroupKey {}

impl fmt::Display for GroupKey {
    /// `arch=unet;lambda=0.001;finetune=all`, omitting ungrouped fields.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if let Some(a) = &self.architecture {
            parts.push(format!("arch={a}"));
        }
        if let Some(l) = self.lambda {
            parts.push(format!("lambda={l}"));
        }
        if let Some(t) = &self.finetune_level {
            parts.push(format!("finetune={t}"));
        }
        if parts.is_empty() {
            return f.write_str("all");
        }
        f.write_str(&parts.join(";"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; `None` when `n == 1`.
    pub std: Option<f64>,
    /// Records with this metric defined.
    pub n: usize,
}

impl MetricSummary {
    /// Two-pass mean and `n − 1` standard deviation. Values are summed in
    /// sorted order so the result does not depend on input order.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
            libm::sqrt(ss / (n - 1) as f64)
        });
        Some(Self { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub key: GroupKey,
    /// Records in the group.
    pub n: usize,
    /// Only metrics defined in at least one record appear.
    pub metrics: BTreeMap<Metric, MetricSummary>,
}

impl GroupSummary {
    pub fn get(&self, m: Metric) -> Option<&MetricSummary> {
        self.metrics.get(&m)
    }
}

/// Groups records by `group_by` and summarizes every metric, sorted by key.
pub fn aggregate(records: &[RunRecord], group_by: &[KeyField]) -> Result<Vec<GroupSummary>> {
    if records.is_empty() {
        return Err(Error::Empty("run records".into()));
    }
    for r in records {
        r.validate(None)?;
    }
    let mut groups: BTreeMap<GroupKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(GroupKey::of(r, group_by)).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|(key, rs)| {
            let metrics = Metric::ALL
                .into_iter()
                .filter_map(|m| {
                    let vals: Vec<f64> = rs.iter().filter_map(|r| r.metric(m)).collect();
                    MetricSummary::of(&vals).map(|s| (m, s))
                })
                .collect();
            GroupSummary {
                key,
                n: rs.len(),
                metrics,
            }
        })
        .collect())
}

/// Key of the group with the largest mean `metric`. Ties go to the smaller
/// lambda, then to the lexically smaller key.
pub fn best_by(summaries: &[GroupSummary], metric: Metric) -> Result<GroupKey> {
    let better = |a: &(&GroupSummary, f64), b: &(&GroupSummary, f64)| {
        a.1.total_cmp(&b.1)
            .then_with(|| cmp_lambda(b.0.key.lambda, a.0.key.lambda))
            .then_with(|| b.0.key.to_string().cmp(&a.0.key.to_string()))
    };
    summaries
        .iter()
        .filter_map(|s| s.get(metric).map(|m| (s, m.mean)))
        .max_by(better)
        .map(|(s, _)| s.key.clone())
        .ok_or_else(|| Error::Empty(format!("no group defines {metric}")))
}

/// `(b − a) / a`, or `None` when `a` is zero.
pub fn relative_improvement(a: f64, b: f64) -> Option<f64> {
    (a != 0.0).then(|| (b - a) / a)
}

/// Serde helpers accepting `null`, a number or the string `"NA"`.
#[cfg(feature = "serde")]
pub mod na {
    use alloc::string::String;
    use serde::de::{Deserialize, Deserializer, Error};

    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    fn raw<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Raw>::deserialize(d)? {
            None => Ok(None),
            Some(Raw::Num(v)) => Ok(Some(v)),
            Some(Raw::Text(s)) if s.eq_ignore_ascii_case("na") => Ok(None),
            Some(Raw::Text(s)) => Err(D::Error::custom(alloc::format!(
                "expected a number or \"NA\", got {s:?}"
            ))),
        }
    }

    pub fn opt_f64<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        raw(d)
    }

    pub fn opt_u64<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        match raw(d)? {
            None => Ok(None),
            Some(v) if v >= 0.0 && libm::trunc(v) == v && v <= u64::MAX as f64 => {
                Ok(Some(v as u64))
            }
            Some(v) => Err(D::Error::custom(alloc::format!(
                "expected a count, got {v}"
            ))),
        }
    }
}
