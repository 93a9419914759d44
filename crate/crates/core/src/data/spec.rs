use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DataError, FeatureKind, Result, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Sum,
    Mean,
    Count,
    Last,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GranularityFill {
    Forward,
    Backward,
    Daily,
    Periodic,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    Mean,
    Zero,
    Mode,
    Drop,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    None,
    OneHot,
    Ordinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetGranularity {
    Hourly,
    #[default]
    Daily,
}

impl TargetGranularity {
    pub fn seconds(self) -> i64 {
        match self {
            Self::Hourly => 3_600,
            Self::Daily => 86_400,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hourly => "hourly",
            Self::Daily => "daily",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Zscore,
    Minmax,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureSpec {
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub granularity_fill: GranularityFill,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    #[serde(default)]
    pub encoding: Encoding,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub features: BTreeMap<String, FeatureSpec>,
    pub target_granularity: TargetGranularity,
    pub normalization: Normalization,
    /// Retained-variance threshold for optional PCA; `None` disables it.
    pub pca_variance: Option<f64>,
}

impl PreprocessSpec {
    pub fn feature(&self, name: &str) -> Result<&FeatureSpec> {
        self.features
            .get(name)
            .ok_or_else(|| DataError::MissingFeatureSpec(name.to_string()))
    }

    /// Checks the spec against a schema: every entry names a schema feature and
    /// encodings match feature kinds.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for (name, fs) in &self.features {
            let f = schema
                .get(name)
                .ok_or_else(|| DataError::InvalidSpec(format!("`{name}` is not in the schema")))?;
            match (fs.encoding, f.kind) {
                (Encoding::OneHot, k) if k != FeatureKind::Categorical => {
                    return Err(DataError::InvalidSpec(format!("one_hot on non-categorical `{name}`")))
                }
                (Encoding::Ordinal, k) if k != FeatureKind::Ordinal => {
                    return Err(DataError::InvalidSpec(format!("ordinal on non-ordinal `{name}`")))
                }
                _ => {}
            }
            if matches!(fs.aggregation, Aggregation::Sum | Aggregation::Mean) && f.kind != FeatureKind::Numeric {
                return Err(DataError::UnsupportedAggregator {
                    feature: name.clone(),
                    aggregation: fs.aggregation,
                    kind: f.kind,
                });
            }
        }
        if let Some(v) = self.pca_variance {
            if !(v > 0.0 && v <= 1.0) {
                return Err(DataError::InvalidSpec("pca_variance must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}
