use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, FeatureCategory, Result, TargetGranularity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureFilter {
    /// Every training column except demographics and personality.
    All,
    Categories(Vec<FeatureCategory>),
    /// Explicit source-feature list.
    Features(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    pub granularity: TargetGranularity,
    pub filter: FeatureFilter,
}

impl VariantSpec {
    pub fn key(&self) -> String {
        format!("{}_{}", self.granularity.as_str(), self.name)
    }

    /// The six (hourly|daily) × (full|categories|clean) variants.
    pub fn canonical(clean_features: &[String]) -> Vec<Self> {
        let mut out = Vec::new();
        for granularity in [TargetGranularity::Hourly, TargetGranularity::Daily] {
            out.push(Self {
                name: "full".into(),
                granularity,
                filter: FeatureFilter::All,
            });
            out.push(Self {
                name: "categories".into(),
                granularity,
                filter: FeatureFilter::Categories(vec![
                    FeatureCategory::PhysicalActivity,
                    FeatureCategory::Sleep,
                    FeatureCategory::Health,
                ]),
            });
            out.push(Self {
                name: "clean".into(),
                granularity,
                filter: FeatureFilter::Features(clean_features.to_vec()),
            });
        }
        out
    }
}

/// Builds one dataset per variant from the per-granularity preprocessed
/// training datasets. Keys are `<granularity>_<name>`.
pub fn make_variants(
    datasets: &BTreeMap<TargetGranularity, Dataset>,
    specs: &[VariantSpec],
) -> Result<BTreeMap<String, Dataset>> {
    let mut out = BTreeMap::new();
    for spec in specs {
        let ds = datasets.get(&spec.granularity).ok_or(DataError::GranularityMismatch {
            variant: spec.name.clone(),
            expected: spec.granularity,
            found: None,
        })?;
        if let Some(g) = ds.granularity {
            if g != spec.granularity {
                return Err(DataError::GranularityMismatch {
                    variant: spec.name.clone(),
                    expected: spec.granularity,
                    found: Some(g),
                });
            }
        }
        let cols: Vec<usize> = match &spec.filter {
            FeatureFilter::All => ds
                .columns
                .iter()
                .enumerate()
                .filter(|(_, c)| !matches!(c.category, FeatureCategory::Demographics | FeatureCategory::Personality))
                .map(|(j, _)| j)
                .collect(),
            FeatureFilter::Categories(cats) => ds
                .columns
                .iter()
                .enumerate()
                .filter(|(_, c)| cats.contains(&c.category))
                .map(|(j, _)| j)
                .collect(),
            FeatureFilter::Features(names) => {
                let mut cols = Vec::new();
                for name in names {
                    let before = cols.len();
                    cols.extend(
                        ds.columns
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| &c.source == name || &c.name == name)
                            .map(|(j, _)| j),
                    );
                    if cols.len() == before {
                        return Err(DataError::UnknownFeature(name.clone()));
                    }
                }
                cols
            }
        };
        if cols.is_empty() {
            return Err(DataError::InvalidSpec(format!("variant `{}` selects no columns", spec.key())));
        }
        out.insert(spec.key(), ds.select_columns(&cols));
    }
    Ok(out)
}
