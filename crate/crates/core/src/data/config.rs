//! The declarative pipeline file: schema, per-feature preprocessing and the
//! variant list in one TOML document. Keys are the snake_case enum names.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Aggregation, DataError, Encoding, FeatureCategory, FeatureFilter, FeatureKind, FeatureSchema, FeatureSpec,
    GranularityFill, MissingPolicy, NativeGranularity, Normalization, PreprocessSpec, Result, Role, Schema,
    TargetGranularity, VariantSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub name: String,
    pub category: FeatureCategory,
    pub kind: FeatureKind,
    pub native_granularity: NativeGranularity,
    #[serde(default)]
    pub role: Role,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub granularity_fill: GranularityFill,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    #[serde(default)]
    pub encoding: Encoding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantEntry {
    pub name: String,
    pub granularity: TargetGranularity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<FeatureCategory>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
}

fn default_entity() -> String {
    "id".into()
}

fn default_timestamp() -> String {
    "date".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_entity")]
    pub entity_column: String,
    #[serde(default = "default_timestamp")]
    pub timestamp_column: String,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub target_granularity: TargetGranularity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca_variance: Option<f64>,
    pub features: Vec<FeatureEntry>,
    #[serde(default)]
    pub variants: Vec<VariantEntry>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.schema()?;
        cfg.preprocess_spec()?;
        cfg.variant_specs()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(DataError::MissingFile(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("pipeline config serializes")
    }

    pub fn schema(&self) -> Result<Schema> {
        let features = self
            .features
            .iter()
            .map(|e| FeatureSchema {
                name: e.name.clone(),
                category: e.category,
                kind: e.kind,
                native_granularity: e.native_granularity,
                levels: e.levels.clone(),
                role: e.role,
                description: e.description.clone(),
            })
            .collect();
        let mut schema = Schema::new(features)?;
        schema.entity_column = self.entity_column.clone();
        schema.timestamp_column = self.timestamp_column.clone();
        Ok(schema)
    }

    pub fn preprocess_spec(&self) -> Result<PreprocessSpec> {
        let spec = PreprocessSpec {
            features: self
                .features
                .iter()
                .map(|e| {
                    (
                        e.name.clone(),
                        FeatureSpec {
                            aggregation: e.aggregation,
                            granularity_fill: e.granularity_fill,
                            missing_policy: e.missing_policy,
                            encoding: e.encoding,
                        },
                    )
                })
                .collect(),
            target_granularity: self.target_granularity,
            normalization: self.normalization,
            pca_variance: self.pca_variance,
        };
        spec.validate(&self.schema()?)?;
        Ok(spec)
    }

    pub fn variant_specs(&self) -> Result<Vec<VariantSpec>> {
        self.variants
            .iter()
            .map(|v| {
                let filter = match (&v.categories, &v.features) {
                    (None, None) => FeatureFilter::All,
                    (Some(c), None) => FeatureFilter::Categories(c.clone()),
                    (None, Some(f)) => FeatureFilter::Features(f.clone()),
                    (Some(_), Some(_)) => {
                        return Err(DataError::InvalidSpec(format!(
                            "variant `{}` sets both categories and features",
                            v.name
                        )))
                    }
                };
                Ok(VariantSpec {
                    name: v.name.clone(),
                    granularity: v.granularity,
                    filter,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
normalization = "minmax"

[[features]]
name = "steps"
category = "physical_activity"
kind = "numeric"
native_granularity = "sub_hourly"
aggregation = "sum"
missing_policy = "zero"

[[features]]
name = "place"
category = "other"
kind = "categorical"
native_granularity = "arbitrary"
levels = ["home", "work"]
aggregation = "last"
granularity_fill = "backward"
missing_policy = "mode"
encoding = "one_hot"

[[variants]]
name = "categories"
granularity = "hourly"
categories = ["physical_activity"]
"#;

    #[test]
    fn parses_sample_config() {
        let cfg = PipelineConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.normalization, Normalization::Minmax);
        let spec = cfg.preprocess_spec().unwrap();
        assert_eq!(spec.features["steps"].aggregation, Aggregation::Sum);
        assert_eq!(spec.features["place"].encoding, Encoding::OneHot);
        let variants = cfg.variant_specs().unwrap();
        assert_eq!(variants[0].filter, FeatureFilter::Categories(vec![FeatureCategory::PhysicalActivity]));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = PipelineConfig::from_toml_str(SAMPLE).unwrap();
        let again = PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn one_hot_on_numeric_rejected() {
        let bad = SAMPLE.replacen("missing_policy = \"zero\"", "missing_policy = \"zero\"\nencoding = \"one_hot\"", 1);
        assert!(matches!(PipelineConfig::from_toml_str(&bad), Err(DataError::InvalidSpec(_))));
    }
}
