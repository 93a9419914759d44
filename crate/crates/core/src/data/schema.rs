use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    PhysicalActivity,
    Sleep,
    Health,
    MentalHealth,
    Demographics,
    Personality,
    Behavior,
    Other,
}

impl FeatureCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::PhysicalActivity => "physical_activity",
            Self::Sleep => "sleep",
            Self::Health => "health",
            Self::MentalHealth => "mental_health",
            Self::Demographics => "demographics",
            Self::Personality => "personality",
            Self::Behavior => "behavior",
            Self::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Ordinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NativeGranularity {
    SubHourly,
    Hourly,
    Daily,
    MultiDay,
    Weekly,
    Arbitrary,
    Entry,
}

/// Whether a feature is used to derive clusters or held out to interpret them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Training,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub category: FeatureCategory,
    pub kind: FeatureKind,
    pub native_granularity: NativeGranularity,
    /// Declared level set for categorical/ordinal kinds, in rank order for ordinals.
    #[serde(default)]
    pub levels: Vec<String>,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub description: Option<String>,
}

impl FeatureSchema {
    pub fn numeric(name: &str, category: FeatureCategory, granularity: NativeGranularity) -> Self {
        Self {
            name: name.to_string(),
            category,
            kind: FeatureKind::Numeric,
            native_granularity: granularity,
            levels: Vec::new(),
            role: Role::Training,
            description: None,
        }
    }

    pub fn with_levels(mut self, kind: FeatureKind, levels: &[&str]) -> Self {
        self.kind = kind;
        self.levels = levels.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn with_description(mut self, text: &str) -> Self {
        self.description = Some(text.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSchema>,
    pub entity_column: String,
    pub timestamp_column: String,
}

impl Schema {
    pub fn new(features: Vec<FeatureSchema>) -> Result<Self> {
        let schema = Self {
            features,
            entity_column: "id".into(),
            timestamp_column: "date".into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(DataError::InvalidSpec(format!("duplicate feature `{}`", f.name)));
            }
            if f.kind != FeatureKind::Numeric && f.levels.is_empty() {
                return Err(DataError::InvalidSpec(format!(
                    "feature `{}` is {:?} but declares no levels",
                    f.name, f.kind
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&FeatureSchema> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn names_with_role(&self, role: Role) -> Vec<String> {
        self.features
            .iter()
            .filter(|f| f.role == role)
            .map(|f| f.name.clone())
            .collect()
    }
}
