use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl FeatureSpec {
    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            categories: Vec::new(),
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            categories: categories.iter().map(|c| c.to_string()).collect(),
        }
    }
}

fn default_positive() -> String {
    "1".to_string()
}

/// Declarative description of a CSV: which columns are features, how each is
/// encoded, and which label value is the favorable outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    #[serde(default)]
    pub name: String,
    pub features: Vec<FeatureSpec>,
    pub label: String,
    #[serde(default = "default_positive")]
    pub positive_label: String,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.features.is_empty() {
            return Err(DataError::Schema("no features".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            if f.name == self.label {
                return Err(DataError::Schema(format!("label `{}` is also a feature", f.name)));
            }
            match f.kind {
                FeatureKind::Categorical => {
                    if f.categories.len() < 2 {
                        return Err(DataError::Schema(format!(
                            "categorical feature `{}` needs at least two categories",
                            f.name
                        )));
                    }
                    let uniq: HashSet<_> = f.categories.iter().collect();
                    if uniq.len() != f.categories.len() {
                        return Err(DataError::Schema(format!("duplicate category in `{}`", f.name)));
                    }
                }
                FeatureKind::Continuous => {
                    if !f.categories.is_empty() {
                        return Err(DataError::Schema(format!(
                            "continuous feature `{}` lists categories",
                            f.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let schema: Self = serde_json::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Width of the encoded feature vector.
    pub fn encoded_dim(&self) -> usize {
        self.features
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Continuous => 1,
                FeatureKind::Categorical => f.categories.len(),
            })
            .sum()
    }
}
