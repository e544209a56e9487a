use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub components: usize,
}

/// Shape and wiring of one network instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub areas: usize,
    pub channels: usize,
    pub hidden: usize,
    pub features: Vec<FeatureSpec>,
    pub closeness: usize,
    pub period: usize,
    pub trend: usize,
    pub use_proximity: bool,
    pub use_identity: bool,
    /// Feed windows oldest to newest. `false` keeps the newest-first order.
    pub chronological: bool,
    /// `false` drops the sentinel and uses a plain row softmax.
    pub sentinel: bool,
}

impl ModelConfig {
    pub fn new(areas: usize, channels: usize, hidden: usize, features: Vec<FeatureSpec>) -> Self {
        Self {
            areas,
            channels,
            hidden,
            features,
            closeness: 6,
            period: 7,
            trend: 3,
            use_proximity: true,
            use_identity: true,
            chronological: true,
            sentinel: true,
        }
    }

    pub fn graph_count(&self) -> usize {
        self.use_identity as usize + self.use_proximity as usize + self.features.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.areas == 0 {
            errs.push("model.areas must be ≥ 1".to_string());
        }
        if self.channels == 0 {
            errs.push("model.channels must be ≥ 1".to_string());
        }
        if self.hidden == 0 {
            errs.push("model.hidden must be ≥ 1".to_string());
        }
        if self.graph_count() == 0 {
            errs.push(
                "at least one graph is required (identity, proximity or a feature)".to_string(),
            );
        }
        if self.closeness == 0 || self.period == 0 || self.trend == 0 {
            errs.push("window lengths must be ≥ 1".to_string());
        }
        for (i, f) in self.features.iter().enumerate() {
            if f.components == 0 {
                errs.push(format!("feature {} has no components", f.name));
            }
            if f.name.is_empty() || f.name.contains(['.', ' ', ',']) {
                errs.push(format!(
                    "feature name {:?} must be non-empty without '.', ',' or spaces",
                    f.name
                ));
            }
            if self.features[..i].iter().any(|g| g.name == f.name) {
                errs.push(format!("feature {} listed twice", f.name));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
