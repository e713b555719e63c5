//! The tuned-parameter file: four semantic class weights plus the alpha
//! and beta cutoffs, stored as plain `key=value` lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::disambiguation::Cutoffs;
use crate::similarity::ClassWeights;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read parameter file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parameter file line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("parameter file is missing key {0}")]
    MissingKey(&'static str),
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

/// Class weights and cutoffs produced by tuning and consumed by the
/// grounding pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub class_weights: ClassWeights,
    pub cutoffs: Cutoffs,
}

impl PipelineParams {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values: BTreeMap<String, f64> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: i + 1,
                reason: "expected key=value".to_string(),
            })?;
            let parsed: f64 = value.trim().parse().map_err(|_| ConfigError::BadLine {
                line: i + 1,
                reason: format!("unparsable number {value:?}"),
            })?;
            let key = key.trim().to_string();
            if ![
                "object",
                "attribute",
                "spatial_landmark",
                "other",
                "alpha",
                "beta",
            ]
            .contains(&key.as_str())
            {
                return Err(ConfigError::BadLine {
                    line: i + 1,
                    reason: format!("unknown key {key:?}"),
                });
            }
            values.insert(key, parsed);
        }
        let get = |key: &'static str| values.get(key).copied().ok_or(ConfigError::MissingKey(key));
        let class_weights = ClassWeights::new(
            get("object")?,
            get("attribute")?,
            get("spatial_landmark")?,
            get("other")?,
        )
        .map_err(ConfigError::Invalid)?;
        let cutoffs = Cutoffs::new(get("alpha")?, get("beta")?).map_err(ConfigError::Invalid)?;
        Ok(Self {
            class_weights,
            cutoffs,
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "object={}\nattribute={}\nspatial_landmark={}\nother={}\nalpha={}\nbeta={}\n",
            self.class_weights.object,
            self.class_weights.attribute,
            self.class_weights.spatial_landmark,
            self.class_weights.other,
            self.cutoffs.alpha,
            self.cutoffs.beta,
        )
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|source| ConfigError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), ConfigError> {
        fs::write(path.as_ref(), self.to_text()).map_err(|source| ConfigError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }
}
