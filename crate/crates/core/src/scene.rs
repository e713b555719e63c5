//! Captioned-scene ingestion and bounding-box geometry.
//!
//! Scenes arrive as JSON documents produced by an upstream dense-caption
//! generator: a top-level list of records, each with a `box` (x y w h in
//! pixels, origin top-left) and a `caption` string. Semantic labels are
//! attached later by the semantic-class model.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crf::{CrfModel, TokenRow};
use crate::instruction::tokenize;
use crate::similarity::SemanticClass;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scene file {path} is not a JSON list of records: {source}")]
    BadDocument {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("scene file {path}: record {index} is malformed: {reason}")]
    BadRecord {
        path: String,
        index: usize,
        reason: String,
    },
}

/// Axis-aligned pixel box with origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        assert!(w > 0.0 && h > 0.0, "box width and height must be positive");
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let x1 = a.x.max(b.x);
    let y1 = a.y.max(b.y);
    let x2 = (a.x + a.w).min(b.x + b.w);
    let y2 = (a.y + a.h).min(b.y + b.h);
    if x2 <= x1 || y2 <= y1 {
        return 0.0;
    }
    let intersection = (x2 - x1) * (y2 - y1);
    intersection / (a.area() + b.area() - intersection)
}

/// Smallest axis-aligned box containing both inputs (rectangular hull).
pub fn box_union(a: &BoundingBox, b: &BoundingBox) -> BoundingBox {
    let x = a.x.min(b.x);
    let y = a.y.min(b.y);
    let x2 = (a.x + a.w).max(b.x + b.w);
    let y2 = (a.y + a.h).max(b.y + b.h);
    BoundingBox::new(x, y, x2 - x, y2 - y)
}

/// One dense caption with its region. `semantic_labels` stays empty until
/// [`annotate_scene`] runs the semantic-class model over the tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneCaption {
    pub bbox: BoundingBox,
    pub text: String,
    pub tokens: Vec<TokenRow>,
    pub semantic_labels: Vec<SemanticClass>,
    pub object_tokens: Vec<String>,
    pub attribute_tokens: Vec<String>,
    pub landmark_tokens: Vec<String>,
    pub relevance: Option<f64>,
}

impl SceneCaption {
    pub fn new(bbox: BoundingBox, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self {
            bbox,
            text,
            tokens,
            semantic_labels: Vec::new(),
            object_tokens: Vec::new(),
            attribute_tokens: Vec::new(),
            landmark_tokens: Vec::new(),
            relevance: None,
        }
    }

    /// Attaches semantic labels, refreshing the derived token lists.
    pub fn set_labels(&mut self, labels: Vec<SemanticClass>) {
        assert_eq!(
            labels.len(),
            self.tokens.len(),
            "labels must align with tokens"
        );
        self.object_tokens.clear();
        self.attribute_tokens.clear();
        self.landmark_tokens.clear();
        for (row, label) in self.tokens.iter().zip(&labels) {
            let word = row.surface.to_lowercase();
            match label {
                SemanticClass::Object => self.object_tokens.push(word),
                SemanticClass::Attribute => self.attribute_tokens.push(word),
                SemanticClass::SpatialLandmark => self.landmark_tokens.push(word),
                SemanticClass::Other => {}
            }
        }
        self.semantic_labels = labels;
    }

    /// Lowercased object tokens joined by a space, the key used for
    /// candidate matching.
    pub fn object_key(&self) -> String {
        self.object_tokens.join(" ")
    }

    pub fn is_parsed(&self) -> bool {
        self.semantic_labels.len() == self.tokens.len() && !self.tokens.is_empty()
    }
}

/// All captions from one ego-view. May be empty (an empty room is valid).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub captions: Vec<SceneCaption>,
    pub source_id: String,
    /// Records dropped at load time for violating box invariants.
    pub rejected_records: usize,
}

#[derive(Deserialize, Serialize)]
struct RawRecord {
    #[serde(rename = "box")]
    bbox: Vec<f64>,
    caption: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

/// Loads a scene document. A structurally malformed record is fatal and
/// names the record index; a record with nonpositive width or height is
/// rejected with a warning count and the rest of the scene is kept.
pub fn load_scene<P: AsRef<Path>>(path: P) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: display.clone(),
        source,
    })?;
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| display.clone());
    parse_scene(&text, &display, source_id)
}

pub fn parse_scene(text: &str, path: &str, source_id: String) -> Result<Scene, SceneError> {
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|source| SceneError::BadDocument {
            path: path.to_string(),
            source,
        })?;
    let mut scene = Scene {
        captions: Vec::with_capacity(values.len()),
        source_id,
        rejected_records: 0,
    };
    for (index, value) in values.into_iter().enumerate() {
        let record: RawRecord =
            serde_json::from_value(value).map_err(|e| SceneError::BadRecord {
                path: path.to_string(),
                index,
                reason: e.to_string(),
            })?;
        if record.bbox.len() != 4 {
            return Err(SceneError::BadRecord {
                path: path.to_string(),
                index,
                reason: format!("box needs 4 numbers, found {}", record.bbox.len()),
            });
        }
        let (x, y, w, h) = (record.bbox[0], record.bbox[1], record.bbox[2], record.bbox[3]);
        if w <= 0.0 || h <= 0.0 || !w.is_finite() || !h.is_finite() {
            scene.rejected_records += 1;
            continue;
        }
        scene
            .captions
            .push(SceneCaption::new(BoundingBox::new(x, y, w, h), record.caption));
    }
    Ok(scene)
}

/// Serializes captions back to the on-disk record format.
pub fn scene_to_json(captions: &[(BoundingBox, String)]) -> String {
    let records: Vec<RawRecord> = captions
        .iter()
        .map(|(bbox, caption)| RawRecord {
            bbox: vec![bbox.x, bbox.y, bbox.w, bbox.h],
            caption: caption.clone(),
            confidence: None,
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("records serialize cleanly")
}

/// Runs the semantic-class model over every caption in place.
pub fn annotate_scene(scene: &mut Scene, sem_model: &CrfModel) {
    for caption in &mut scene.captions {
        if caption.tokens.is_empty() {
            caption.semantic_labels = Vec::new();
            continue;
        }
        let labels = sem_model
            .viterbi(&caption.tokens)
            .iter()
            .map(|l| SemanticClass::from_label(l).unwrap_or(SemanticClass::Other))
            .collect();
        caption.set_labels(labels);
    }
}
