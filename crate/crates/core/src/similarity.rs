//! Semantic-class-weighted phrase embedding and the relevance function
//! used to rank scene captions against an argument phrase.
//!
//! A phrase is encoded as a convex combination of its token embeddings:
//! each token's raw weight is its semantic class weight, raw weights are
//! normalized to sum to one, and out-of-vocabulary tokens are skipped
//! before normalization so the remaining weights stay convex.

use std::fmt;
use std::str::FromStr;

use crate::crf::TokenRow;
use crate::embeddings::{cosine, EmbeddingTable, PhraseVector};
use crate::instruction::ArgumentPhrase;
use crate::scene::{Scene, SceneCaption};

/// The semantic-class alphabet for tokens in arguments and captions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SemanticClass {
    Object,
    Attribute,
    SpatialLandmark,
    Other,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 4] = [
        SemanticClass::Object,
        SemanticClass::Attribute,
        SemanticClass::SpatialLandmark,
        SemanticClass::Other,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SemanticClass::Object => "object",
            SemanticClass::Attribute => "attribute",
            SemanticClass::SpatialLandmark => "spatial_landmark",
            SemanticClass::Other => "other",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.iter().find(|c| c.label() == label).copied()
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SemanticClass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_label(s).ok_or(())
    }
}

pub fn semantic_alphabet() -> Vec<String> {
    SemanticClass::ALL
        .iter()
        .map(|c| c.label().to_string())
        .collect()
}

/// Interpolation weights per semantic class. All four classes are always
/// present; weights are nonnegative with at least one positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub object: f64,
    pub attribute: f64,
    pub spatial_landmark: f64,
    pub other: f64,
}

impl ClassWeights {
    pub fn new(
        object: f64,
        attribute: f64,
        spatial_landmark: f64,
        other: f64,
    ) -> Result<Self, String> {
        let weights = Self {
            object,
            attribute,
            spatial_landmark,
            other,
        };
        if SemanticClass::ALL.iter().any(|c| weights.get(*c) < 0.0) {
            return Err("class weights must be nonnegative".to_string());
        }
        if SemanticClass::ALL.iter().all(|c| weights.get(*c) == 0.0) {
            return Err("at least one class weight must be positive".to_string());
        }
        Ok(weights)
    }

    pub fn get(&self, class: SemanticClass) -> f64 {
        match class {
            SemanticClass::Object => self.object,
            SemanticClass::Attribute => self.attribute,
            SemanticClass::SpatialLandmark => self.spatial_landmark,
            SemanticClass::Other => self.other,
        }
    }
}

/// Encodes a labeled token sequence as the class-weighted convex
/// combination of its token embeddings. Tokens without an embedding or
/// with a zero class weight are skipped; if everything is skipped the
/// result is the zero vector with coverage 0.
pub fn encode_phrase(
    tokens: &[TokenRow],
    labels: &[SemanticClass],
    table: &EmbeddingTable,
    weights: &ClassWeights,
) -> PhraseVector {
    assert_eq!(tokens.len(), labels.len(), "tokens and labels must align");
    let mut contributions: Vec<(f64, &[f32])> = Vec::with_capacity(tokens.len());
    let mut total_weight = 0.0;
    for (row, label) in tokens.iter().zip(labels) {
        let weight = weights.get(*label);
        if weight <= 0.0 {
            continue;
        }
        if let Some(vector) = table.lookup(&row.surface) {
            contributions.push((weight, vector));
            total_weight += weight;
        }
    }
    if contributions.is_empty() {
        return PhraseVector::zeros(table.dimension());
    }
    let mut components = vec![0.0f64; table.dimension()];
    for (weight, vector) in &contributions {
        let normalized = weight / total_weight;
        for (acc, &v) in components.iter_mut().zip(*vector) {
            *acc += normalized * f64::from(v);
        }
    }
    PhraseVector::from_components(
        components.into_iter().map(|v| v as f32).collect(),
        contributions.len(),
    )
}

/// Relevance of a caption to an argument: cosine of their encodings.
pub fn relevance(
    argument: &ArgumentPhrase,
    caption: &SceneCaption,
    table: &EmbeddingTable,
    weights: &ClassWeights,
) -> f64 {
    let va = encode_phrase(&argument.tokens, &argument.semantic_labels, table, weights);
    let vc = encode_phrase(&caption.tokens, &caption.semantic_labels, table, weights);
    cosine(&va, &vc)
}

/// Mutual relevance between two captions, used by redundancy suppression.
pub fn caption_relevance(
    a: &SceneCaption,
    b: &SceneCaption,
    table: &EmbeddingTable,
    weights: &ClassWeights,
) -> f64 {
    let va = encode_phrase(&a.tokens, &a.semantic_labels, table, weights);
    let vb = encode_phrase(&b.tokens, &b.semantic_labels, table, weights);
    cosine(&va, &vb)
}

/// Returns the scene captions sorted by relevance to the argument,
/// descending, with the relevance field populated. The sort is stable so
/// ties keep their original scene order.
pub fn rank_captions(
    argument: &ArgumentPhrase,
    scene: &Scene,
    table: &EmbeddingTable,
    weights: &ClassWeights,
) -> Vec<SceneCaption> {
    let va = encode_phrase(&argument.tokens, &argument.semantic_labels, table, weights);
    let mut ranked: Vec<SceneCaption> = scene
        .captions
        .iter()
        .map(|caption| {
            let vc = encode_phrase(&caption.tokens, &caption.semantic_labels, table, weights);
            let mut scored = caption.clone();
            scored.relevance = Some(cosine(&va, &vc));
            scored
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.relevance
            .unwrap_or(0.0)
            .partial_cmp(&a.relevance.unwrap_or(0.0))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    ranked
}
