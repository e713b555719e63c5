//! Glue that runs the grounding pipeline for one argument against one
//! scene: annotate, rank, suppress, identify.

use crate::crf::CrfModel;
use crate::disambiguation::{identify_state, suppress_redundancy, AmbiguityOutcome, CandidateSet, Cutoffs};
use crate::embeddings::EmbeddingTable;
use crate::instruction::ArgumentPhrase;
use crate::scene::{annotate_scene, Scene};
use crate::similarity::{rank_captions, ClassWeights};

/// Everything the grounding stages share: the embedding table, the
/// semantic-class model, and the tuned parameters.
pub struct GroundingContext<'a> {
    pub embeddings: &'a EmbeddingTable,
    pub sem_model: &'a CrfModel,
    pub class_weights: ClassWeights,
    pub cutoffs: Cutoffs,
}

impl<'a> GroundingContext<'a> {
    pub fn new(
        embeddings: &'a EmbeddingTable,
        sem_model: &'a CrfModel,
        class_weights: ClassWeights,
        cutoffs: Cutoffs,
    ) -> Self {
        Self {
            embeddings,
            sem_model,
            class_weights,
            cutoffs,
        }
    }

    /// Labels raw text with the semantic model.
    pub fn label_phrase(&self, text: &str) -> ArgumentPhrase {
        ArgumentPhrase::from_text(text, self.sem_model)
    }

    /// Attaches semantic labels to every caption in place.
    pub fn annotate(&self, scene: &mut Scene) {
        annotate_scene(scene, self.sem_model);
    }

    /// Runs rank -> suppress -> identify for an argument over an already
    /// annotated scene.
    pub fn identify(
        &self,
        argument: &ArgumentPhrase,
        scene: &Scene,
    ) -> (CandidateSet, AmbiguityOutcome) {
        let ranked = rank_captions(argument, scene, self.embeddings, &self.class_weights);
        let candidates = suppress_redundancy(
            &ranked,
            argument,
            &self.cutoffs,
            self.embeddings,
            &self.class_weights,
        );
        let outcome = identify_state(&candidates);
        (candidates, outcome)
    }
}
