//! Caption pruning, redundancy suppression with attribute merging, and
//! classification of the grounding situation into one of seven states.
//!
//! Suppression is greedy over the relevance ranking: the top unconsumed
//! caption becomes a kept candidate and absorbs lower captions that
//! overlap it (IoU above beta) and resemble it (mutual relevance above
//! alpha). An absorbed caption naming the same object merges its novel
//! attribute tokens and widens the kept box; one naming a different
//! object is plain box redundancy and is dropped. Passes repeat until no
//! consumption happens, so the output is a fixpoint.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::embeddings::EmbeddingTable;
use crate::instruction::ArgumentPhrase;
use crate::scene::{box_union, iou, SceneCaption};
use crate::similarity::{caption_relevance, encode_phrase, ClassWeights, SemanticClass};

/// Relevance and IoU cutoffs, both strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoffs {
    pub alpha: f64,
    pub beta: f64,
}

impl Cutoffs {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, String> {
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(format!("alpha must lie strictly in (0,1), got {alpha}"));
        }
        if !(0.0 < beta && beta < 1.0) {
            return Err(format!("beta must lie strictly in (0,1), got {beta}"));
        }
        Ok(Self { alpha, beta })
    }
}

/// The seven grounding situations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AmbiguityState {
    /// All the information is available; no question needed.
    Nq,
    /// Multiple matching objects, no attribute mentioned in the instruction.
    Aa,
    /// Unique object with an attribute, none mentioned in the instruction.
    Ima,
    /// Unique object whose attribute contradicts the instruction.
    Am,
    /// Unique object without attributes, but the instruction names one.
    Anf,
    /// Multiple matching objects with identical or no attributes.
    Aoa,
    /// The object cannot be found.
    Nf,
}

impl AmbiguityState {
    pub const ALL: [AmbiguityState; 7] = [
        AmbiguityState::Nq,
        AmbiguityState::Aa,
        AmbiguityState::Ima,
        AmbiguityState::Am,
        AmbiguityState::Anf,
        AmbiguityState::Aoa,
        AmbiguityState::Nf,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            AmbiguityState::Nq => "NQ",
            AmbiguityState::Aa => "AA",
            AmbiguityState::Ima => "IMA",
            AmbiguityState::Am => "AM",
            AmbiguityState::Anf => "ANF",
            AmbiguityState::Aoa => "AOA",
            AmbiguityState::Nf => "NF",
        }
    }
}

impl fmt::Display for AmbiguityState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AmbiguityState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|state| state.code().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| format!("unknown ambiguity state {s:?}"))
    }
}

/// Relevance-ranked, redundancy-suppressed captions for one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<SceneCaption>,
    pub argument: ArgumentPhrase,
}

/// A classified grounding situation plus the slot values its question
/// template needs.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityOutcome {
    pub state: AmbiguityState,
    pub matched_candidates: Vec<SceneCaption>,
    pub slot_values: std::collections::BTreeMap<String, String>,
}

fn merge_attributes(kept: &mut SceneCaption, absorbed: &SceneCaption) {
    for token in &absorbed.attribute_tokens {
        if !kept.attribute_tokens.contains(token) {
            kept.attribute_tokens.push(token.clone());
            kept.tokens.push(crate::crf::TokenRow::new(token.clone()));
            kept.semantic_labels.push(SemanticClass::Attribute);
        }
    }
}

/// Prunes captions below the relevance cutoff, then greedily suppresses
/// object and caption redundancy. Input must be sorted by relevance
/// descending; captions without a stored relevance get one computed here.
pub fn suppress_redundancy(
    ranked: &[SceneCaption],
    argument: &ArgumentPhrase,
    cutoffs: &Cutoffs,
    table: &EmbeddingTable,
    weights: &ClassWeights,
) -> CandidateSet {
    let argument_vector = encode_phrase(
        &argument.tokens,
        &argument.semantic_labels,
        table,
        weights,
    );
    let mut survivors: Vec<SceneCaption> = ranked
        .iter()
        .filter(|caption| {
            let relevance = caption.relevance.unwrap_or_else(|| {
                let vc = encode_phrase(
                    &caption.tokens,
                    &caption.semantic_labels,
                    table,
                    weights,
                );
                crate::embeddings::cosine(&argument_vector, &vc)
            });
            relevance > cutoffs.alpha
        })
        .cloned()
        .collect();

    loop {
        let mut changed = false;
        let mut kept: Vec<SceneCaption> = Vec::with_capacity(survivors.len());
        let mut remaining = survivors;
        while !remaining.is_empty() {
            let mut candidate = remaining.remove(0);
            let mut scan = true;
            while scan {
                scan = false;
                let mut index = 0;
                while index < remaining.len() {
                    let lower = &remaining[index];
                    let overlaps = iou(&candidate.bbox, &lower.bbox) > cutoffs.beta;
                    let similar = overlaps
                        && caption_relevance(&candidate, lower, table, weights) > cutoffs.alpha;
                    if overlaps && similar {
                        let absorbed = remaining.remove(index);
                        if absorbed.object_key() == candidate.object_key() {
                            merge_attributes(&mut candidate, &absorbed);
                            candidate.bbox = box_union(&candidate.bbox, &absorbed.bbox);
                            // The widened box may now reach captions already
                            // scanned past, so rescan for this candidate.
                            scan = true;
                        }
                        changed = true;
                    } else {
                        index += 1;
                    }
                }
            }
            kept.push(candidate);
        }
        survivors = kept;
        if !changed {
            break;
        }
    }

    CandidateSet {
        candidates: survivors,
        argument: argument.clone(),
    }
}

fn attribute_set(caption: &SceneCaption) -> BTreeSet<String> {
    caption.attribute_tokens.iter().cloned().collect()
}

fn distinct_nonempty_attribute_sets(candidates: &[&SceneCaption]) -> Vec<BTreeSet<String>> {
    let mut sets: Vec<BTreeSet<String>> = Vec::new();
    for candidate in candidates {
        let set = attribute_set(candidate);
        if !set.is_empty() && !sets.contains(&set) {
            sets.push(set);
        }
    }
    sets
}

fn join_set(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(" ")
}

/// Classifies the grounding situation. `M` is the set of candidates whose
/// object tokens match the argument's (joined, case-insensitive); the
/// decision then follows the attribute comparison rules per state.
pub fn identify_state(candidates: &CandidateSet) -> AmbiguityOutcome {
    let argument = &candidates.argument;
    let argument_key = argument.object_key();
    let argument_attrs: BTreeSet<String> = argument.attribute_tokens.iter().cloned().collect();

    let matched: Vec<&SceneCaption> = candidates
        .candidates
        .iter()
        .filter(|c| c.object_key() == argument_key)
        .collect();

    let mut slots = std::collections::BTreeMap::new();
    let object_slot = if argument.object_tokens.is_empty() {
        argument
            .tokens
            .iter()
            .map(|t| t.surface.to_lowercase())
            .collect::<Vec<_>>()
            .join(" ")
    } else {
        argument_key.clone()
    };
    slots.insert("object".to_string(), object_slot);

    let outcome = |state: AmbiguityState,
                   matched: Vec<&SceneCaption>,
                   slots: std::collections::BTreeMap<String, String>| {
        AmbiguityOutcome {
            state,
            matched_candidates: matched.into_iter().cloned().collect(),
            slot_values: slots,
        }
    };

    if matched.is_empty() {
        slots.insert(
            "attribute".to_string(),
            argument.attribute_tokens.join(" "),
        );
        return outcome(AmbiguityState::Nf, matched, slots);
    }

    if matched.len() == 1 {
        let candidate_attrs = attribute_set(matched[0]);
        if !argument_attrs.is_empty() {
            if candidate_attrs.is_empty() {
                slots.insert(
                    "attribute".to_string(),
                    argument.attribute_tokens.join(" "),
                );
                return outcome(AmbiguityState::Anf, matched, slots);
            }
            if argument_attrs.is_subset(&candidate_attrs) {
                return outcome(AmbiguityState::Nq, matched, slots);
            }
            slots.insert("attribute".to_string(), join_set(&candidate_attrs));
            return outcome(AmbiguityState::Am, matched, slots);
        }
        if candidate_attrs.is_empty() {
            return outcome(AmbiguityState::Nq, matched, slots);
        }
        slots.insert("attribute".to_string(), join_set(&candidate_attrs));
        return outcome(AmbiguityState::Ima, matched, slots);
    }

    // Multiple matching candidates.
    let aoa_slots = |matched: &[&SceneCaption],
                     mut slots: std::collections::BTreeMap<String, String>| {
        slots.insert("#num".to_string(), matched.len().to_string());
        let attribute = if !argument_attrs.is_empty() {
            argument.attribute_tokens.join(" ")
        } else {
            let distinct = distinct_nonempty_attribute_sets(matched);
            if distinct.len() == 1 {
                join_set(&distinct[0])
            } else {
                String::new()
            }
        };
        slots.insert("attribute".to_string(), attribute);
        slots
    };
    let aa_slots = |matched: &[&SceneCaption],
                    mut slots: std::collections::BTreeMap<String, String>| {
        let distinct = distinct_nonempty_attribute_sets(matched);
        slots.insert("attribute-1".to_string(), join_set(&distinct[0]));
        slots.insert("attribute-2".to_string(), join_set(&distinct[1]));
        slots
    };

    if argument_attrs.is_empty() {
        let distinct = distinct_nonempty_attribute_sets(&matched);
        if distinct.len() >= 2 {
            let slots = aa_slots(&matched, slots);
            return outcome(AmbiguityState::Aa, matched, slots);
        }
        let slots = aoa_slots(&matched, slots);
        return outcome(AmbiguityState::Aoa, matched, slots);
    }

    let exact: Vec<&SceneCaption> = matched
        .iter()
        .filter(|c| argument_attrs.is_subset(&attribute_set(c)))
        .copied()
        .collect();
    match exact.len() {
        1 => outcome(AmbiguityState::Nq, exact, slots),
        n if n >= 2 => {
            let slots = aoa_slots(&exact, slots);
            outcome(AmbiguityState::Aoa, exact, slots)
        }
        _ => {
            let distinct = distinct_nonempty_attribute_sets(&matched);
            if distinct.len() >= 2 {
                let slots = aa_slots(&matched, slots);
                outcome(AmbiguityState::Aa, matched, slots)
            } else {
                let slots = aoa_slots(&matched, slots);
                outcome(AmbiguityState::Aoa, matched, slots)
            }
        }
    }
}
