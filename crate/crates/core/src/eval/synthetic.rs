//! Desk-scale synthetic corpora: labeled description sequences for the
//! three CRFs, captioned scenes with instructions and by-construction gold
//! states, and a deterministic word-vector table covering the lexicon.
//!
//! Scenes place object instances on disjoint grid anchors; redundant
//! captions jitter around their anchor so they overlap it well above the
//! IoU cutoff and merge during suppression, which mirrors how dense
//! caption proposals cluster on real objects.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineParams;
use crate::crf::{LabeledSequence, TokenRow};
use crate::disambiguation::{AmbiguityState, Cutoffs};
use crate::embeddings::EmbeddingTable;
use crate::instruction::{tokenize, ArgumentPhrase};
use crate::scene::{BoundingBox, Scene, SceneCaption};
use crate::similarity::{ClassWeights, SemanticClass};

use super::{StateDataset, StateExample};

pub const OBJECTS: [&str; 14] = [
    "cup", "mug", "bottle", "lamp", "pillow", "book", "plate", "bowl", "vase", "towel", "chair",
    "clock", "fan", "heater",
];
pub const ATTRIBUTES: [&str; 12] = [
    "red", "blue", "green", "white", "black", "yellow", "small", "large", "wooden", "plastic",
    "metal", "coffee",
];
pub const LANDMARKS: [&str; 8] = [
    "kitchen", "shelf", "counter", "window", "wall", "corner", "sink", "door",
];
/// Words that are landmarks after a preposition and objects otherwise.
pub const DUALS: [&str; 2] = ["table", "desk"];
pub const PREPOSITIONS: [&str; 4] = ["on", "in", "near", "by"];
const STATE_WORDS: [&str; 6] = ["on", "off", "open", "closed", "clean", "empty"];
const FILLERS: [&str; 18] = [
    "a", "an", "the", "it", "is", "if", "me", "one", "for", "to", "from", "up", "any", "them",
    "of", "please", "and", "there",
];
const VERBS: [&str; 14] = [
    "take", "grab", "pick", "bring", "fetch", "turn", "switch", "check", "go", "move", "put",
    "place", "look", "find",
];

/// Every word the synthetic world can emit, lowercased.
pub fn lexicon_words() -> Vec<&'static str> {
    let mut words: Vec<&'static str> = Vec::new();
    for list in [
        &OBJECTS[..],
        &ATTRIBUTES[..],
        &LANDMARKS[..],
        &DUALS[..],
        &PREPOSITIONS[..],
        &STATE_WORDS[..],
        &FILLERS[..],
        &VERBS[..],
    ] {
        for &word in list {
            if !words.contains(&word) {
                words.push(word);
            }
        }
    }
    words
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Deterministic unit vector for one word.
pub fn word_vector(word: &str, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        fnv1a64(word.to_lowercase().as_bytes()) ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15),
    );
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    for x in &mut v {
        *x /= norm;
    }
    v.into_iter().map(|x| x as f32).collect()
}

/// Word-vector table covering the whole synthetic lexicon.
pub fn synthetic_embeddings(dim: usize, seed: u64) -> EmbeddingTable {
    let mut table = EmbeddingTable::new(dim).expect("positive dimension");
    for word in lexicon_words() {
        table.insert(word, word_vector(word, dim, seed));
    }
    table
}

/// The same table in the on-disk text format.
pub fn embeddings_file_text(dim: usize, seed: u64) -> String {
    let mut out = String::new();
    for word in lexicon_words() {
        out.push_str(word);
        for value in word_vector(word, dim, seed) {
            out.push(' ');
            out.push_str(&value.to_string());
        }
        out.push('\n');
    }
    out
}

/// Reference parameters the synthetic scenes are constructed against.
pub fn reference_params() -> PipelineParams {
    PipelineParams {
        class_weights: ClassWeights::new(0.6, 0.3, 0.05, 0.05).expect("valid weights"),
        cutoffs: Cutoffs::new(0.35, 0.5).expect("valid cutoffs"),
    }
}

/// Lexicon-derived semantic labels; dual words resolve to landmark when a
/// preposition appears within the two preceding tokens.
pub fn oracle_semantic_labels(rows: &[TokenRow]) -> Vec<SemanticClass> {
    let words: Vec<String> = rows.iter().map(|r| r.surface.to_lowercase()).collect();
    words
        .iter()
        .enumerate()
        .map(|(i, word)| {
            if OBJECTS.contains(&word.as_str()) {
                SemanticClass::Object
            } else if ATTRIBUTES.contains(&word.as_str()) {
                SemanticClass::Attribute
            } else if LANDMARKS.contains(&word.as_str()) {
                SemanticClass::SpatialLandmark
            } else if DUALS.contains(&word.as_str()) {
                let from = i.saturating_sub(2);
                if words[from..i]
                    .iter()
                    .any(|w| PREPOSITIONS.contains(&w.as_str()))
                {
                    SemanticClass::SpatialLandmark
                } else {
                    SemanticClass::Object
                }
            } else {
                SemanticClass::Other
            }
        })
        .collect()
}

/// Labels every caption with the oracle labeler.
pub fn oracle_annotate(scene: &mut Scene) {
    for caption in &mut scene.captions {
        let labels = oracle_semantic_labels(&caption.tokens);
        caption.set_labels(labels);
    }
}

/// Extracts the object argument from a synthetic instruction with oracle
/// labels: the span from the first to the last object/attribute token.
pub fn oracle_argument(instruction: &str) -> ArgumentPhrase {
    let rows = tokenize(instruction);
    let labels = oracle_semantic_labels(&rows);
    let content: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, SemanticClass::Object | SemanticClass::Attribute))
        .map(|(i, _)| i)
        .collect();
    match (content.first(), content.last()) {
        (Some(&first), Some(&last)) => ArgumentPhrase::new(
            rows[first..=last].to_vec(),
            labels[first..=last].to_vec(),
        ),
        _ => ArgumentPhrase::new(Vec::new(), Vec::new()),
    }
}

/// Everything one seed produces: description sequences for the semantic
/// CRF, instruction sequences for the task and argument CRFs, and the
/// scene/instruction/state dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub semantic: Vec<LabeledSequence>,
    pub task: Vec<LabeledSequence>,
    pub argument: Vec<LabeledSequence>,
    pub dataset: StateDataset,
}

fn sequence(words: &[&str], labels: &[&str]) -> LabeledSequence {
    LabeledSequence::new(
        TokenRow::words(words),
        labels.iter().map(|l| l.to_string()).collect(),
    )
}

fn pick<'a>(rng: &mut ChaCha8Rng, list: &[&'a str]) -> &'a str {
    list[rng.gen_range(0..list.len())]
}

fn pick_other<'a>(rng: &mut ChaCha8Rng, list: &[&'a str], not: &[&str]) -> &'a str {
    loop {
        let word = pick(rng, list);
        if !not.contains(&word) {
            return word;
        }
    }
}

fn semantic_sequence(rng: &mut ChaCha8Rng) -> LabeledSequence {
    let obj = pick(rng, &OBJECTS);
    let attr = pick(rng, &ATTRIBUTES);
    let attr2 = pick_other(rng, &ATTRIBUTES, &[attr]);
    let lmk = pick(rng, &LANDMARKS);
    let dual = pick(rng, &DUALS);
    let prep = pick(rng, &PREPOSITIONS);
    let art = if rng.gen_bool(0.5) { "a" } else { "the" };
    match rng.gen_range(0..11) {
        0 => sequence(&[art, attr, obj], &["other", "attribute", "object"]),
        1 => sequence(
            &["the", attr, obj],
            &["other", "attribute", "object"],
        ),
        2 => sequence(
            &[art, obj, prep, "the", lmk],
            &["other", "object", "other", "other", "spatial_landmark"],
        ),
        3 => sequence(
            &[art, attr, obj, prep, "the", lmk],
            &[
                "other",
                "attribute",
                "object",
                "other",
                "other",
                "spatial_landmark",
            ],
        ),
        4 => sequence(
            &["the", attr, attr2, obj],
            &["other", "attribute", "attribute", "object"],
        ),
        5 => sequence(&[art, obj], &["other", "object"]),
        6 => sequence(&["the", attr, dual], &["other", "attribute", "object"]),
        7 => sequence(
            &[art, obj, prep, "the", dual],
            &["other", "object", "other", "other", "spatial_landmark"],
        ),
        8 => sequence(&["the", attr, "one"], &["other", "attribute", "other"]),
        9 => sequence(
            &["the", "one", prep, "the", lmk],
            &["other", "other", "other", "other", "spatial_landmark"],
        ),
        _ => sequence(
            &[art, attr, obj, "in", "the", lmk],
            &[
                "other",
                "attribute",
                "object",
                "other",
                "other",
                "spatial_landmark",
            ],
        ),
    }
}

/// One instruction with parallel task and argument labelings.
fn instruction_pair(
    rng: &mut ChaCha8Rng,
    task_type_index: usize,
) -> (LabeledSequence, LabeledSequence) {
    let obj = pick(rng, &OBJECTS);
    let attr = pick(rng, &ATTRIBUTES);
    let lmk = pick(rng, &LANDMARKS);
    let with_attr = rng.gen_bool(0.5);
    let object_span: Vec<&str> = if with_attr {
        vec!["the", attr, obj]
    } else {
        vec!["the", obj]
    };
    let obj_labels = |n: usize| vec!["object"; n];

    let build = |words: Vec<&str>, task_labels: Vec<&str>, arg_labels: Vec<&str>| {
        let mut cap_words: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        if let Some(first) = cap_words.first_mut() {
            let mut chars = first.chars();
            if let Some(c) = chars.next() {
                *first = c.to_uppercase().collect::<String>() + chars.as_str();
            }
        }
        let refs: Vec<&str> = cap_words.iter().map(String::as_str).collect();
        (
            sequence(&refs, &task_labels),
            sequence(&refs, &arg_labels),
        )
    };

    match task_type_index {
        // Taking
        0 => {
            if rng.gen_bool(0.3) {
                let mut words = vec!["pick", "up"];
                words.extend(&object_span);
                let mut task = vec!["Taking", "Taking"];
                task.extend(vec!["O"; object_span.len()]);
                let mut arg = vec!["O", "O"];
                arg.extend(obj_labels(object_span.len()));
                build(words, task, arg)
            } else {
                let verb = if rng.gen_bool(0.5) { "take" } else { "grab" };
                let mut words = vec![verb];
                words.extend(&object_span);
                words.extend(["from", "the", lmk]);
                let mut task = vec!["Taking"];
                task.extend(vec!["O"; object_span.len() + 3]);
                let mut arg = vec!["O"];
                arg.extend(obj_labels(object_span.len()));
                arg.extend(["O", "source", "source"]);
                build(words, task, arg)
            }
        }
        // Bringing
        1 => {
            let verb = if rng.gen_bool(0.5) { "bring" } else { "fetch" };
            let mut words = vec![verb, "me"];
            words.extend(&object_span);
            let mut task = vec!["Bringing", "O"];
            task.extend(vec!["O"; object_span.len()]);
            let mut arg = vec!["O", "beneficiary"];
            arg.extend(obj_labels(object_span.len()));
            build(words, task, arg)
        }
        // Change_state
        2 => {
            let verb = if rng.gen_bool(0.5) { "turn" } else { "switch" };
            let onoff = if rng.gen_bool(0.5) { "on" } else { "off" };
            let device = pick(rng, &["lamp", "fan", "heater", "clock"]);
            let words = if with_attr {
                vec![verb, onoff, "the", attr, device]
            } else {
                vec![verb, onoff, "the", device]
            };
            let n = words.len();
            let mut task = vec!["Change_state", "O"];
            task.extend(vec!["O"; n - 2]);
            let mut arg = vec!["O", "state"];
            arg.extend(vec!["device"; n - 2]);
            build(words, task, arg)
        }
        // Check_state
        3 => {
            let statew = pick(rng, &["open", "closed", "clean", "empty"]);
            let words = vec!["check", "if", "the", obj, "is", statew];
            build(
                words,
                vec!["Check_state", "O", "O", "O", "O", "O"],
                vec!["O", "O", "object", "object", "O", "state"],
            )
        }
        // Motion
        4 => {
            let verb = if rng.gen_bool(0.5) { "go" } else { "move" };
            let words = vec![verb, "to", "the", lmk];
            build(
                words,
                vec!["Motion", "O", "O", "O"],
                vec!["O", "O", "goal", "goal"],
            )
        }
        // Placing
        5 => {
            let verb = if rng.gen_bool(0.5) { "put" } else { "place" };
            let mut words = vec![verb];
            words.extend(&object_span);
            words.extend(["on", "the", lmk]);
            let mut task = vec!["Placing"];
            task.extend(vec!["O"; object_span.len() + 3]);
            let mut arg = vec!["O"];
            arg.extend(obj_labels(object_span.len()));
            arg.extend(["O", "goal", "goal"]);
            build(words, task, arg)
        }
        // Searching
        _ => {
            if rng.gen_bool(0.5) {
                let mut words = vec!["look", "for"];
                words.extend(&object_span);
                words.extend(["in", "the", lmk]);
                let mut task = vec!["Searching", "O"];
                task.extend(vec!["O"; object_span.len() + 3]);
                let mut arg = vec!["O", "O"];
                arg.extend(obj_labels(object_span.len()));
                arg.extend(["O", "area", "area"]);
                build(words, task, arg)
            } else {
                let mut words = vec!["find"];
                words.extend(&object_span);
                let mut task = vec!["Searching"];
                task.extend(vec!["O"; object_span.len()]);
                let mut arg = vec!["O"];
                arg.extend(obj_labels(object_span.len()));
                build(words, task, arg)
            }
        }
    }
}

/// Disjoint anchor slots on a 6x4 grid; boxes up to 130px fit inside a
/// slot without touching a neighbor.
fn anchor_slots(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut slots = Vec::with_capacity(24);
    for xi in 0..6 {
        for yi in 0..4 {
            slots.push((30.0 + 170.0 * f64::from(xi), 30.0 + 170.0 * f64::from(yi)));
        }
    }
    slots.shuffle(rng);
    slots
}

fn anchor_box(rng: &mut ChaCha8Rng, slot: (f64, f64)) -> BoundingBox {
    BoundingBox::new(
        slot.0 + rng.gen_range(0.0..10.0),
        slot.1 + rng.gen_range(0.0..10.0),
        rng.gen_range(70.0..120.0),
        rng.gen_range(70.0..120.0),
    )
}

/// A box jittered around `base` that still overlaps it well above the
/// reference IoU cutoff.
fn redundant_box(rng: &mut ChaCha8Rng, base: &BoundingBox) -> BoundingBox {
    for _ in 0..20 {
        let candidate = BoundingBox::new(
            base.x + rng.gen_range(-0.1..0.1) * base.w,
            base.y + rng.gen_range(-0.1..0.1) * base.h,
            base.w * rng.gen_range(0.9..1.1),
            base.h * rng.gen_range(0.9..1.1),
        );
        if crate::scene::iou(base, &candidate) > 0.6 {
            return candidate;
        }
    }
    BoundingBox::new(base.x + 1.0, base.y + 1.0, base.w, base.h)
}

fn caption_text(rng: &mut ChaCha8Rng, obj: &str, attrs: &[&str], with_landmark: bool) -> String {
    let mut words: Vec<&str> = vec!["a"];
    words.extend(attrs);
    words.push(obj);
    if with_landmark {
        words.push("on");
        words.push("the");
        words.push(pick(rng, &LANDMARKS));
    }
    words.join(" ")
}

struct SceneSketch<'a> {
    /// (attribute set, redundant-caption flag) per matching instance.
    candidates: Vec<Vec<&'a str>>,
    argument_attr: Option<&'a str>,
}

fn state_example(rng: &mut ChaCha8Rng, state: AmbiguityState, index: usize) -> StateExample {
    let obj = pick(rng, &OBJECTS);
    let attr = pick(rng, &ATTRIBUTES);
    let attr2 = pick_other(rng, &ATTRIBUTES, &[attr]);
    let attr3 = pick_other(rng, &ATTRIBUTES, &[attr, attr2]);

    let sketch = match state {
        AmbiguityState::Nq => match rng.gen_range(0..3) {
            0 => SceneSketch {
                candidates: vec![vec![attr]],
                argument_attr: Some(attr),
            },
            1 => SceneSketch {
                candidates: vec![vec![]],
                argument_attr: None,
            },
            _ => SceneSketch {
                candidates: vec![vec![attr], vec![attr2]],
                argument_attr: Some(attr),
            },
        },
        AmbiguityState::Aa => {
            let mut candidates = vec![vec![attr], vec![attr2]];
            if rng.gen_bool(0.3) {
                candidates.push(vec![attr3]);
            }
            SceneSketch {
                candidates,
                argument_attr: None,
            }
        }
        AmbiguityState::Ima => SceneSketch {
            candidates: vec![vec![attr]],
            argument_attr: None,
        },
        AmbiguityState::Am => SceneSketch {
            candidates: vec![vec![attr2]],
            argument_attr: Some(attr),
        },
        AmbiguityState::Anf => SceneSketch {
            candidates: vec![vec![]],
            argument_attr: Some(attr),
        },
        AmbiguityState::Aoa => {
            let count = rng.gen_range(2..4);
            if rng.gen_bool(0.5) {
                SceneSketch {
                    candidates: vec![vec![attr]; count],
                    argument_attr: Some(attr),
                }
            } else {
                let shared: Vec<&str> = if rng.gen_bool(0.5) { vec![attr] } else { vec![] };
                SceneSketch {
                    candidates: vec![shared; count],
                    argument_attr: None,
                }
            }
        }
        AmbiguityState::Nf => SceneSketch {
            candidates: Vec::new(),
            argument_attr: if rng.gen_bool(0.5) { Some(attr) } else { None },
        },
    };

    let slots = anchor_slots(rng);
    let mut slot_iter = slots.into_iter();
    let mut captions: Vec<SceneCaption> = Vec::new();

    for attrs in &sketch.candidates {
        let bbox = anchor_box(rng, slot_iter.next().expect("enough slots"));
        let with_landmark = attrs.is_empty() && rng.gen_bool(0.5);
        let text = caption_text(rng, obj, attrs, with_landmark);
        captions.push(SceneCaption::new(bbox, text));
    }
    // A redundant, attribute-free caption over one candidate exercises the
    // merge path without changing the constructed state.
    if !sketch.candidates.is_empty() && rng.gen_bool(0.5) {
        let target = rng.gen_range(0..sketch.candidates.len());
        let bbox = redundant_box(rng, &captions[target].bbox);
        let with_landmark = rng.gen_bool(0.5);
        let text = caption_text(rng, obj, &[], with_landmark);
        captions.push(SceneCaption::new(bbox, text));
    }
    for _ in 0..rng.gen_range(1..4) {
        let distractor_obj = pick_other(rng, &OBJECTS, &[obj]);
        let bbox = anchor_box(rng, slot_iter.next().expect("enough slots"));
        let attrs: Vec<&str> = if rng.gen_bool(0.5) {
            vec![pick(rng, &ATTRIBUTES)]
        } else {
            vec![]
        };
        let with_landmark = rng.gen_bool(0.3);
        let text = caption_text(rng, distractor_obj, &attrs, with_landmark);
        captions.push(SceneCaption::new(bbox, text));
    }
    captions.shuffle(rng);

    let argument = match sketch.argument_attr {
        Some(attr) => format!("the {attr} {obj}"),
        None => format!("the {obj}"),
    };
    let lmk = pick(rng, &LANDMARKS);
    let instruction = match rng.gen_range(0..5) {
        0 => format!("Take {argument} from the {lmk}"),
        1 => format!("Bring me {argument}"),
        2 => format!("Grab {argument} from the {lmk}"),
        3 => format!("Find {argument}"),
        _ => format!("Fetch me {argument}"),
    };

    StateExample {
        scene: Scene {
            captions,
            source_id: format!("synthetic_{index:04}"),
            rejected_records: 0,
        },
        instruction,
        gold: state,
    }
}

/// Generates `size` labeled description sequences, `size` instruction
/// pairs for the task/argument CRFs, and a `size`-example state dataset
/// with states balanced within one example. Deterministic per seed.
pub fn generate_synthetic_corpus(seed: u64, size: usize) -> SyntheticCorpus {
    assert!(size >= 1, "size must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let semantic: Vec<LabeledSequence> = (0..size).map(|_| semantic_sequence(&mut rng)).collect();

    let mut task = Vec::with_capacity(size);
    let mut argument = Vec::with_capacity(size);
    for i in 0..size {
        let (t, a) = instruction_pair(&mut rng, i % 7);
        task.push(t);
        argument.push(a);
    }

    let examples: Vec<StateExample> = (0..size)
        .map(|i| state_example(&mut rng, AmbiguityState::ALL[i % 7], i))
        .collect();

    SyntheticCorpus {
        semantic,
        task,
        argument,
        dataset: StateDataset { examples },
    }
}
