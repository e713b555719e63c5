//! Grounding of natural-language task instructions against captioned scenes.
//!
//! The pipeline parses an instruction into a task frame, plans an abstract
//! action sequence, and pauses at the visual-grounding barrier to match the
//! referenced object against dense scene captions. When the match is
//! ambiguous it classifies the situation into one of seven states and
//! generates a clarification question; the answer is folded back in until
//! the reference is grounded or the task is aborted.

pub mod config;
pub mod crf;
pub mod dialogue;
pub mod disambiguation;
pub mod embeddings;
pub mod eval;
pub mod instruction;
pub mod pipeline;
pub mod planner;
pub mod scene;
pub mod similarity;

pub use config::PipelineParams;
pub use crf::{CrfModel, LabeledSequence, TokenRow, TrainConfig};
pub use dialogue::{Answer, Session, SessionStatus};
pub use disambiguation::{AmbiguityOutcome, AmbiguityState, CandidateSet, Cutoffs};
pub use embeddings::{cosine, load_embeddings, EmbeddingTable, PhraseVector};
pub use instruction::{parse_instruction, tokenize, ArgumentPhrase, TaskFrame, TaskType};
pub use pipeline::GroundingContext;
pub use planner::{encode_problem, forward_search, Plan, WorldState};
pub use scene::{box_union, iou, load_scene, BoundingBox, Scene, SceneCaption};
pub use similarity::{encode_phrase, rank_captions, relevance, ClassWeights, SemanticClass};
