//! Clarification dialogue: question templates per ambiguity state, answer
//! parsing, and the ground -> ask -> answer -> re-ground loop.

use thiserror::Error;

use crate::disambiguation::{AmbiguityOutcome, AmbiguityState, CandidateSet};
use crate::instruction::{ArgumentPhrase, TaskFrame};
use crate::pipeline::GroundingContext;
use crate::planner::{replan_after_grounding, GroundingResolution, Plan};
use crate::scene::Scene;
use crate::similarity::SemanticClass;

/// Answers that count as plain agreement.
const AFFIRM_LEXICON: [&str; 6] = ["yes", "yeah", "ok", "sure", "continue", "right"];
/// Answers that count as refusal.
const DENY_LEXICON: [&str; 4] = ["no", "nope", "don't", "stop"];
/// Answers that call the task off.
const ABORT_LEXICON: [&str; 3] = ["abort", "cancel", "never mind"];

/// Re-prompts tolerated before the session force-aborts.
const REPROMPT_LIMIT: u32 = 3;

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("state NQ asks no question")]
    NoQuestionForState,
    #[error("question for state {state} is missing slot {slot:?}")]
    MissingSlot { state: AmbiguityState, slot: String },
    #[error("session has no pending outcome")]
    NoPendingOutcome,
    #[error("plan bookkeeping failed: {0}")]
    Plan(#[from] crate::planner::PlanError),
}

/// Fills the question template for the outcome's state. Undefined for NQ.
pub fn generate_question(outcome: &AmbiguityOutcome) -> Result<String, DialogueError> {
    let slot = |name: &str| -> Result<String, DialogueError> {
        outcome
            .slot_values
            .get(name)
            .filter(|v| !v.is_empty())
            .cloned()
            .ok_or_else(|| DialogueError::MissingSlot {
                state: outcome.state,
                slot: name.to_string(),
            })
    };
    // The attribute slot may legitimately be empty for NF and AOA; the
    // article spacing collapses with it.
    let optional = |name: &str| outcome.slot_values.get(name).cloned().unwrap_or_default();
    let with_space = |s: &str| {
        if s.is_empty() {
            String::new()
        } else {
            format!("{s} ")
        }
    };

    match outcome.state {
        AmbiguityState::Nq => Err(DialogueError::NoQuestionForState),
        AmbiguityState::Aa => Ok(format!(
            "I see a {} {} and a {} {}. Which one did you mean?",
            slot("attribute-1")?,
            slot("object")?,
            slot("attribute-2")?,
            slot("object")?
        )),
        AmbiguityState::Anf => Ok(format!(
            "I see a {}, but not sure if it's {}. Should I continue?",
            slot("object")?,
            slot("attribute")?
        )),
        AmbiguityState::Ima => Ok(format!(
            "I see a {} {}. Should I continue?",
            slot("attribute")?,
            slot("object")?
        )),
        AmbiguityState::Am => Ok(format!(
            "I see a {}, but its {}. Should I continue?",
            slot("object")?,
            slot("attribute")?
        )),
        AmbiguityState::Aoa => Ok(format!(
            "I see {} {}{}s. Which one did you mean?",
            slot("#num")?,
            with_space(&optional("attribute")),
            slot("object")?
        )),
        AmbiguityState::Nf => Ok(format!(
            "I can't find any {}{}. What should I do?",
            with_space(&optional("attribute")),
            slot("object")?
        )),
    }
}

/// A parsed user answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Affirm,
    Deny,
    /// A token in the reply singled out exactly one candidate.
    Choice { candidate: usize, payload: String },
    /// Anything else re-enters the pipeline as a rephrased description.
    Rephrase { payload: String },
    Abort,
}

fn normalize(text: &str) -> String {
    text.trim()
        .trim_matches(|c: char| c.is_ascii_punctuation() && c != '\'')
        .to_lowercase()
}

/// Classifies an answer: lexicon match first, then a discriminating
/// attribute/landmark mention that picks exactly one candidate, otherwise
/// a rephrase carrying the full text.
pub fn parse_answer(text: &str, outcome: &AmbiguityOutcome) -> Answer {
    let normalized = normalize(text);
    if AFFIRM_LEXICON.contains(&normalized.as_str()) {
        return Answer::Affirm;
    }
    if DENY_LEXICON.contains(&normalized.as_str()) {
        return Answer::Deny;
    }
    if ABORT_LEXICON.contains(&normalized.as_str()) {
        return Answer::Abort;
    }

    let words: Vec<String> = crate::instruction::tokenize(text)
        .iter()
        .map(|row| row.surface.to_lowercase())
        .collect();
    let mut selected: Option<usize> = None;
    let mut unique = true;
    for (index, candidate) in outcome.matched_candidates.iter().enumerate() {
        let discriminators = candidate
            .attribute_tokens
            .iter()
            .chain(&candidate.landmark_tokens);
        let mut mentioned = false;
        for token in discriminators {
            if words.contains(token) {
                mentioned = true;
                break;
            }
        }
        if mentioned {
            if selected.is_some() {
                unique = false;
            }
            selected = Some(index);
        }
    }
    match selected {
        Some(candidate) if unique => Answer::Choice {
            candidate,
            payload: text.to_string(),
        },
        _ => Answer::Rephrase {
            payload: text.to_string(),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionStatus {
    /// Waiting for the user to answer the pending question.
    AwaitingAnswer,
    /// Grounding finished; `candidate` indexes the session candidate set
    /// (None when the task needed no visual grounding).
    Grounded { candidate: Option<usize> },
    Aborted,
}

/// What the driver should do after a dialogue step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepReply {
    Grounded,
    Aborted,
    /// Ask this question next.
    Ask { question: String },
    /// The answer did not apply to the pending state; ask again.
    ReAsk { question: String },
}

/// One grounding conversation. The scene is annotated once at start; every
/// rephrase re-runs rank -> suppress -> identify against it.
pub struct Session {
    pub frame: TaskFrame,
    pub plan: Plan,
    pub scene: Scene,
    pub argument: ArgumentPhrase,
    pub candidates: CandidateSet,
    pub pending: Option<AmbiguityOutcome>,
    pub reprompts: u32,
    pub status: SessionStatus,
}

impl Session {
    /// Builds a session: annotates the scene, runs the pipeline for the
    /// grounding argument, and grounds immediately when the state is NQ
    /// (or when the plan has no grounding barrier at all).
    pub fn start(
        frame: TaskFrame,
        plan: Plan,
        mut scene: Scene,
        ctx: &GroundingContext,
    ) -> Result<Self, DialogueError> {
        ctx.annotate(&mut scene);
        let Some((_, phrase)) = frame.grounding_argument() else {
            return Ok(Self {
                frame,
                plan,
                scene,
                argument: ArgumentPhrase::new(Vec::new(), Vec::new()),
                candidates: CandidateSet {
                    candidates: Vec::new(),
                    argument: ArgumentPhrase::new(Vec::new(), Vec::new()),
                },
                pending: None,
                reprompts: 0,
                status: SessionStatus::Grounded { candidate: None },
            });
        };
        let argument = phrase.clone();
        let (candidates, outcome) = ctx.identify(&argument, &scene);
        let mut session = Self {
            frame,
            plan,
            scene,
            argument,
            candidates,
            pending: None,
            reprompts: 0,
            status: SessionStatus::AwaitingAnswer,
        };
        if session.plan.pending_step().is_none() {
            session.status = SessionStatus::Grounded { candidate: None };
            return Ok(session);
        }
        session.accept_outcome(outcome)?;
        Ok(session)
    }

    /// The question for the pending outcome, if one is owed.
    pub fn question(&self) -> Option<String> {
        self.pending
            .as_ref()
            .filter(|o| o.state != AmbiguityState::Nq)
            .and_then(|o| generate_question(o).ok())
    }

    pub fn grounded_candidate(&self) -> Option<&crate::scene::SceneCaption> {
        match self.status {
            SessionStatus::Grounded {
                candidate: Some(index),
            } => self.candidates.candidates.get(index),
            _ => None,
        }
    }

    fn accept_outcome(&mut self, outcome: AmbiguityOutcome) -> Result<(), DialogueError> {
        if outcome.state == AmbiguityState::Nq {
            let target = outcome.matched_candidates.first().cloned();
            self.pending = Some(outcome);
            if let Some(target) = target {
                self.ground_to_caption(&target)?;
            }
            return Ok(());
        }
        self.pending = Some(outcome);
        Ok(())
    }

    fn candidate_index(&self, caption: &crate::scene::SceneCaption) -> Option<usize> {
        self.candidates.candidates.iter().position(|c| c == caption)
    }

    fn ground_to_caption(
        &mut self,
        caption: &crate::scene::SceneCaption,
    ) -> Result<(), DialogueError> {
        let index = self.candidate_index(caption).unwrap_or(0);
        self.ground_to_index(index)
    }

    fn ground_to_index(&mut self, index: usize) -> Result<(), DialogueError> {
        let caption = &self.candidates.candidates[index];
        let object = if caption.object_tokens.is_empty() {
            "object".to_string()
        } else {
            caption.object_tokens.join("_")
        };
        let symbol = format!("{}_{}", object, index + 1);
        if let Some(step) = self.plan.pending_step() {
            self.plan =
                replan_after_grounding(&self.plan, step, &GroundingResolution::Object(symbol))?;
        }
        self.status = SessionStatus::Grounded {
            candidate: Some(index),
        };
        Ok(())
    }

    fn abort(&mut self) -> Result<StepReply, DialogueError> {
        if let Some(step) = self.plan.pending_step() {
            self.plan = replan_after_grounding(&self.plan, step, &GroundingResolution::Abort)?;
        } else {
            self.plan.aborted = true;
        }
        self.status = SessionStatus::Aborted;
        Ok(StepReply::Aborted)
    }

    fn reprompt(&mut self, question: String) -> Result<StepReply, DialogueError> {
        self.reprompts += 1;
        if self.reprompts >= REPROMPT_LIMIT {
            return self.abort();
        }
        Ok(StepReply::ReAsk { question })
    }

    /// Builds the rephrased argument: the payload's own parse, inheriting
    /// the current argument's object tokens when the payload names none
    /// (anaphora like "the red one").
    fn rephrased_argument(&self, payload: &str, ctx: &GroundingContext) -> ArgumentPhrase {
        let mut phrase = ctx.label_phrase(payload);
        if phrase.object_tokens.is_empty() && !self.argument.object_tokens.is_empty() {
            let mut tokens = phrase.tokens.clone();
            let mut labels = phrase.semantic_labels.clone();
            for word in &self.argument.object_tokens {
                tokens.push(crate::crf::TokenRow::new(word.clone()));
                labels.push(SemanticClass::Object);
            }
            phrase = ArgumentPhrase::new(tokens, labels);
        }
        phrase
    }

    fn handle_rephrase(
        &mut self,
        payload: &str,
        ctx: &GroundingContext,
    ) -> Result<StepReply, DialogueError> {
        let argument = self.rephrased_argument(payload, ctx);
        let (candidates, outcome) = ctx.identify(&argument, &self.scene);
        let unchanged = candidates.candidates == self.candidates.candidates;
        self.argument = argument;
        self.candidates = candidates;
        if unchanged {
            self.reprompts += 1;
            if self.reprompts >= REPROMPT_LIMIT {
                return self.abort();
            }
        } else {
            self.reprompts = 0;
        }
        self.accept_outcome(outcome)?;
        if matches!(self.status, SessionStatus::Grounded { .. }) {
            return Ok(StepReply::Grounded);
        }
        let question = self.question().unwrap_or_default();
        Ok(StepReply::Ask { question })
    }

    /// Advances the state machine by one user answer.
    pub fn dialogue_step(
        &mut self,
        answer: &Answer,
        ctx: &GroundingContext,
    ) -> Result<StepReply, DialogueError> {
        let pending = self
            .pending
            .as_ref()
            .ok_or(DialogueError::NoPendingOutcome)?
            .clone();
        let state = pending.state;
        let question = generate_question(&pending).unwrap_or_default();

        match answer {
            Answer::Abort => self.abort(),
            Answer::Affirm => match state {
                AmbiguityState::Ima | AmbiguityState::Am | AmbiguityState::Anf => {
                    let target = pending.matched_candidates[0].clone();
                    self.ground_to_caption(&target)?;
                    Ok(StepReply::Grounded)
                }
                _ => self.reprompt(question),
            },
            Answer::Deny => match state {
                AmbiguityState::Ima | AmbiguityState::Am | AmbiguityState::Anf => {
                    // The visible candidate is refused: fall into the
                    // not-found path and ask what to do.
                    let mut slots = pending.slot_values.clone();
                    slots.remove("attribute-1");
                    slots.remove("attribute-2");
                    slots.remove("#num");
                    slots
                        .entry("attribute".to_string())
                        .or_insert_with(|| self.argument.attribute_tokens.join(" "));
                    let outcome = AmbiguityOutcome {
                        state: AmbiguityState::Nf,
                        matched_candidates: Vec::new(),
                        slot_values: slots,
                    };
                    let question = generate_question(&outcome)?;
                    self.pending = Some(outcome);
                    Ok(StepReply::Ask { question })
                }
                _ => self.reprompt(question),
            },
            Answer::Choice { candidate, .. } => match state {
                AmbiguityState::Aa | AmbiguityState::Aoa => {
                    let target = pending.matched_candidates[*candidate].clone();
                    self.ground_to_caption(&target)?;
                    Ok(StepReply::Grounded)
                }
                _ => self.reprompt(question),
            },
            Answer::Rephrase { payload } => {
                if state == AmbiguityState::Aoa {
                    // Visually identical candidates: a reply without a
                    // discriminator lets the robot pick the nearest one,
                    // proxied by the largest box.
                    let largest = pending
                        .matched_candidates
                        .iter()
                        .enumerate()
                        .max_by(|(_, a), (_, b)| {
                            a.bbox
                                .area()
                                .partial_cmp(&b.bbox.area())
                                .unwrap_or(std::cmp::Ordering::Equal)
                        })
                        .map(|(_, c)| c.clone());
                    if let Some(target) = largest {
                        self.ground_to_caption(&target)?;
                        return Ok(StepReply::Grounded);
                    }
                }
                self.handle_rephrase(payload, ctx)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::TokenRow;
    use crate::disambiguation::Cutoffs;
    use crate::embeddings::EmbeddingTable;
    use crate::instruction::{ArgRole, TaskType};
    use crate::planner::{encode_problem, forward_search, default_templates};
    use crate::scene::{BoundingBox, SceneCaption};
    use crate::similarity::ClassWeights;
    use std::collections::BTreeMap;

    use SemanticClass::{Attribute, Object, Other};

    fn outcome(
        state: AmbiguityState,
        slots: &[(&str, &str)],
        candidates: Vec<SceneCaption>,
    ) -> AmbiguityOutcome {
        AmbiguityOutcome {
            state,
            matched_candidates: candidates,
            slot_values: slots
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    fn candidate(text: &str, attrs: &[&str], landmarks: &[&str], bbox: BoundingBox) -> SceneCaption {
        let mut c = SceneCaption::new(bbox, text);
        let labels: Vec<SemanticClass> = c
            .tokens
            .iter()
            .map(|row| {
                let word = row.surface.to_lowercase();
                if attrs.contains(&word.as_str()) {
                    SemanticClass::Attribute
                } else if landmarks.contains(&word.as_str()) {
                    SemanticClass::SpatialLandmark
                } else if ["a", "an", "the", "on", "in", "near"].contains(&word.as_str()) {
                    SemanticClass::Other
                } else {
                    SemanticClass::Object
                }
            })
            .collect();
        c.set_labels(labels);
        c
    }

    #[test]
    fn aa_question_is_byte_exact() {
        let o = outcome(
            AmbiguityState::Aa,
            &[
                ("attribute-1", "red"),
                ("attribute-2", "white"),
                ("object", "lamp"),
            ],
            vec![],
        );
        assert_eq!(
            generate_question(&o).unwrap(),
            "I see a red lamp and a white lamp. Which one did you mean?"
        );
    }

    #[test]
    fn aoa_question_pluralizes_object() {
        let o = outcome(
            AmbiguityState::Aoa,
            &[("#num", "3"), ("attribute", "green"), ("object", "bottle")],
            vec![],
        );
        assert_eq!(
            generate_question(&o).unwrap(),
            "I see 3 green bottles. Which one did you mean?"
        );
    }

    #[test]
    fn nf_question_names_attribute_and_object() {
        let o = outcome(
            AmbiguityState::Nf,
            &[("attribute", "red"), ("object", "cup")],
            vec![],
        );
        assert_eq!(
            generate_question(&o).unwrap(),
            "I can't find any red cup. What should I do?"
        );
    }

    #[test]
    fn nf_question_collapses_empty_attribute() {
        let o = outcome(AmbiguityState::Nf, &[("object", "cup")], vec![]);
        assert_eq!(
            generate_question(&o).unwrap(),
            "I can't find any cup. What should I do?"
        );
    }

    #[test]
    fn nq_has_no_question() {
        let o = outcome(AmbiguityState::Nq, &[("object", "cup")], vec![]);
        assert!(matches!(
            generate_question(&o),
            Err(DialogueError::NoQuestionForState)
        ));
    }

    #[test]
    fn missing_slot_is_named() {
        let o = outcome(AmbiguityState::Ima, &[("object", "cup")], vec![]);
        match generate_question(&o) {
            Err(DialogueError::MissingSlot { state, slot }) => {
                assert_eq!(state, AmbiguityState::Ima);
                assert_eq!(slot, "attribute");
            }
            other => panic!("expected MissingSlot, got {other:?}"),
        }
    }

    #[test]
    fn parse_answer_lexicons() {
        let o = outcome(AmbiguityState::Ima, &[], vec![]);
        assert_eq!(parse_answer("yes", &o), Answer::Affirm);
        assert_eq!(parse_answer(" Yes. ", &o), Answer::Affirm);
        assert_eq!(parse_answer("nope", &o), Answer::Deny);
        assert_eq!(parse_answer("don't", &o), Answer::Deny);
        assert_eq!(parse_answer("never mind", &o), Answer::Abort);
    }

    #[test]
    fn parse_answer_unique_discriminator_is_choice() {
        let candidates = vec![
            candidate("a blue cup", &["blue"], &[], BoundingBox::new(0.0, 0.0, 10.0, 10.0)),
            candidate("a green cup", &["green"], &[], BoundingBox::new(50.0, 0.0, 10.0, 10.0)),
        ];
        let o = outcome(AmbiguityState::Aa, &[], candidates);
        match parse_answer("the blue cup", &o) {
            Answer::Choice { candidate, .. } => assert_eq!(candidate, 0),
            other => panic!("expected choice, got {other:?}"),
        }
    }

    #[test]
    fn parse_answer_without_discriminator_is_rephrase() {
        let candidates = vec![candidate(
            "a blue cup",
            &["blue"],
            &[],
            BoundingBox::new(0.0, 0.0, 10.0, 10.0),
        )];
        let o = outcome(AmbiguityState::Aa, &[], candidates);
        assert_eq!(
            parse_answer("bring the one near the window", &o),
            Answer::Rephrase {
                payload: "bring the one near the window".to_string()
            }
        );
    }

    // A small world for session tests: toy embeddings keyed to the scene
    // vocabulary and a trained-free semantic labeler (manual weights).
    fn toy_context() -> (EmbeddingTable, crate::crf::CrfModel) {
        let mut table = EmbeddingTable::new(6).unwrap();
        let words = ["cup", "lamp", "red", "white", "blue", "one"];
        for (i, word) in words.iter().enumerate() {
            let mut v = vec![0.0; 6];
            v[i] = 1.0;
            table.insert(word, v);
        }
        table.insert("a", vec![0.1; 6]);
        table.insert("the", vec![0.1; 6]);

        let mut sem = crate::crf::CrfModel::new(&crate::similarity::semantic_alphabet()).unwrap();
        for word in ["cup", "lamp"] {
            sem.set_feature_weight(&format!("w={word}"), "object", 4.0);
        }
        for word in ["red", "white", "blue"] {
            sem.set_feature_weight(&format!("w={word}"), "attribute", 4.0);
        }
        for word in ["a", "the", "one", "bring", "me"] {
            sem.set_feature_weight(&format!("w={word}"), "other", 4.0);
        }
        (table, sem)
    }

    fn bringing_frame(words: &[&str], labels: &[SemanticClass]) -> TaskFrame {
        let mut arguments = BTreeMap::new();
        arguments.insert(
            ArgRole::Object,
            ArgumentPhrase::new(TokenRow::words(words), labels.to_vec()),
        );
        arguments.insert(
            ArgRole::Beneficiary,
            ArgumentPhrase::new(TokenRow::words(&["me"]), vec![Other]),
        );
        TaskFrame {
            task_type: TaskType::Bringing,
            arguments,
        }
    }

    fn lamp_scene() -> Scene {
        Scene {
            captions: vec![
                SceneCaption::new(BoundingBox::new(0.0, 0.0, 20.0, 20.0), "a red lamp"),
                SceneCaption::new(BoundingBox::new(60.0, 0.0, 20.0, 20.0), "a white lamp"),
            ],
            source_id: "lamps".to_string(),
            rejected_records: 0,
        }
    }

    fn session_for(scene: Scene, words: &[&str], labels: &[SemanticClass]) -> (Session, EmbeddingTable, crate::crf::CrfModel) {
        let (table, sem) = toy_context();
        let frame = bringing_frame(words, labels);
        let knowledge = BTreeMap::new();
        let (state, goal) = encode_problem(&frame, &knowledge).unwrap();
        let plan = forward_search(&state, &goal, &default_templates(), 6).unwrap();
        let ctx = GroundingContext::new(
            &table,
            &sem,
            ClassWeights::new(0.6, 0.3, 0.05, 0.05).unwrap(),
            Cutoffs::new(0.3, 0.5).unwrap(),
        );
        let session = Session::start(frame, plan, scene, &ctx).unwrap();
        (session, table, sem)
    }

    #[test]
    fn ima_affirm_resumes_plan_with_grounded_box() {
        let scene = Scene {
            captions: vec![SceneCaption::new(
                BoundingBox::new(0.0, 0.0, 20.0, 20.0),
                "a red cup",
            )],
            source_id: "cup".to_string(),
            rejected_records: 0,
        };
        let (mut session, table, sem) = session_for(scene, &["a", "cup"], &[Other, Object]);
        let ctx = GroundingContext::new(
            &table,
            &sem,
            ClassWeights::new(0.6, 0.3, 0.05, 0.05).unwrap(),
            Cutoffs::new(0.3, 0.5).unwrap(),
        );
        assert_eq!(session.pending.as_ref().unwrap().state, AmbiguityState::Ima);
        let reply = session.dialogue_step(&Answer::Affirm, &ctx).unwrap();
        assert_eq!(reply, StepReply::Grounded);
        assert!(session.grounded_candidate().is_some());
        let localize = session
            .plan
            .steps
            .iter()
            .find(|s| s.name == "LOCALIZE")
            .unwrap();
        assert!(localize.grounded);
        assert_eq!(localize.args[0], "cup_1");
    }

    #[test]
    fn aa_rephrase_reidentifies_to_nq_and_grounds() {
        let (mut session, table, sem) =
            session_for(lamp_scene(), &["the", "lamp"], &[Other, Object]);
        let ctx = GroundingContext::new(
            &table,
            &sem,
            ClassWeights::new(0.6, 0.3, 0.05, 0.05).unwrap(),
            Cutoffs::new(0.3, 0.5).unwrap(),
        );
        assert_eq!(session.pending.as_ref().unwrap().state, AmbiguityState::Aa);
        let reply = session
            .dialogue_step(
                &Answer::Rephrase {
                    payload: "the red one".to_string(),
                },
                &ctx,
            )
            .unwrap();
        assert_eq!(reply, StepReply::Grounded);
        assert_eq!(session.pending.as_ref().unwrap().state, AmbiguityState::Nq);
        let grounded = session.grounded_candidate().unwrap();
        assert_eq!(grounded.text, "a red lamp");
    }

    #[test]
    fn nf_abort_truncates_plan() {
        let scene = Scene {
            captions: vec![],
            source_id: "empty".to_string(),
            rejected_records: 0,
        };
        let (mut session, table, sem) = session_for(scene, &["the", "cup"], &[Other, Object]);
        let ctx = GroundingContext::new(
            &table,
            &sem,
            ClassWeights::new(0.6, 0.3, 0.05, 0.05).unwrap(),
            Cutoffs::new(0.3, 0.5).unwrap(),
        );
        assert_eq!(session.pending.as_ref().unwrap().state, AmbiguityState::Nf);
        let reply = session.dialogue_step(&Answer::Abort, &ctx).unwrap();
        assert_eq!(reply, StepReply::Aborted);
        assert!(session.plan.aborted);
        assert_eq!(session.status, SessionStatus::Aborted);
    }

    #[test]
    fn adversarial_rephrase_loop_terminates_within_limit() {
        let (mut session, table, sem) =
            session_for(lamp_scene(), &["the", "lamp"], &[Other, Object]);
        let ctx = GroundingContext::new(
            &table,
            &sem,
            ClassWeights::new(0.6, 0.3, 0.05, 0.05).unwrap(),
            Cutoffs::new(0.3, 0.5).unwrap(),
        );
        let mut replies = Vec::new();
        for _ in 0..REPROMPT_LIMIT + 1 {
            if session.status != SessionStatus::AwaitingAnswer {
                break;
            }
            let reply = session
                .dialogue_step(
                    &Answer::Rephrase {
                        payload: "the lamp".to_string(),
                    },
                    &ctx,
                )
                .unwrap();
            replies.push(reply.clone());
            if reply == StepReply::Aborted {
                break;
            }
        }
        assert_eq!(session.status, SessionStatus::Aborted);
        assert!(replies.len() <= REPROMPT_LIMIT as usize);
    }

    #[test]
    fn inapplicable_answer_reasks_same_question() {
        let (mut session, table, sem) =
            session_for(lamp_scene(), &["the", "lamp"], &[Other, Object]);
        let ctx = GroundingContext::new(
            &table,
            &sem,
            ClassWeights::new(0.6, 0.3, 0.05, 0.05).unwrap(),
            Cutoffs::new(0.3, 0.5).unwrap(),
        );
        let before = session.question().unwrap();
        let reply = session.dialogue_step(&Answer::Affirm, &ctx).unwrap();
        match reply {
            StepReply::ReAsk { question } => assert_eq!(question, before),
            other => panic!("expected ReAsk, got {other:?}"),
        }
        assert_eq!(session.reprompts, 1);
    }

    #[test]
    fn aoa_without_discriminator_grounds_largest_box() {
        let scene = Scene {
            captions: vec![
                SceneCaption::new(BoundingBox::new(0.0, 0.0, 10.0, 10.0), "a red cup"),
                SceneCaption::new(BoundingBox::new(60.0, 0.0, 30.0, 30.0), "a red cup"),
            ],
            source_id: "cups".to_string(),
            rejected_records: 0,
        };
        let (mut session, table, sem) =
            session_for(scene, &["red", "cup"], &[Attribute, Object]);
        let ctx = GroundingContext::new(
            &table,
            &sem,
            ClassWeights::new(0.6, 0.3, 0.05, 0.05).unwrap(),
            Cutoffs::new(0.3, 0.5).unwrap(),
        );
        assert_eq!(session.pending.as_ref().unwrap().state, AmbiguityState::Aoa);
        let reply = session
            .dialogue_step(
                &Answer::Rephrase {
                    payload: "any of them".to_string(),
                },
                &ctx,
            )
            .unwrap();
        assert_eq!(reply, StepReply::Grounded);
        let grounded = session.grounded_candidate().unwrap();
        assert_eq!(grounded.bbox.w, 30.0);
    }
}
