//! Instruction parsing: task-type and argument labeling plus semantic
//! annotation of the extracted argument phrases.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::crf::{CrfModel, TokenRow};
use crate::similarity::SemanticClass;

#[derive(Debug, Error)]
pub enum InstructionError {
    #[error("no task recognized")]
    NoTask,
    #[error("{task} instruction is missing its mandatory argument role '{role}'")]
    MissingRole { task: TaskType, role: ArgRole },
}

/// The task alphabet the task-CRF labels against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskType {
    Bringing,
    ChangeState,
    CheckState,
    Motion,
    Placing,
    Searching,
    Taking,
}

impl TaskType {
    pub const ALL: [TaskType; 7] = [
        TaskType::Bringing,
        TaskType::ChangeState,
        TaskType::CheckState,
        TaskType::Motion,
        TaskType::Placing,
        TaskType::Searching,
        TaskType::Taking,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            TaskType::Bringing => "Bringing",
            TaskType::ChangeState => "Change_state",
            TaskType::CheckState => "Check_state",
            TaskType::Motion => "Motion",
            TaskType::Placing => "Placing",
            TaskType::Searching => "Searching",
            TaskType::Taking => "Taking",
        }
    }

    /// The one argument role that must be present for the task to be
    /// executable at all.
    pub fn mandatory_role(&self) -> ArgRole {
        match self {
            TaskType::Bringing => ArgRole::Object,
            TaskType::ChangeState => ArgRole::Device,
            TaskType::CheckState => ArgRole::Object,
            TaskType::Motion => ArgRole::Goal,
            TaskType::Placing => ArgRole::Object,
            TaskType::Searching => ArgRole::Object,
            TaskType::Taking => ArgRole::Object,
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TaskType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskType::ALL
            .iter()
            .find(|t| t.label().eq_ignore_ascii_case(s))
            .copied()
            .ok_or(())
    }
}

/// Argument roles the argument-CRF labels against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArgRole {
    Object,
    Beneficiary,
    Source,
    Device,
    State,
    Goal,
    Area,
    Destination,
}

impl ArgRole {
    pub const ALL: [ArgRole; 8] = [
        ArgRole::Object,
        ArgRole::Beneficiary,
        ArgRole::Source,
        ArgRole::Device,
        ArgRole::State,
        ArgRole::Goal,
        ArgRole::Area,
        ArgRole::Destination,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ArgRole::Object => "object",
            ArgRole::Beneficiary => "beneficiary",
            ArgRole::Source => "source",
            ArgRole::Device => "device",
            ArgRole::State => "state",
            ArgRole::Goal => "goal",
            ArgRole::Area => "area",
            ArgRole::Destination => "destination",
        }
    }
}

impl fmt::Display for ArgRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ArgRole {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArgRole::ALL
            .iter()
            .find(|r| r.label().eq_ignore_ascii_case(s))
            .copied()
            .ok_or(())
    }
}

/// Outside label shared by the task and argument alphabets.
pub const OUTSIDE: &str = "O";

pub fn task_alphabet() -> Vec<String> {
    std::iter::once(OUTSIDE.to_string())
        .chain(TaskType::ALL.iter().map(|t| t.label().to_string()))
        .collect()
}

pub fn argument_alphabet() -> Vec<String> {
    std::iter::once(OUTSIDE.to_string())
        .chain(ArgRole::ALL.iter().map(|r| r.label().to_string()))
        .collect()
}

/// An argument span with its per-token semantic classes and the derived
/// object/attribute token lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgumentPhrase {
    pub tokens: Vec<TokenRow>,
    pub semantic_labels: Vec<SemanticClass>,
    pub object_tokens: Vec<String>,
    pub attribute_tokens: Vec<String>,
    pub landmark_tokens: Vec<String>,
}

impl ArgumentPhrase {
    pub fn new(tokens: Vec<TokenRow>, semantic_labels: Vec<SemanticClass>) -> Self {
        assert_eq!(
            tokens.len(),
            semantic_labels.len(),
            "tokens and labels must align"
        );
        let mut object_tokens = Vec::new();
        let mut attribute_tokens = Vec::new();
        let mut landmark_tokens = Vec::new();
        for (row, label) in tokens.iter().zip(&semantic_labels) {
            let word = row.surface.to_lowercase();
            match label {
                SemanticClass::Object => object_tokens.push(word),
                SemanticClass::Attribute => attribute_tokens.push(word),
                SemanticClass::SpatialLandmark => landmark_tokens.push(word),
                SemanticClass::Other => {}
            }
        }
        Self {
            tokens,
            semantic_labels,
            object_tokens,
            attribute_tokens,
            landmark_tokens,
        }
    }

    /// Labels raw text with the semantic-class model.
    pub fn from_text(text: &str, sem_model: &CrfModel) -> Self {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Self::new(Vec::new(), Vec::new());
        }
        let labels = sem_model
            .viterbi(&tokens)
            .iter()
            .map(|l| SemanticClass::from_label(l).unwrap_or(SemanticClass::Other))
            .collect();
        Self::new(tokens, labels)
    }

    /// Surface text of the span as written.
    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Lowercased object tokens joined by a space, the candidate-match key.
    pub fn object_key(&self) -> String {
        self.object_tokens.join(" ")
    }

    pub fn has_attributes(&self) -> bool {
        !self.attribute_tokens.is_empty()
    }
}

/// A parsed instruction: the task type plus its role-keyed arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskFrame {
    pub task_type: TaskType,
    pub arguments: BTreeMap<ArgRole, ArgumentPhrase>,
}

impl TaskFrame {
    pub fn argument(&self, role: ArgRole) -> Option<&ArgumentPhrase> {
        self.arguments.get(&role)
    }

    /// The argument that needs visual grounding: the object if present,
    /// otherwise the device.
    pub fn grounding_argument(&self) -> Option<(ArgRole, &ArgumentPhrase)> {
        for role in [ArgRole::Object, ArgRole::Device] {
            if let Some(phrase) = self.arguments.get(&role) {
                return Some((role, phrase));
            }
        }
        None
    }
}

/// Splits on whitespace and punctuation, preserving case and dropping
/// punctuation-only tokens.
pub fn tokenize(text: &str) -> Vec<TokenRow> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(TokenRow::new(std::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        tokens.push(TokenRow::new(current));
    }
    tokens
}

/// Parses an instruction with the three CRFs: the task model finds the
/// task-evoking token, the argument model marks role spans, and the
/// semantic model labels each extracted span.
pub fn parse_instruction(
    text: &str,
    task_model: &CrfModel,
    arg_model: &CrfModel,
    sem_model: &CrfModel,
) -> Result<TaskFrame, InstructionError> {
    let rows = tokenize(text);
    if rows.is_empty() {
        return Err(InstructionError::NoTask);
    }

    let task_labels = task_model.viterbi(&rows);
    let task_type = task_labels
        .iter()
        .find_map(|l| TaskType::from_str(l).ok())
        .ok_or(InstructionError::NoTask)?;

    let arg_labels = arg_model.viterbi(&rows);
    let mut arguments: BTreeMap<ArgRole, ArgumentPhrase> = BTreeMap::new();
    let mut i = 0;
    while i < rows.len() {
        let Ok(role) = ArgRole::from_str(&arg_labels[i]) else {
            i += 1;
            continue;
        };
        let mut span = Vec::new();
        while i < rows.len() && arg_labels[i] == role.label() {
            span.push(rows[i].clone());
            i += 1;
        }
        // Contiguity defines a span; a repeated role keeps its first span.
        if !arguments.contains_key(&role) {
            let labels = sem_model
                .viterbi(&span)
                .iter()
                .map(|l| SemanticClass::from_label(l).unwrap_or(SemanticClass::Other))
                .collect();
            arguments.insert(role, ArgumentPhrase::new(span, labels));
        }
    }

    let mandatory = task_type.mandatory_role();
    if !arguments.contains_key(&mandatory) {
        return Err(InstructionError::MissingRole {
            task: task_type,
            role: mandatory,
        });
    }

    Ok(TaskFrame {
        task_type,
        arguments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{train, LabeledSequence, TrainConfig};

    fn surfaces(rows: &[TokenRow]) -> Vec<&str> {
        rows.iter().map(|r| r.surface.as_str()).collect()
    }

    #[test]
    fn tokenize_drops_punctuation() {
        assert_eq!(
            surfaces(&tokenize("Take a red cup.")),
            vec!["Take", "a", "red", "cup"]
        );
    }

    #[test]
    fn tokenize_counts_words() {
        assert_eq!(tokenize("turn off the red lamp").len(), 5);
    }

    #[test]
    fn tokenize_whitespace_only_is_empty() {
        assert!(tokenize("  ").is_empty());
    }

    #[test]
    fn tokenize_preserves_case_and_apostrophes() {
        assert_eq!(surfaces(&tokenize("Don't stop!")), vec!["Don't", "stop"]);
    }

    fn seq(words: &[&str], labels: &[&str]) -> LabeledSequence {
        LabeledSequence::new(
            TokenRow::words(words),
            labels.iter().map(|l| l.to_string()).collect(),
        )
    }

    fn toy_models() -> (CrfModel, CrfModel, CrfModel) {
        let repeat = |s: LabeledSequence, n: usize| vec![s; n];
        let task_data: Vec<LabeledSequence> = [
            seq(
                &["Take", "a", "red", "cup", "from", "the", "kitchen"],
                &["Taking", "O", "O", "O", "O", "O", "O"],
            ),
            seq(
                &["Bring", "me", "a", "coffee", "mug"],
                &["Bringing", "O", "O", "O", "O"],
            ),
            seq(&["go", "to", "the", "kitchen"], &["Motion", "O", "O", "O"]),
        ]
        .into_iter()
        .flat_map(|s| repeat(s, 12))
        .collect();
        let arg_data: Vec<LabeledSequence> = [
            seq(
                &["Take", "a", "red", "cup", "from", "the", "kitchen"],
                &["O", "object", "object", "object", "O", "source", "source"],
            ),
            seq(
                &["Bring", "me", "a", "coffee", "mug"],
                &["O", "beneficiary", "object", "object", "object"],
            ),
            seq(&["go", "to", "the", "kitchen"], &["O", "O", "goal", "goal"]),
        ]
        .into_iter()
        .flat_map(|s| repeat(s, 12))
        .collect();
        let sem_data: Vec<LabeledSequence> = [
            seq(&["a", "red", "cup"], &["other", "attribute", "object"]),
            seq(&["a", "coffee", "mug"], &["other", "attribute", "object"]),
            seq(&["the", "kitchen"], &["other", "spatial_landmark"]),
            seq(&["me"], &["other"]),
        ]
        .into_iter()
        .flat_map(|s| repeat(s, 12))
        .collect();
        let config = TrainConfig {
            epochs: 25,
            ..TrainConfig::default()
        };
        (
            train(&task_data, &config).unwrap().model,
            train(&arg_data, &config).unwrap().model,
            train(&sem_data, &config).unwrap().model,
        )
    }

    #[test]
    fn parses_the_worked_example() {
        let (task, arg, sem) = toy_models();
        let frame = parse_instruction("Take a red cup from the kitchen", &task, &arg, &sem).unwrap();
        assert_eq!(frame.task_type, TaskType::Taking);
        assert_eq!(frame.argument(ArgRole::Object).unwrap().text(), "a red cup");
        assert_eq!(
            frame.argument(ArgRole::Source).unwrap().text(),
            "the kitchen"
        );
    }

    #[test]
    fn splits_object_and_attribute_tokens() {
        let (task, arg, sem) = toy_models();
        let frame = parse_instruction("Bring me a coffee mug", &task, &arg, &sem).unwrap();
        let object = frame.argument(ArgRole::Object).unwrap();
        assert_eq!(object.object_tokens, vec!["mug"]);
        assert_eq!(object.attribute_tokens, vec!["coffee"]);
    }

    #[test]
    fn empty_instruction_reports_no_task() {
        let (task, arg, sem) = toy_models();
        assert!(matches!(
            parse_instruction("", &task, &arg, &sem),
            Err(InstructionError::NoTask)
        ));
    }

    #[test]
    fn missing_mandatory_role_is_reported() {
        let (task, arg, sem) = toy_models();
        // "Take" alone evokes Taking but carries no object span.
        match parse_instruction("Take", &task, &arg, &sem) {
            Err(InstructionError::MissingRole { task, role }) => {
                assert_eq!(task, TaskType::Taking);
                assert_eq!(role, ArgRole::Object);
            }
            other => panic!("expected MissingRole, got {other:?}"),
        }
    }

    #[test]
    fn spans_are_a_subsequence_of_the_input() {
        let (task, arg, sem) = toy_models();
        let text = "Take a red cup from the kitchen";
        let frame = parse_instruction(text, &task, &arg, &sem).unwrap();
        let original: Vec<String> = tokenize(text)
            .iter()
            .map(|r| r.surface.clone())
            .collect();
        let mut cursor = 0usize;
        for phrase in frame.arguments.values() {
            for row in &phrase.tokens {
                let found = original[cursor..].iter().position(|w| w == &row.surface);
                assert!(found.is_some(), "span token {} out of order", row.surface);
                cursor += found.unwrap() + 1;
            }
            cursor = 0; // spans themselves are ordered; restart per span
        }
    }
}
