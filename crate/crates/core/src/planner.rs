//! Task planning: per-task precondition/effect templates instantiated from
//! the parsed frame, breadth-first forward search for the shortest plan,
//! and replanning once visual grounding resolves an object symbol.
//!
//! `robot_at` and `holding` are functional state fields (a location
//! function and an at-most-one-object gripper); everything else is a plain
//! set of ground predicates. The LOCALIZE step is the grounding barrier:
//! execution pauses there and hands control to disambiguation.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::instruction::{ArgRole, TaskFrame, TaskType};

/// Reserved symbol for the robot's initial location.
pub const START_LOCATION: &str = "start";
/// Reserved symbol for the instruction giver's location, the implied
/// delivery point of fetch-style tasks.
pub const DESTINATION: &str = "destination";

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("unknown location {name:?}; known locations: {known}")]
    UnknownLocation { name: String, known: String },
    #[error("task frame is missing the {0} argument")]
    MissingArgument(ArgRole),
    #[error("no plan satisfies the goal within depth {0}")]
    UnsatisfiableWithinDepth(usize),
    #[error("step {0} is out of range")]
    BadStepIndex(usize),
    #[error("step {0} is already grounded")]
    AlreadyGrounded(usize),
    #[error("domain file line {line}: {reason}")]
    BadDomain { line: usize, reason: String },
    #[error("step {step} ({action}) violates precondition {predicate}")]
    PreconditionViolated {
        step: usize,
        action: String,
        predicate: String,
    },
    #[error("plan ends without satisfying goal predicate {0}")]
    GoalUnsatisfied(String),
    #[error("no action template named {0}")]
    UnknownAction(String),
}

/// A ground predicate: name plus argument symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<String>,
}

impl Predicate {
    pub fn new(name: &str, args: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(", "))
    }
}

/// World snapshot: generic facts plus the two functional fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WorldState {
    pub facts: BTreeSet<Predicate>,
    pub robot_at: String,
    pub holding: Option<String>,
}

impl WorldState {
    pub fn initial() -> Self {
        Self {
            facts: BTreeSet::new(),
            robot_at: START_LOCATION.to_string(),
            holding: None,
        }
    }

    fn satisfies(&self, predicate: &Predicate) -> bool {
        match (predicate.name.as_str(), predicate.args.as_slice()) {
            ("robot_at", [loc]) => &self.robot_at == loc,
            ("holding", [obj]) => self.holding.as_deref() == Some(obj),
            ("hand_empty", []) => self.holding.is_none(),
            _ => self.facts.contains(predicate),
        }
    }

    pub fn satisfies_all(&self, goal: &[Predicate]) -> bool {
        goal.iter().all(|p| self.satisfies(p))
    }

    fn symbols(&self) -> BTreeSet<String> {
        let mut symbols: BTreeSet<String> = self
            .facts
            .iter()
            .flat_map(|p| p.args.iter().cloned())
            .collect();
        symbols.insert(self.robot_at.clone());
        if let Some(obj) = &self.holding {
            symbols.insert(obj.clone());
        }
        symbols
    }
}

/// A lifted action: parameters plus precondition and add/delete patterns
/// whose arguments are either `?variables` or constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTemplate {
    pub name: String,
    pub parameters: Vec<String>,
    pub preconditions: Vec<Predicate>,
    pub add_effects: Vec<Predicate>,
    pub del_effects: Vec<Predicate>,
}

impl ActionTemplate {
    fn bind(&self, pattern: &Predicate, binding: &[String]) -> Predicate {
        Predicate {
            name: pattern.name.clone(),
            args: pattern
                .args
                .iter()
                .map(|arg| {
                    if let Some(position) = self.parameters.iter().position(|p| p == arg) {
                        binding[position].clone()
                    } else {
                        arg.clone()
                    }
                })
                .collect(),
        }
    }

    /// Applies the template under a parameter binding; None when a
    /// precondition fails or the gripper invariant would break.
    fn apply(&self, state: &WorldState, binding: &[String]) -> Option<WorldState> {
        for pattern in &self.preconditions {
            if !state.satisfies(&self.bind(pattern, binding)) {
                return None;
            }
        }
        let mut next = state.clone();
        for pattern in &self.del_effects {
            let predicate = self.bind(pattern, binding);
            match (predicate.name.as_str(), predicate.args.as_slice()) {
                ("holding", [obj]) => {
                    if next.holding.as_deref() == Some(obj) {
                        next.holding = None;
                    }
                }
                _ => {
                    next.facts.remove(&predicate);
                }
            }
        }
        for pattern in &self.add_effects {
            let predicate = self.bind(pattern, binding);
            match (predicate.name.as_str(), predicate.args.as_slice()) {
                ("robot_at", [loc]) => next.robot_at = loc.clone(),
                ("holding", [obj]) => match &next.holding {
                    Some(held) if held != obj => return None,
                    _ => next.holding = Some(obj.clone()),
                },
                _ => {
                    next.facts.insert(predicate);
                }
            }
        }
        Some(next)
    }
}

/// Parses the plain-text domain format: `action NAME ?p...` headers with
/// `pre`/`add`/`del` predicate lines.
pub fn parse_domain(text: &str) -> Result<Vec<ActionTemplate>, PlanError> {
    let mut templates: Vec<ActionTemplate> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| PlanError::BadDomain {
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut fields = line.split_whitespace();
        let kind = fields.next().expect("non-empty line");
        match kind {
            "action" => {
                let name = fields.next().ok_or_else(|| bad("action needs a name"))?;
                let parameters: Vec<String> = fields.map(str::to_string).collect();
                if parameters.iter().any(|p| !p.starts_with('?')) {
                    return Err(bad("parameters must start with '?'"));
                }
                templates.push(ActionTemplate {
                    name: name.to_string(),
                    parameters,
                    preconditions: Vec::new(),
                    add_effects: Vec::new(),
                    del_effects: Vec::new(),
                });
            }
            "pre" | "add" | "del" => {
                let template = templates
                    .last_mut()
                    .ok_or_else(|| bad("predicate line before any action"))?;
                let name = fields.next().ok_or_else(|| bad("predicate needs a name"))?;
                let args: Vec<String> = fields.map(str::to_string).collect();
                for arg in &args {
                    if arg.starts_with('?') && !template.parameters.contains(arg) {
                        return Err(bad(&format!("variable {arg} not in parameters")));
                    }
                }
                let predicate = Predicate {
                    name: name.to_string(),
                    args,
                };
                match kind {
                    "pre" => template.preconditions.push(predicate),
                    "add" => template.add_effects.push(predicate),
                    _ => template.del_effects.push(predicate),
                }
            }
            _ => return Err(bad("expected action/pre/add/del")),
        }
    }
    Ok(templates)
}

/// The action templates shipped with the crate, one set covering all
/// seven task types.
pub fn default_templates() -> Vec<ActionTemplate> {
    parse_domain(include_str!("../assets/domain.txt")).expect("bundled domain parses")
}

/// One ground step of a plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub name: String,
    pub args: Vec<String>,
    /// False while the step still waits for visual grounding.
    pub grounded: bool,
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for arg in &self.args {
            write!(f, " {arg}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub aborted: bool,
}

impl Plan {
    /// Index of the first step still awaiting grounding.
    pub fn pending_step(&self) -> Option<usize> {
        self.steps.iter().position(|s| !s.grounded)
    }

    /// Simulates the plan from `initial`, checking every precondition and
    /// the final goal.
    pub fn validate(
        &self,
        initial: &WorldState,
        goal: &[Predicate],
        templates: &[ActionTemplate],
    ) -> Result<(), PlanError> {
        let mut state = initial.clone();
        for (index, step) in self.steps.iter().enumerate() {
            let template = templates
                .iter()
                .find(|t| t.name == step.name)
                .ok_or_else(|| PlanError::UnknownAction(step.name.clone()))?;
            for pattern in &template.preconditions {
                let predicate = template.bind(pattern, &step.args);
                if !state.satisfies(&predicate) {
                    return Err(PlanError::PreconditionViolated {
                        step: index,
                        action: step.to_string(),
                        predicate: predicate.to_string(),
                    });
                }
            }
            state = template
                .apply(&state, &step.args)
                .ok_or_else(|| PlanError::PreconditionViolated {
                    step: index,
                    action: step.to_string(),
                    predicate: "holding".to_string(),
                })?;
        }
        for predicate in goal {
            if !state.satisfies(predicate) {
                return Err(PlanError::GoalUnsatisfied(predicate.to_string()));
            }
        }
        Ok(())
    }
}

/// Resolution delivered by the dialogue loop for a pending step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundingResolution {
    /// Ground to this concrete scene symbol.
    Object(String),
    /// Give up; truncate the plan here.
    Abort,
}

fn resolve_location(
    phrase_text: &str,
    knowledge: &BTreeMap<String, String>,
) -> Result<String, PlanError> {
    let lowered = phrase_text.to_lowercase();
    let stripped = lowered
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ");
    for key in [lowered.as_str(), stripped.as_str()] {
        if let Some(symbol) = knowledge.get(key) {
            return Ok(symbol.clone());
        }
    }
    let mut known: Vec<&str> = knowledge.keys().map(String::as_str).collect();
    known.sort_unstable();
    Err(PlanError::UnknownLocation {
        name: phrase_text.to_string(),
        known: known.join(", "),
    })
}

fn entity_symbol(phrase: &crate::instruction::ArgumentPhrase) -> String {
    let tokens = if phrase.object_tokens.is_empty() {
        phrase
            .tokens
            .iter()
            .map(|t| t.surface.to_lowercase())
            .filter(|w| !matches!(w.as_str(), "a" | "an" | "the"))
            .collect::<Vec<_>>()
    } else {
        phrase.object_tokens.clone()
    };
    tokens.join("_")
}

/// Instantiates the initial world state and goal for a parsed frame.
/// Locations named in the frame must resolve through the static knowledge
/// map (name -> location symbol).
pub fn encode_problem(
    frame: &TaskFrame,
    knowledge: &BTreeMap<String, String>,
) -> Result<(WorldState, Vec<Predicate>), PlanError> {
    let mut state = WorldState::initial();
    for symbol in knowledge.values() {
        state.facts.insert(Predicate::new("location", &[symbol]));
    }

    let require = |role: ArgRole| {
        frame
            .argument(role)
            .ok_or(PlanError::MissingArgument(role))
    };
    let resolve_role = |role: ArgRole| -> Result<String, PlanError> {
        resolve_location(&require(role)?.text(), knowledge)
    };

    let goal = match frame.task_type {
        TaskType::Taking | TaskType::Bringing => {
            let object = entity_symbol(require(ArgRole::Object)?);
            let source = match frame.argument(ArgRole::Source) {
                Some(phrase) => resolve_location(&phrase.text(), knowledge)?,
                None => START_LOCATION.to_string(),
            };
            state
                .facts
                .insert(Predicate::new("presumed_at", &[&object, &source]));
            vec![
                Predicate::new("holding", &[&object]),
                Predicate::new("robot_at", &[DESTINATION]),
            ]
        }
        TaskType::Motion => {
            let goal = resolve_role(ArgRole::Goal)?;
            vec![Predicate::new("robot_at", &[&goal])]
        }
        TaskType::Placing => {
            let object = entity_symbol(require(ArgRole::Object)?);
            let goal = resolve_role(ArgRole::Goal)?;
            state
                .facts
                .insert(Predicate::new("presumed_at", &[&object, &goal]));
            vec![Predicate::new("on", &[&object, &goal])]
        }
        TaskType::Searching => {
            let object = entity_symbol(require(ArgRole::Object)?);
            let area = match frame.argument(ArgRole::Area) {
                Some(phrase) => resolve_location(&phrase.text(), knowledge)?,
                None => START_LOCATION.to_string(),
            };
            vec![Predicate::new("searched", &[&object, &area])]
        }
        TaskType::ChangeState => {
            let device = entity_symbol(require(ArgRole::Device)?);
            let desired = entity_symbol(require(ArgRole::State)?);
            state
                .facts
                .insert(Predicate::new("presumed_at", &[&device, START_LOCATION]));
            vec![Predicate::new("operated", &[&device, &desired])]
        }
        TaskType::CheckState => {
            let object = entity_symbol(require(ArgRole::Object)?);
            let desired = entity_symbol(require(ArgRole::State)?);
            state
                .facts
                .insert(Predicate::new("presumed_at", &[&object, START_LOCATION]));
            vec![Predicate::new("asserted", &[&object, &desired])]
        }
    };
    Ok((state, goal))
}

fn bindings(parameters: usize, symbols: &[String]) -> Vec<Vec<String>> {
    let mut all = vec![Vec::new()];
    for _ in 0..parameters {
        let mut grown = Vec::with_capacity(all.len() * symbols.len());
        for prefix in &all {
            for symbol in symbols {
                let mut next = prefix.clone();
                next.push(symbol.clone());
                grown.push(next);
            }
        }
        all = grown;
    }
    all
}

/// Breadth-first search over ground action applications with duplicate
/// state elimination. Returns the shortest plan; ties resolve by template
/// order, then lexicographic argument order.
pub fn forward_search(
    initial: &WorldState,
    goal: &[Predicate],
    templates: &[ActionTemplate],
    max_depth: usize,
) -> Result<Plan, PlanError> {
    assert!(max_depth >= 1, "max_depth must be at least 1");
    if initial.satisfies_all(goal) {
        return Ok(Plan::default());
    }

    let mut symbols: BTreeSet<String> = initial.symbols();
    for predicate in goal {
        symbols.extend(predicate.args.iter().cloned());
    }
    let symbols: Vec<String> = symbols.into_iter().collect();

    struct Node {
        state: WorldState,
        parent: usize,
        step: Option<(String, Vec<String>)>,
        depth: usize,
    }

    let mut nodes = vec![Node {
        state: initial.clone(),
        parent: 0,
        step: None,
        depth: 0,
    }];
    let mut seen: HashSet<WorldState> = HashSet::new();
    seen.insert(initial.clone());
    let mut queue: VecDeque<usize> = VecDeque::new();
    queue.push_back(0);

    while let Some(current) = queue.pop_front() {
        let depth = nodes[current].depth;
        if depth >= max_depth {
            continue;
        }
        for template in templates {
            for binding in bindings(template.parameters.len(), &symbols) {
                let Some(next) = template.apply(&nodes[current].state, &binding) else {
                    continue;
                };
                if !seen.insert(next.clone()) {
                    continue;
                }
                let reached_goal = next.satisfies_all(goal);
                nodes.push(Node {
                    state: next,
                    parent: current,
                    step: Some((template.name.clone(), binding)),
                    depth: depth + 1,
                });
                let index = nodes.len() - 1;
                if reached_goal {
                    let mut steps = Vec::new();
                    let mut cursor = index;
                    while let Some((name, args)) = nodes[cursor].step.clone() {
                        let grounded = name != "LOCALIZE";
                        steps.push(PlanStep {
                            name,
                            args,
                            grounded,
                        });
                        cursor = nodes[cursor].parent;
                    }
                    steps.reverse();
                    return Ok(Plan {
                        steps,
                        aborted: false,
                    });
                }
                queue.push_back(index);
            }
        }
    }
    Err(PlanError::UnsatisfiableWithinDepth(max_depth))
}

/// Substitutes a grounded symbol into the pending step and every later
/// step, or truncates the plan on abort.
pub fn replan_after_grounding(
    plan: &Plan,
    step_index: usize,
    resolution: &GroundingResolution,
) -> Result<Plan, PlanError> {
    let step = plan
        .steps
        .get(step_index)
        .ok_or(PlanError::BadStepIndex(step_index))?;
    if step.grounded {
        return Err(PlanError::AlreadyGrounded(step_index));
    }
    let mut next = plan.clone();
    match resolution {
        GroundingResolution::Object(symbol) => {
            let placeholder = step.args[0].clone();
            for step in next.steps[step_index..].iter_mut() {
                for arg in step.args.iter_mut() {
                    if *arg == placeholder {
                        *arg = symbol.clone();
                    }
                }
            }
            next.steps[step_index].grounded = true;
        }
        GroundingResolution::Abort => {
            next.steps.truncate(step_index);
            next.aborted = true;
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::TokenRow;
    use crate::instruction::ArgumentPhrase;
    use crate::similarity::SemanticClass;

    fn phrase(words: &[&str], labels: &[SemanticClass]) -> ArgumentPhrase {
        ArgumentPhrase::new(TokenRow::words(words), labels.to_vec())
    }

    fn taking_frame() -> TaskFrame {
        use SemanticClass::{Attribute, Object, Other, SpatialLandmark};
        let mut arguments = BTreeMap::new();
        arguments.insert(
            ArgRole::Object,
            phrase(&["a", "red", "cup"], &[Other, Attribute, Object]),
        );
        arguments.insert(
            ArgRole::Source,
            phrase(&["the", "kitchen"], &[Other, SpatialLandmark]),
        );
        TaskFrame {
            task_type: TaskType::Taking,
            arguments,
        }
    }

    fn kitchen_knowledge() -> BTreeMap<String, String> {
        BTreeMap::from([("kitchen".to_string(), "kitchen".to_string())])
    }

    #[test]
    fn encode_taking_goal_contains_holding() {
        let (state, goal) = encode_problem(&taking_frame(), &kitchen_knowledge()).unwrap();
        assert!(goal.contains(&Predicate::new("holding", &["cup"])));
        assert!(state
            .facts
            .contains(&Predicate::new("presumed_at", &["cup", "kitchen"])));
        assert_eq!(state.robot_at, START_LOCATION);
    }

    #[test]
    fn encode_motion_goal_is_target_location() {
        use SemanticClass::{Other, SpatialLandmark};
        let mut arguments = BTreeMap::new();
        arguments.insert(
            ArgRole::Goal,
            phrase(&["the", "kitchen"], &[Other, SpatialLandmark]),
        );
        let frame = TaskFrame {
            task_type: TaskType::Motion,
            arguments,
        };
        let knowledge = BTreeMap::from([("kitchen".to_string(), "L1".to_string())]);
        let (_, goal) = encode_problem(&frame, &knowledge).unwrap();
        assert_eq!(goal, vec![Predicate::new("robot_at", &["L1"])]);
    }

    #[test]
    fn encode_unknown_location_lists_known_names() {
        use SemanticClass::{Object, Other, SpatialLandmark};
        let mut arguments = BTreeMap::new();
        arguments.insert(ArgRole::Object, phrase(&["a", "cup"], &[Other, Object]));
        arguments.insert(
            ArgRole::Source,
            phrase(&["the", "table"], &[Other, SpatialLandmark]),
        );
        arguments.insert(ArgRole::Beneficiary, phrase(&["me"], &[Other]));
        let frame = TaskFrame {
            task_type: TaskType::Bringing,
            arguments,
        };
        match encode_problem(&frame, &kitchen_knowledge()) {
            Err(PlanError::UnknownLocation { name, known }) => {
                assert_eq!(name, "the table");
                assert!(known.contains("kitchen"));
            }
            other => panic!("expected UnknownLocation, got {other:?}"),
        }
    }

    #[test]
    fn search_finds_the_canonical_taking_plan() {
        let (state, goal) = encode_problem(&taking_frame(), &kitchen_knowledge()).unwrap();
        let plan = forward_search(&state, &goal, &default_templates(), 6).unwrap();
        let rendered: Vec<String> = plan.steps.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            rendered,
            vec![
                "MOVE_TO kitchen",
                "LOCALIZE cup kitchen",
                "PICK_UP cup",
                "MOVE_TO destination",
            ]
        );
        assert_eq!(plan.pending_step(), Some(1));
        plan.validate(&state, &goal, &default_templates()).unwrap();
    }

    #[test]
    fn search_satisfied_goal_yields_empty_plan() {
        let state = WorldState::initial();
        let goal = vec![Predicate::new("robot_at", &[START_LOCATION])];
        let plan = forward_search(&state, &goal, &default_templates(), 3).unwrap();
        assert!(plan.steps.is_empty());
    }

    #[test]
    fn search_unreachable_goal_errors() {
        let mut state = WorldState::initial();
        state
            .facts
            .insert(Predicate::new("presumed_at", &["cup", "start"]));
        let goal = vec![Predicate::new("holding", &["cup"])];
        // Without PICK_UP the goal is unreachable.
        let templates: Vec<ActionTemplate> = default_templates()
            .into_iter()
            .filter(|t| t.name != "PICK_UP")
            .collect();
        assert!(matches!(
            forward_search(&state, &goal, &templates, 4),
            Err(PlanError::UnsatisfiableWithinDepth(4))
        ));
    }

    #[test]
    fn replan_substitutes_grounded_symbol() {
        let (state, goal) = encode_problem(&taking_frame(), &kitchen_knowledge()).unwrap();
        let plan = forward_search(&state, &goal, &default_templates(), 6).unwrap();
        let pending = plan.pending_step().unwrap();
        let replanned = replan_after_grounding(
            &plan,
            pending,
            &GroundingResolution::Object("cup_2".to_string()),
        )
        .unwrap();
        assert!(replanned.steps[pending].grounded);
        assert_eq!(replanned.steps[pending].args[0], "cup_2");
        assert_eq!(replanned.steps[pending + 1].args, vec!["cup_2"]);
    }

    #[test]
    fn replan_abort_truncates() {
        let (state, goal) = encode_problem(&taking_frame(), &kitchen_knowledge()).unwrap();
        let plan = forward_search(&state, &goal, &default_templates(), 6).unwrap();
        let pending = plan.pending_step().unwrap();
        let aborted =
            replan_after_grounding(&plan, pending, &GroundingResolution::Abort).unwrap();
        assert!(aborted.aborted);
        assert_eq!(aborted.steps.len(), pending);
    }

    #[test]
    fn replan_rejects_already_grounded_step() {
        let (state, goal) = encode_problem(&taking_frame(), &kitchen_knowledge()).unwrap();
        let plan = forward_search(&state, &goal, &default_templates(), 6).unwrap();
        assert!(matches!(
            replan_after_grounding(&plan, 0, &GroundingResolution::Abort),
            Err(PlanError::AlreadyGrounded(0))
        ));
    }

    #[test]
    fn domain_rejects_unbound_effect_variable() {
        let text = "action BAD ?x\nadd foo ?y\n";
        assert!(matches!(
            parse_domain(text),
            Err(PlanError::BadDomain { line: 2, .. })
        ));
    }

    #[test]
    fn search_plan_is_minimal_at_desk_scale() {
        // Exhaustively verify no shorter valid plan exists.
        let (state, goal) = encode_problem(&taking_frame(), &kitchen_knowledge()).unwrap();
        let templates = default_templates();
        let plan = forward_search(&state, &goal, &templates, 6).unwrap();

        let mut symbols: BTreeSet<String> = state.symbols();
        for predicate in &goal {
            symbols.extend(predicate.args.iter().cloned());
        }
        let symbols: Vec<String> = symbols.into_iter().collect();

        fn shorter_plan_exists(
            state: &WorldState,
            goal: &[Predicate],
            templates: &[ActionTemplate],
            symbols: &[String],
            remaining: usize,
        ) -> bool {
            if state.satisfies_all(goal) {
                return true;
            }
            if remaining == 0 {
                return false;
            }
            for template in templates {
                let mut bindings = vec![Vec::new()];
                for _ in 0..template.parameters.len() {
                    let mut grown = Vec::new();
                    for prefix in &bindings {
                        for symbol in symbols {
                            let mut next: Vec<String> = prefix.clone();
                            next.push(symbol.clone());
                            grown.push(next);
                        }
                    }
                    bindings = grown;
                }
                for binding in bindings {
                    if let Some(next) = template.apply(state, &binding) {
                        if shorter_plan_exists(&next, goal, templates, symbols, remaining - 1) {
                            return true;
                        }
                    }
                }
            }
            false
        }

        assert!(!shorter_plan_exists(
            &state,
            &goal,
            &templates,
            &symbols,
            plan.steps.len() - 1
        ));
    }
}
