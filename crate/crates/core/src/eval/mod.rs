//! Evaluation: per-label F1 metrics, the parameter grid search, dataset
//! file I/O, and a synthetic corpus generator standing in for the
//! unavailable annotated datasets.

pub mod synthetic;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::crf::CrfModel;
use crate::disambiguation::{identify_state, suppress_redundancy, AmbiguityState, Cutoffs};
use crate::embeddings::EmbeddingTable;
use crate::instruction::{parse_instruction, ArgumentPhrase};
use crate::scene::{annotate_scene, load_scene, Scene};
use crate::similarity::{rank_captions, ClassWeights};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions and gold differ in length ({predictions} vs {gold})")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("cannot score an empty label list")]
    Empty,
    #[error("dataset file {path} line {line}: {reason}")]
    BadDataset {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error("grid is empty on axis {0}")]
    EmptyGrid(&'static str),
    #[error("grid value {0} outside (0,1)")]
    GridValueOutOfRange(f64),
}

/// Precision/recall/F1 for one label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Per-label scores plus the unweighted mean over labels present in gold.
#[derive(Debug, Clone, PartialEq)]
pub struct F1Report {
    pub per_label: Vec<LabelScore>,
    pub macro_f1: f64,
}

impl F1Report {
    pub fn score_for(&self, label: &str) -> Option<&LabelScore> {
        self.per_label.iter().find(|s| s.label == label)
    }
}

/// One-vs-rest precision/recall/F1 per label. The macro average runs over
/// labels that appear in gold; labels only ever predicted are reported but
/// excluded from the average.
pub fn f1_report(predictions: &[String], gold: &[String]) -> Result<F1Report, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut labels: Vec<String> = Vec::new();
    for label in gold.iter().chain(predictions) {
        if !labels.contains(label) {
            labels.push(label.clone());
        }
    }
    labels.sort();

    let mut per_label = Vec::with_capacity(labels.len());
    let mut macro_sum = 0.0;
    let mut macro_count = 0usize;
    for label in &labels {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (p, g) in predictions.iter().zip(gold) {
            match (p == label, g == label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let support = tp + fn_;
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if support == 0 {
            0.0
        } else {
            tp as f64 / support as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        if support > 0 {
            macro_sum += f1;
            macro_count += 1;
        }
        per_label.push(LabelScore {
            label: label.clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(F1Report {
        per_label,
        macro_f1: macro_sum / macro_count.max(1) as f64,
    })
}

/// Renders the per-label table: one row per label, then the macro average.
pub fn format_report(report: &F1Report) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<18} {:>9} {:>9} {:>9} {:>9}\n",
        "label", "precision", "recall", "f1", "support"
    ));
    for score in &report.per_label {
        out.push_str(&format!(
            "{:<18} {:>9.3} {:>9.3} {:>9.3} {:>9}\n",
            score.label, score.precision, score.recall, score.f1, score.support
        ));
    }
    out.push_str(&format!("{:<18} {:>29} {:>9.3}\n", "Avg.", "macro-f1", report.macro_f1));
    out
}

/// One scene/instruction/gold-state triple.
#[derive(Debug, Clone, PartialEq)]
pub struct StateExample {
    pub scene: Scene,
    pub instruction: String,
    pub gold: AmbiguityState,
}

/// The state-identification dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateDataset {
    pub examples: Vec<StateExample>,
}

impl StateDataset {
    /// Writes `dataset.tsv` plus one scene file per example under
    /// `dir/scenes/`, returning the dataset path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, EvalError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| EvalError::Io {
                path: path.clone(),
                source,
            }
        };
        let scenes_dir = dir.join("scenes");
        fs::create_dir_all(&scenes_dir).map_err(io_err(&scenes_dir))?;
        let mut lines = String::new();
        for (i, example) in self.examples.iter().enumerate() {
            let rel = format!("scenes/scene_{i:04}.json");
            let records: Vec<(crate::scene::BoundingBox, String)> = example
                .scene
                .captions
                .iter()
                .map(|c| (c.bbox, c.text.clone()))
                .collect();
            let path = dir.join(&rel);
            fs::write(&path, crate::scene::scene_to_json(&records)).map_err(io_err(&path))?;
            lines.push_str(&format!(
                "{rel}\t{}\t{}\n",
                example.instruction, example.gold
            ));
        }
        let dataset_path = dir.join("dataset.tsv");
        fs::write(&dataset_path, lines).map_err(io_err(&dataset_path))?;
        Ok(dataset_path)
    }

    /// Loads a dataset file; scene paths resolve relative to it.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: display.clone(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut examples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(EvalError::BadDataset {
                    path: display.clone(),
                    line: i + 1,
                    reason: format!("expected 3 tab-separated fields, found {}", parts.len()),
                });
            }
            let gold: AmbiguityState =
                parts[2]
                    .trim()
                    .parse()
                    .map_err(|reason| EvalError::BadDataset {
                        path: display.clone(),
                        line: i + 1,
                        reason,
                    })?;
            let scene = load_scene(base.join(parts[0]))?;
            examples.push(StateExample {
                scene,
                instruction: parts[1].to_string(),
                gold,
            });
        }
        Ok(Self { examples })
    }
}

/// How instructions and captions get their labels during evaluation.
pub enum Labeling<'a> {
    /// The trained CRFs: task and argument models extract the grounding
    /// argument, the semantic model labels argument and captions.
    Models {
        task: &'a CrfModel,
        argument: &'a CrfModel,
        semantic: &'a CrfModel,
    },
    /// Perfect lexicon-derived labels for the synthetic world.
    Oracle,
}

/// A dataset example reduced to what the grounding stages consume.
#[derive(Debug, Clone)]
pub struct PreparedExample {
    pub argument: Option<ArgumentPhrase>,
    pub scene: Scene,
    pub gold: AmbiguityState,
}

/// Extracts arguments and annotates scenes once, so grid points only pay
/// for rank -> suppress -> identify.
pub fn prepare_examples(dataset: &StateDataset, labeling: &Labeling) -> Vec<PreparedExample> {
    dataset
        .examples
        .iter()
        .map(|example| {
            let mut scene = example.scene.clone();
            let argument = match labeling {
                Labeling::Models {
                    task,
                    argument,
                    semantic,
                } => {
                    annotate_scene(&mut scene, semantic);
                    parse_instruction(&example.instruction, task, argument, semantic)
                        .ok()
                        .and_then(|frame| {
                            frame.grounding_argument().map(|(_, phrase)| phrase.clone())
                        })
                }
                Labeling::Oracle => {
                    synthetic::oracle_annotate(&mut scene);
                    Some(synthetic::oracle_argument(&example.instruction))
                }
            };
            PreparedExample {
                argument,
                scene,
                gold: example.gold,
            }
        })
        .collect()
}

/// Runs rank -> suppress -> identify for one prepared example. A `None`
/// argument (instruction parse failure) yields no state.
pub fn predict_state(
    example: &PreparedExample,
    table: &EmbeddingTable,
    weights: &ClassWeights,
    cutoffs: &Cutoffs,
) -> Option<AmbiguityState> {
    let argument = example.argument.as_ref()?;
    let ranked = rank_captions(argument, &example.scene, table, weights);
    let candidates = suppress_redundancy(&ranked, argument, cutoffs, table, weights);
    Some(identify_state(&candidates).state)
}

/// Label recorded when the instruction could not be parsed; never present
/// in gold, so it only costs recall on the gold class.
pub const PARSE_FAILURE_LABEL: &str = "PARSE_ERROR";

/// Predicts every example and scores states against gold.
pub fn evaluate_states(
    prepared: &[PreparedExample],
    table: &EmbeddingTable,
    weights: &ClassWeights,
    cutoffs: &Cutoffs,
) -> Result<F1Report, EvalError> {
    let predictions: Vec<String> = prepared
        .iter()
        .map(|example| {
            predict_state(example, table, weights, cutoffs)
                .map(|s| s.code().to_string())
                .unwrap_or_else(|| PARSE_FAILURE_LABEL.to_string())
        })
        .collect();
    let gold: Vec<String> = prepared.iter().map(|e| e.gold.code().to_string()).collect();
    f1_report(&predictions, &gold)
}

/// Value lists per tuned axis, all strictly inside (0,1).
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub object: Vec<f64>,
    pub attribute: Vec<f64>,
    pub spatial_landmark: Vec<f64>,
    pub other: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        // 0.1 steps over (0,1) for the cutoffs; a coarse lattice over the
        // class weights (only their ratios matter after normalization).
        let tenths: Vec<f64> = (1..10).map(|i| f64::from(i) / 10.0).collect();
        Self {
            object: vec![0.5, 0.6, 0.7, 0.8],
            attribute: vec![0.2, 0.3],
            spatial_landmark: vec![0.05, 0.1],
            other: vec![0.05],
            alpha: tenths.clone(),
            beta: tenths,
        }
    }
}

impl GridConfig {
    fn validate(&self) -> Result<(), EvalError> {
        let axes: [(&'static str, &Vec<f64>); 6] = [
            ("object", &self.object),
            ("attribute", &self.attribute),
            ("spatial_landmark", &self.spatial_landmark),
            ("other", &self.other),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
        ];
        for (name, values) in axes {
            if values.is_empty() {
                return Err(EvalError::EmptyGrid(name));
            }
            for &value in values {
                if !(0.0 < value && value < 1.0) {
                    return Err(EvalError::GridValueOutOfRange(value));
                }
            }
        }
        Ok(())
    }
}

/// Exhaustive grid search maximizing state accuracy over the validation
/// examples. Ties keep the earliest point in lexicographic grid order.
pub fn grid_search(
    prepared: &[PreparedExample],
    grid: &GridConfig,
    table: &EmbeddingTable,
) -> Result<(ClassWeights, Cutoffs, f64), EvalError> {
    if prepared.is_empty() {
        return Err(EvalError::Empty);
    }
    grid.validate()?;
    let mut best: Option<(ClassWeights, Cutoffs, f64)> = None;
    for &object in &grid.object {
        for &attribute in &grid.attribute {
            for &spatial_landmark in &grid.spatial_landmark {
                for &other in &grid.other {
                    let weights = ClassWeights::new(object, attribute, spatial_landmark, other)
                        .expect("grid values are positive");
                    for &alpha in &grid.alpha {
                        for &beta in &grid.beta {
                            let cutoffs = Cutoffs::new(alpha, beta).expect("grid values in (0,1)");
                            let correct = prepared
                                .iter()
                                .filter(|example| {
                                    predict_state(example, table, &weights, &cutoffs)
                                        == Some(example.gold)
                                })
                                .count();
                            let accuracy = correct as f64 / prepared.len() as f64;
                            if best
                                .as_ref()
                                .map_or(true, |(_, _, best_acc)| accuracy > *best_acc)
                            {
                                best = Some((weights, cutoffs, accuracy));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(best.expect("grid validated non-empty"))
}

/// Shuffled train/test split, seeded.
pub fn train_test_split<T: Clone>(data: &[T], test_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let test_len = ((data.len() as f64) * test_fraction).round() as usize;
    let (test_idx, train_idx) = order.split_at(test_len.min(data.len()));
    (
        train_idx.iter().map(|&i| data[i].clone()).collect(),
        test_idx.iter().map(|&i| data[i].clone()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::TokenRow;
    use crate::similarity::SemanticClass;

    fn strings(values: &[&str]) -> Vec<String> {
        values.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let gold = strings(&["A", "B", "A", "C"]);
        let report = f1_report(&gold, &gold).unwrap();
        assert!((report.macro_f1 - 1.0).abs() < 1e-12);
        for score in &report.per_label {
            assert!((score.f1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_predictor_scores_match_hand_arithmetic() {
        // All-"A" predictions on balanced {A,B} gold: A has P=0.5, R=1,
        // F1=2/3; B has F1=0; macro 1/3.
        let predictions = strings(&["A", "A", "A", "A"]);
        let gold = strings(&["A", "B", "A", "B"]);
        let report = f1_report(&predictions, &gold).unwrap();
        assert!((report.score_for("A").unwrap().f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.score_for("B").unwrap().f1, 0.0);
        assert!((report.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn never_predicted_label_scores_zero() {
        let predictions = strings(&["A", "A"]);
        let gold = strings(&["A", "C"]);
        let report = f1_report(&predictions, &gold).unwrap();
        assert_eq!(report.score_for("C").unwrap().f1, 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(
            f1_report(&strings(&["A"]), &strings(&["A", "B"])),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            f1_report(&[], &[]),
            Err(EvalError::Empty)
        ));
    }

    fn one_hot_table(words: &[&str]) -> EmbeddingTable {
        let mut table = EmbeddingTable::new(words.len()).unwrap();
        for (i, word) in words.iter().enumerate() {
            let mut v = vec![0.0; words.len()];
            v[i] = 1.0;
            table.insert(word, v);
        }
        table
    }

    fn prepared(
        argument_words: &[(&str, SemanticClass)],
        captions: &[(&str, &[(&str, SemanticClass)])],
        gold: AmbiguityState,
    ) -> PreparedExample {
        let argument = ArgumentPhrase::new(
            argument_words
                .iter()
                .map(|(w, _)| TokenRow::new(*w))
                .collect(),
            argument_words.iter().map(|(_, c)| *c).collect(),
        );
        let mut scene = Scene::default();
        for (i, (text, labels)) in captions.iter().enumerate() {
            let mut caption = crate::scene::SceneCaption::new(
                crate::scene::BoundingBox::new(i as f64 * 100.0, 0.0, 20.0, 20.0),
                *text,
            );
            caption.set_labels(labels.iter().map(|(_, c)| *c).collect());
            scene.captions.push(caption);
        }
        PreparedExample {
            argument: Some(argument),
            scene,
            gold,
        }
    }

    use SemanticClass::{Attribute, Object, Other};

    /// Examples whose gold states need the mid-range alpha: the heavily
    /// attributed argument keeps the bare-object candidate near relevance
    /// 0.75, so alpha=0.6 keeps it (gold ANF) while alpha=0.8 drops it.
    fn alpha_sensitive_examples() -> (Vec<PreparedExample>, EmbeddingTable) {
        let table = one_hot_table(&["red", "shiny", "tall", "cup", "a", "the"]);
        let argument: &[(&str, SemanticClass)] = &[
            ("red", Attribute),
            ("shiny", Attribute),
            ("tall", Attribute),
            ("cup", Object),
        ];
        let caption: &[(&str, SemanticClass)] = &[("a", Other), ("cup", Object)];
        let examples: Vec<PreparedExample> = (0..5)
            .map(|_| prepared(argument, &[("a cup", caption)], AmbiguityState::Anf))
            .collect();
        (examples, table)
    }

    #[test]
    fn grid_search_single_point_reports_its_accuracy() {
        let (examples, table) = alpha_sensitive_examples();
        let grid = GridConfig {
            object: vec![0.6],
            attribute: vec![0.3],
            spatial_landmark: vec![0.05],
            other: vec![0.05],
            alpha: vec![0.6],
            beta: vec![0.5],
        };
        let (_, cutoffs, accuracy) = grid_search(&examples, &grid, &table).unwrap();
        assert_eq!(cutoffs.alpha, 0.6);
        assert!((accuracy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_search_finds_the_separating_point() {
        let (examples, table) = alpha_sensitive_examples();
        let grid = GridConfig {
            object: vec![0.6],
            attribute: vec![0.3],
            spatial_landmark: vec![0.05],
            other: vec![0.05],
            alpha: vec![0.8, 0.6],
            beta: vec![0.5],
        };
        let (_, cutoffs, accuracy) = grid_search(&examples, &grid, &table).unwrap();
        assert_eq!(cutoffs.alpha, 0.6);
        assert!((accuracy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_search_tie_keeps_earlier_point() {
        let (examples, table) = alpha_sensitive_examples();
        // Both alphas keep the candidate, so accuracy ties and the first
        // grid point must win.
        let grid = GridConfig {
            object: vec![0.6],
            attribute: vec![0.3],
            spatial_landmark: vec![0.05],
            other: vec![0.05],
            alpha: vec![0.3, 0.4],
            beta: vec![0.5],
        };
        let (_, cutoffs, _) = grid_search(&examples, &grid, &table).unwrap();
        assert_eq!(cutoffs.alpha, 0.3);
    }

    #[test]
    fn grid_accuracy_dominates_every_point() {
        let (examples, table) = alpha_sensitive_examples();
        let grid = GridConfig {
            object: vec![0.6],
            attribute: vec![0.3],
            spatial_landmark: vec![0.05],
            other: vec![0.05],
            alpha: vec![0.2, 0.6, 0.8],
            beta: vec![0.3, 0.5],
        };
        let (_, _, best) = grid_search(&examples, &grid, &table).unwrap();
        for &alpha in &grid.alpha {
            for &beta in &grid.beta {
                let weights = ClassWeights::new(0.6, 0.3, 0.05, 0.05).unwrap();
                let cutoffs = Cutoffs::new(alpha, beta).unwrap();
                let correct = examples
                    .iter()
                    .filter(|e| predict_state(e, &table, &weights, &cutoffs) == Some(e.gold))
                    .count();
                assert!(best + 1e-12 >= correct as f64 / examples.len() as f64);
            }
        }
    }

    #[test]
    fn grid_rejects_out_of_range_values() {
        let (examples, table) = alpha_sensitive_examples();
        let grid = GridConfig {
            alpha: vec![1.0],
            ..GridConfig::default()
        };
        assert!(matches!(
            grid_search(&examples, &grid, &table),
            Err(EvalError::GridValueOutOfRange(_))
        ));
    }
}
