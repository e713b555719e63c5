//! Maximum-likelihood CRF training: L2-regularized conditional
//! log-likelihood maximized by mini-batch gradient ascent, with
//! forward-backward supplying the feature expectations.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{extract_features, CrfError, CrfModel, LabeledSequence};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Sequences per gradient step.
    pub batch_size: usize,
    /// Fixes the label alphabet up front; labels are otherwise collected
    /// from the data in first-appearance order.
    pub alphabet: Option<Vec<String>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2: 0.01,
            epochs: 30,
            learning_rate: 0.2,
            seed: 42,
            batch_size: 8,
            alphabet: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CrfModel,
    /// Regularized conditional log-likelihood after each accepted epoch;
    /// non-decreasing because decreasing epochs are retried at a halved
    /// learning rate.
    pub objective_history: Vec<f64>,
}

/// Per-weight derivative of the regularized conditional log-likelihood.
#[derive(Debug, Clone, Default)]
pub struct Gradient {
    pub emission: HashMap<(String, String), f64>,
    pub transition: HashMap<(String, String), f64>,
}

struct Prepared {
    /// Feature indices per position, parallel to the sequence rows.
    features: Vec<Vec<usize>>,
    /// Gold label indices.
    labels: Vec<usize>,
}

struct Workspace {
    n_labels: usize,
    feature_index: HashMap<String, usize>,
    feature_names: Vec<String>,
    /// Emission weights laid out [feature][label].
    emission: Vec<Vec<f64>>,
    /// Transition weights laid out [prev][next].
    transition: Vec<Vec<f64>>,
}

fn validate(data: &[LabeledSequence], labels: &[String]) -> Result<(), CrfError> {
    for (index, seq) in data.iter().enumerate() {
        if seq.rows.len() != seq.labels.len() {
            return Err(CrfError::LengthMismatch {
                index,
                rows: seq.rows.len(),
                labels: seq.labels.len(),
            });
        }
        for label in &seq.labels {
            if !labels.contains(label) {
                return Err(CrfError::UnknownLabel {
                    index,
                    label: label.clone(),
                });
            }
        }
    }
    Ok(())
}

fn collect_alphabet(data: &[LabeledSequence]) -> Vec<String> {
    let mut labels = Vec::new();
    for seq in data {
        for label in &seq.labels {
            if !labels.contains(label) {
                labels.push(label.clone());
            }
        }
    }
    labels
}

impl Workspace {
    fn build(data: &[LabeledSequence], labels: &[String]) -> (Self, Vec<Prepared>) {
        let mut feature_index: HashMap<String, usize> = HashMap::new();
        let mut feature_names = Vec::new();
        let mut prepared = Vec::with_capacity(data.len());
        for seq in data {
            let mut features = Vec::with_capacity(seq.rows.len());
            for position in 0..seq.rows.len() {
                let ids: Vec<usize> = extract_features(&seq.rows, position)
                    .into_iter()
                    .map(|f| {
                        *feature_index.entry(f.clone()).or_insert_with(|| {
                            feature_names.push(f);
                            feature_names.len() - 1
                        })
                    })
                    .collect();
                features.push(ids);
            }
            let gold = seq
                .labels
                .iter()
                .map(|l| labels.iter().position(|x| x == l).expect("validated"))
                .collect();
            prepared.push(Prepared {
                features,
                labels: gold,
            });
        }
        let n_labels = labels.len();
        let n_features = feature_names.len();
        (
            Self {
                n_labels,
                feature_index,
                feature_names,
                emission: vec![vec![0.0; n_labels]; n_features],
                transition: vec![vec![0.0; n_labels]; n_labels],
            },
            prepared,
        )
    }

    fn lattice(&self, seq: &Prepared) -> Vec<Vec<f64>> {
        seq.features
            .iter()
            .map(|ids| {
                let mut scores = vec![0.0; self.n_labels];
                for &id in ids {
                    for (s, w) in scores.iter_mut().zip(&self.emission[id]) {
                        *s += w;
                    }
                }
                scores
            })
            .collect()
    }

    /// Forward pass in log space; returns (alpha, log Z).
    fn forward(&self, lattice: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
        let n = lattice.len();
        let mut alpha = vec![vec![0.0; self.n_labels]; n];
        alpha[0].clone_from_slice(&lattice[0]);
        for i in 1..n {
            for next in 0..self.n_labels {
                let terms: Vec<f64> = (0..self.n_labels)
                    .map(|prev| alpha[i - 1][prev] + self.transition[prev][next])
                    .collect();
                alpha[i][next] = log_sum_exp(&terms) + lattice[i][next];
            }
        }
        let log_z = log_sum_exp(&alpha[n - 1]);
        (alpha, log_z)
    }

    fn backward(&self, lattice: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = lattice.len();
        let mut beta = vec![vec![0.0; self.n_labels]; n];
        for i in (0..n - 1).rev() {
            for prev in 0..self.n_labels {
                let terms: Vec<f64> = (0..self.n_labels)
                    .map(|next| self.transition[prev][next] + lattice[i + 1][next] + beta[i + 1][next])
                    .collect();
                beta[i][prev] = log_sum_exp(&terms);
            }
        }
        beta
    }

    fn gold_score(&self, seq: &Prepared, lattice: &[Vec<f64>]) -> f64 {
        let mut score = 0.0;
        for (i, &label) in seq.labels.iter().enumerate() {
            score += lattice[i][label];
            if i > 0 {
                score += self.transition[seq.labels[i - 1]][label];
            }
        }
        score
    }

    fn log_likelihood(&self, prepared: &[Prepared]) -> f64 {
        prepared
            .iter()
            .map(|seq| {
                let lattice = self.lattice(seq);
                let (_, log_z) = self.forward(&lattice);
                self.gold_score(seq, &lattice) - log_z
            })
            .sum()
    }

    fn regularizer(&self) -> f64 {
        let emission: f64 = self
            .emission
            .iter()
            .flat_map(|row| row.iter())
            .map(|w| w * w)
            .sum();
        let transition: f64 = self
            .transition
            .iter()
            .flat_map(|row| row.iter())
            .map(|w| w * w)
            .sum();
        emission + transition
    }

    fn objective(&self, prepared: &[Prepared], l2: f64) -> f64 {
        self.log_likelihood(prepared) - 0.5 * l2 * self.regularizer()
    }

    /// Accumulates observed-minus-expected counts for one sequence into the
    /// given gradient buffers.
    fn accumulate(
        &self,
        seq: &Prepared,
        grad_emission: &mut [Vec<f64>],
        grad_transition: &mut [Vec<f64>],
    ) {
        let lattice = self.lattice(seq);
        let (alpha, log_z) = self.forward(&lattice);
        let beta = self.backward(&lattice);
        let n = lattice.len();

        for i in 0..n {
            let gold = seq.labels[i];
            for &id in &seq.features[i] {
                grad_emission[id][gold] += 1.0;
            }
            for label in 0..self.n_labels {
                let marginal = (alpha[i][label] + beta[i][label] - log_z).exp();
                for &id in &seq.features[i] {
                    grad_emission[id][label] -= marginal;
                }
            }
            if i > 0 {
                grad_transition[seq.labels[i - 1]][gold] += 1.0;
                for prev in 0..self.n_labels {
                    for next in 0..self.n_labels {
                        let marginal = (alpha[i - 1][prev]
                            + self.transition[prev][next]
                            + lattice[i][next]
                            + beta[i][next]
                            - log_z)
                            .exp();
                        grad_transition[prev][next] -= marginal;
                    }
                }
            }
        }
    }

    fn into_model(self, labels: &[String]) -> CrfModel {
        let mut model = CrfModel::new(labels).expect("alphabet validated before training");
        for (p, row) in self.transition.iter().enumerate() {
            for (n, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    model.set_transition_weight(&labels[p], &labels[n], w);
                }
            }
        }
        for (id, name) in self.feature_names.iter().enumerate() {
            for (idx, &w) in self.emission[id].iter().enumerate() {
                if w != 0.0 {
                    model.set_feature_weight(name, &labels[idx], w);
                }
            }
        }
        model
    }

    fn load_model(&mut self, model: &CrfModel) {
        for (feature, per_label) in &model.feature_weights {
            if let Some(&id) = self.feature_index.get(feature) {
                self.emission[id].clone_from(per_label);
            }
        }
        self.transition.clone_from(&model.transition_weights);
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Trains a model by mini-batch gradient ascent. Deterministic for a given
/// seed; an epoch that lowers the objective is rolled back and retried at
/// half the learning rate so the recorded history never decreases.
pub fn train(data: &[LabeledSequence], config: &TrainConfig) -> Result<TrainOutcome, CrfError> {
    if data.is_empty() {
        return Err(CrfError::EmptyData);
    }
    let labels = match &config.alphabet {
        Some(alphabet) => {
            let mut seen = std::collections::HashSet::new();
            if alphabet.is_empty() || !alphabet.iter().all(|l| seen.insert(l)) {
                return Err(CrfError::BadAlphabet);
            }
            alphabet.clone()
        }
        None => collect_alphabet(data),
    };
    validate(data, &labels)?;

    let (mut ws, prepared) = Workspace::build(data, &labels);
    let n_sequences = prepared.len();
    let batch_size = config.batch_size.max(1);
    let reg_scale = |batch_len: usize| config.l2 * batch_len as f64 / n_sequences as f64;

    let mut history = Vec::with_capacity(config.epochs);
    let mut learning_rate = config.learning_rate;
    let mut previous = if config.epochs > 0 {
        ws.objective(&prepared, config.l2)
    } else {
        0.0
    };
    let mut epoch = 0usize;
    let mut halvings = 0usize;
    while epoch < config.epochs {
        let snapshot_emission = ws.emission.clone();
        let snapshot_transition = ws.transition.clone();

        let mut order: Vec<usize> = (0..n_sequences).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(
            config.seed.wrapping_add((epoch as u64).wrapping_mul(0x9e37_79b9)),
        );
        order.shuffle(&mut rng);

        for batch in order.chunks(batch_size) {
            let mut grad_emission = vec![vec![0.0; ws.n_labels]; ws.emission.len()];
            let mut grad_transition = vec![vec![0.0; ws.n_labels]; ws.n_labels];
            for &idx in batch {
                ws.accumulate(&prepared[idx], &mut grad_emission, &mut grad_transition);
            }
            let scale = reg_scale(batch.len());
            for (row, grad) in ws.emission.iter_mut().zip(&grad_emission) {
                for (w, g) in row.iter_mut().zip(grad) {
                    *w += learning_rate * (g - scale * *w);
                }
            }
            for (row, grad) in ws.transition.iter_mut().zip(&grad_transition) {
                for (w, g) in row.iter_mut().zip(grad) {
                    *w += learning_rate * (g - scale * *w);
                }
            }
        }

        let objective = ws.objective(&prepared, config.l2);
        if objective + 1e-12 < previous {
            ws.emission = snapshot_emission;
            ws.transition = snapshot_transition;
            learning_rate *= 0.5;
            halvings += 1;
            if halvings > 20 {
                break;
            }
            continue;
        }
        history.push(objective);
        previous = objective;
        epoch += 1;
    }

    Ok(TrainOutcome {
        model: ws.into_model(&labels),
        objective_history: history,
    })
}

/// Regularized conditional log-likelihood of `data` under `model` together
/// with its analytic gradient. The gradient covers every feature observed
/// in the data plus every transition pair.
pub fn objective_and_gradient(
    model: &CrfModel,
    data: &[LabeledSequence],
    l2: f64,
) -> Result<(f64, Gradient), CrfError> {
    if data.is_empty() {
        return Err(CrfError::EmptyData);
    }
    let labels = model.labels().to_vec();
    validate(data, &labels)?;
    let (mut ws, prepared) = Workspace::build(data, &labels);
    ws.load_model(model);

    let mut grad_emission = vec![vec![0.0; ws.n_labels]; ws.emission.len()];
    let mut grad_transition = vec![vec![0.0; ws.n_labels]; ws.n_labels];
    for seq in &prepared {
        ws.accumulate(seq, &mut grad_emission, &mut grad_transition);
    }

    let mut gradient = Gradient::default();
    for (id, name) in ws.feature_names.iter().enumerate() {
        for (idx, label) in labels.iter().enumerate() {
            let value = grad_emission[id][idx] - l2 * ws.emission[id][idx];
            gradient
                .emission
                .insert((name.clone(), label.clone()), value);
        }
    }
    for (p, prev) in labels.iter().enumerate() {
        for (n, next) in labels.iter().enumerate() {
            let value = grad_transition[p][n] - l2 * ws.transition[p][n];
            gradient
                .transition
                .insert((prev.clone(), next.clone()), value);
        }
    }

    // Regularize over the weights the gradient covers: features observed in
    // the data plus all transitions, matching the perturbation space of a
    // finite-difference check.
    let objective = ws.objective(&prepared, l2);
    Ok((objective, gradient))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::TokenRow;

    fn seq(words: &[&str], labels: &[&str]) -> LabeledSequence {
        LabeledSequence::new(
            TokenRow::words(words),
            labels.iter().map(|l| l.to_string()).collect(),
        )
    }

    #[test]
    fn empty_data_is_rejected() {
        assert!(matches!(
            train(&[], &TrainConfig::default()),
            Err(CrfError::EmptyData)
        ));
    }

    #[test]
    fn unknown_label_names_the_sequence() {
        let data = vec![seq(&["a"], &["x"]), seq(&["b"], &["zzz"])];
        let config = TrainConfig {
            alphabet: Some(vec!["x".into()]),
            ..TrainConfig::default()
        };
        match train(&data, &config) {
            Err(CrfError::UnknownLabel { index, label }) => {
                assert_eq!(index, 1);
                assert_eq!(label, "zzz");
            }
            other => panic!("expected UnknownLabel, got {other:?}"),
        }
    }

    #[test]
    fn zero_epochs_yields_zero_weights() {
        let data = vec![seq(&["red", "cup"], &["attribute", "object"])];
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let outcome = train(&data, &config).unwrap();
        assert_eq!(outcome.model.n_features(), 0);
        assert!(outcome.objective_history.is_empty());
        for a in outcome.model.labels() {
            for b in outcome.model.labels() {
                assert_eq!(outcome.model.transition_weight(a, b), 0.0);
            }
        }
    }

    #[test]
    fn memorizes_a_repeated_pattern() {
        let data: Vec<LabeledSequence> = (0..50)
            .map(|_| seq(&["red", "cup"], &["attribute", "object"]))
            .collect();
        let outcome = train(&data, &TrainConfig::default()).unwrap();
        let decoded = outcome.model.viterbi(&TokenRow::words(&["red", "cup"]));
        assert_eq!(decoded, vec!["attribute", "object"]);
    }

    #[test]
    fn objective_history_is_non_decreasing() {
        let data: Vec<LabeledSequence> = (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    seq(&["red", "cup"], &["attribute", "object"])
                } else {
                    seq(&["the", "mug"], &["other", "object"])
                }
            })
            .collect();
        let outcome = train(&data, &TrainConfig::default()).unwrap();
        for pair in outcome.objective_history.windows(2) {
            assert!(pair[1] + 1e-9 >= pair[0]);
        }
    }

    #[test]
    fn separable_toy_task_reaches_perfect_heldout_accuracy() {
        // label = (token == "x") is fully determined by the word feature.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        use rand::Rng;
        let vocab = ["x", "y", "z", "w"];
        let make = |rng: &mut rand_chacha::ChaCha8Rng| {
            let len = rng.gen_range(2..6);
            let words: Vec<&str> = (0..len).map(|_| vocab[rng.gen_range(0..4)]).collect();
            let labels: Vec<&str> = words
                .iter()
                .map(|w| if *w == "x" { "X" } else { "O" })
                .collect();
            seq(&words, &labels)
        };
        let train_data: Vec<LabeledSequence> = (0..100).map(|_| make(&mut rng)).collect();
        let test_data: Vec<LabeledSequence> = (0..30).map(|_| make(&mut rng)).collect();
        let outcome = train(&train_data, &TrainConfig::default()).unwrap();
        let mut correct = 0usize;
        let mut total = 0usize;
        for s in &test_data {
            let decoded = outcome.model.viterbi(&s.rows);
            for (p, g) in decoded.iter().zip(&s.labels) {
                total += 1;
                if p == g {
                    correct += 1;
                }
            }
        }
        assert_eq!(correct, total, "held-out accuracy must be 1.0");
    }

    #[test]
    fn training_is_deterministic() {
        let data: Vec<LabeledSequence> = (0..12)
            .map(|i| {
                if i % 3 == 0 {
                    seq(&["red", "cup"], &["attribute", "object"])
                } else {
                    seq(&["a", "mug"], &["other", "object"])
                }
            })
            .collect();
        let config = TrainConfig::default();
        let a = train(&data, &config).unwrap();
        let b = train(&data, &config).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.objective_history, b.objective_history);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        // 3-token, 2-label instance with nonzero weights.
        let data = vec![seq(&["red", "cup", "here"], &["A", "B", "A"])];
        let l2 = 0.1;
        let mut model = CrfModel::new(&["A", "B"]).unwrap();
        model.set_feature_weight("w=red", "A", 0.7);
        model.set_feature_weight("w=cup", "B", -0.4);
        model.set_feature_weight("suf1=e", "A", 0.2);
        model.set_transition_weight("A", "B", 0.3);
        model.set_transition_weight("B", "A", -0.6);

        let (_, gradient) = objective_and_gradient(&model, &data, l2).unwrap();
        let eps = 1e-5;
        let check = |analytic: f64, plus: f64, minus: f64, what: &str| {
            let fd = (plus - minus) / (2.0 * eps);
            let tol = 1e-4 * fd.abs().max(analytic.abs()).max(1.0);
            assert!(
                (analytic - fd).abs() <= tol,
                "{what}: analytic {analytic} vs fd {fd}"
            );
        };

        for ((feature, label), &analytic) in &gradient.emission {
            let base = model.feature_weight(feature, label);
            let mut up = model.clone();
            up.set_feature_weight(feature, label, base + eps);
            let mut down = model.clone();
            down.set_feature_weight(feature, label, base - eps);
            let (plus, _) = objective_and_gradient(&up, &data, l2).unwrap();
            let (minus, _) = objective_and_gradient(&down, &data, l2).unwrap();
            check(analytic, plus, minus, &format!("emission {feature}/{label}"));
        }
        for ((prev, next), &analytic) in &gradient.transition {
            let base = model.transition_weight(prev, next);
            let mut up = model.clone();
            up.set_transition_weight(prev, next, base + eps);
            let mut down = model.clone();
            down.set_transition_weight(prev, next, base - eps);
            let (plus, _) = objective_and_gradient(&up, &data, l2).unwrap();
            let (minus, _) = objective_and_gradient(&down, &data, l2).unwrap();
            check(analytic, plus, minus, &format!("transition {prev}->{next}"));
        }
    }
}
