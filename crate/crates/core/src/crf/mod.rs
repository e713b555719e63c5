//! Generic linear-chain CRF: feature extraction, maximum-likelihood
//! training, and exact Viterbi decoding.
//!
//! The same engine backs three label alphabets in this crate: task types,
//! argument roles, and semantic classes. Feature strings are flat
//! namespaced text keys (`w=red`, `suf1=d`, `pos=ADJ`) so model files stay
//! diffable.

mod train;

pub use train::{objective_and_gradient, train, Gradient, TrainConfig, TrainOutcome};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("training data is empty")]
    EmptyData,
    #[error("sequence {index} carries label {label:?} outside the model alphabet")]
    UnknownLabel { index: usize, label: String },
    #[error("sequence {index} has {rows} rows but {labels} labels")]
    LengthMismatch {
        index: usize,
        rows: usize,
        labels: usize,
    },
    #[error("label alphabet must be non-empty and duplicate-free")]
    BadAlphabet,
    #[error("cannot read model file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model file {path} is malformed at line {line}: {reason}")]
    BadModelFile {
        path: String,
        line: usize,
        reason: String,
    },
}

/// One token with optional pre-annotated grammatical columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenRow {
    pub surface: String,
    pub lemma: Option<String>,
    pub pos: Option<String>,
    pub dep: Option<String>,
}

impl TokenRow {
    pub fn new(surface: impl Into<String>) -> Self {
        let surface = surface.into();
        assert!(!surface.is_empty(), "token surface must be non-empty");
        Self {
            surface,
            lemma: None,
            pos: None,
            dep: None,
        }
    }

    pub fn words(surfaces: &[&str]) -> Vec<Self> {
        surfaces.iter().map(|s| Self::new(*s)).collect()
    }
}

/// A token sequence paired with its gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub rows: Vec<TokenRow>,
    pub labels: Vec<String>,
}

impl LabeledSequence {
    pub fn new(rows: Vec<TokenRow>, labels: Vec<String>) -> Self {
        assert_eq!(rows.len(), labels.len(), "rows and labels must align");
        Self { rows, labels }
    }
}

const BOS: &str = "<BOS>";
const EOS: &str = "<EOS>";

/// Feature strings for the token at `position`: the lowercased word, 1-3
/// character affixes, shape flags, the +-1 word window with boundary
/// sentinels, and lemma/POS/dep columns when present.
pub fn extract_features(rows: &[TokenRow], position: usize) -> Vec<String> {
    assert!(position < rows.len(), "position out of range");
    let row = &rows[position];
    let word = row.surface.to_lowercase();
    let chars: Vec<char> = word.chars().collect();
    let mut feats = Vec::with_capacity(16);

    feats.push(format!("w={word}"));
    for k in 1..=3.min(chars.len()) {
        let prefix: String = chars[..k].iter().collect();
        let suffix: String = chars[chars.len() - k..].iter().collect();
        feats.push(format!("pre{k}={prefix}"));
        feats.push(format!("suf{k}={suffix}"));
    }
    if row.surface.chars().next().is_some_and(char::is_uppercase) {
        feats.push("cap".to_string());
    }
    if !chars.is_empty() && chars.iter().all(|c| c.is_ascii_digit()) {
        feats.push("digit".to_string());
    }

    let prev_word = if position == 0 {
        BOS.to_string()
    } else {
        rows[position - 1].surface.to_lowercase()
    };
    let next_word = if position + 1 == rows.len() {
        EOS.to_string()
    } else {
        rows[position + 1].surface.to_lowercase()
    };
    feats.push(format!("w-1={prev_word}"));
    feats.push(format!("w+1={next_word}"));

    let annotated = |feats: &mut Vec<String>, row: &TokenRow, offset: &str| {
        if let Some(lemma) = &row.lemma {
            feats.push(format!("lemma{offset}={lemma}"));
        }
        if let Some(pos) = &row.pos {
            feats.push(format!("pos{offset}={pos}"));
        }
        if let Some(dep) = &row.dep {
            feats.push(format!("dep{offset}={dep}"));
        }
    };
    annotated(&mut feats, row, "");
    if position > 0 {
        annotated(&mut feats, &rows[position - 1], "-1");
    }
    if position + 1 < rows.len() {
        annotated(&mut feats, &rows[position + 1], "+1");
    }
    feats
}

/// Trained linear-chain model: emission weights per (feature, label) and
/// transition weights per (previous label, label). Absent entries weigh 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    labels: Vec<String>,
    feature_weights: HashMap<String, Vec<f64>>,
    transition_weights: Vec<Vec<f64>>,
}

impl CrfModel {
    pub fn new(labels: &[impl AsRef<str>]) -> Result<Self, CrfError> {
        let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        let mut seen = std::collections::HashSet::new();
        if labels.is_empty() || !labels.iter().all(|l| seen.insert(l.clone())) {
            return Err(CrfError::BadAlphabet);
        }
        let n = labels.len();
        Ok(Self {
            labels,
            feature_weights: HashMap::new(),
            transition_weights: vec![vec![0.0; n]; n],
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn feature_weight(&self, feature: &str, label: &str) -> f64 {
        let Some(idx) = self.label_index(label) else {
            return 0.0;
        };
        self.feature_weights
            .get(feature)
            .map_or(0.0, |per_label| per_label[idx])
    }

    pub fn set_feature_weight(&mut self, feature: &str, label: &str, weight: f64) {
        let idx = self
            .label_index(label)
            .expect("label must belong to the alphabet");
        let n = self.labels.len();
        self.feature_weights
            .entry(feature.to_string())
            .or_insert_with(|| vec![0.0; n])[idx] = weight;
    }

    pub fn transition_weight(&self, prev: &str, next: &str) -> f64 {
        match (self.label_index(prev), self.label_index(next)) {
            (Some(p), Some(n)) => self.transition_weights[p][n],
            _ => 0.0,
        }
    }

    pub fn set_transition_weight(&mut self, prev: &str, next: &str, weight: f64) {
        let p = self.label_index(prev).expect("unknown previous label");
        let n = self.label_index(next).expect("unknown next label");
        self.transition_weights[p][n] = weight;
    }

    pub fn n_features(&self) -> usize {
        self.feature_weights.len()
    }

    fn emission_scores(&self, rows: &[TokenRow], position: usize) -> Vec<f64> {
        let mut scores = vec![0.0; self.labels.len()];
        for feature in extract_features(rows, position) {
            if let Some(per_label) = self.feature_weights.get(&feature) {
                for (s, w) in scores.iter_mut().zip(per_label) {
                    *s += w;
                }
            }
        }
        scores
    }

    pub(crate) fn lattice(&self, rows: &[TokenRow]) -> Vec<Vec<f64>> {
        (0..rows.len())
            .map(|i| self.emission_scores(rows, i))
            .collect()
    }

    /// Unnormalized path score: summed emission and transition weights.
    pub fn score_sequence(&self, rows: &[TokenRow], labels: &[String]) -> f64 {
        assert_eq!(rows.len(), labels.len());
        let mut total = 0.0;
        for (i, label) in labels.iter().enumerate() {
            let idx = self
                .label_index(label)
                .expect("label must belong to the alphabet");
            total += self.emission_scores(rows, i)[idx];
            if i > 0 {
                let prev = self.label_index(&labels[i - 1]).expect("checked above");
                total += self.transition_weights[prev][idx];
            }
        }
        total
    }

    /// Exact argmax label sequence; ties resolve to the earlier alphabet
    /// label so decoding is deterministic.
    pub fn viterbi(&self, rows: &[TokenRow]) -> Vec<String> {
        assert!(!rows.is_empty(), "cannot decode an empty sequence");
        let n_labels = self.labels.len();
        let lattice = self.lattice(rows);

        let mut best = vec![vec![f64::NEG_INFINITY; n_labels]; rows.len()];
        let mut back = vec![vec![0usize; n_labels]; rows.len()];
        best[0].clone_from_slice(&lattice[0]);

        for i in 1..rows.len() {
            for next in 0..n_labels {
                let mut best_prev = 0;
                let mut best_score = f64::NEG_INFINITY;
                for prev in 0..n_labels {
                    let score = best[i - 1][prev] + self.transition_weights[prev][next];
                    if score > best_score {
                        best_score = score;
                        best_prev = prev;
                    }
                }
                best[i][next] = best_score + lattice[i][next];
                back[i][next] = best_prev;
            }
        }

        let last = rows.len() - 1;
        let mut current = 0;
        let mut best_final = f64::NEG_INFINITY;
        for (label, &score) in best[last].iter().enumerate() {
            if score > best_final {
                best_final = score;
                current = label;
            }
        }

        let mut path = vec![0usize; rows.len()];
        path[last] = current;
        for i in (1..rows.len()).rev() {
            current = back[i][current];
            path[i - 1] = current;
        }
        path.into_iter().map(|i| self.labels[i].clone()).collect()
    }

    /// Serializes the model as versioned plain text with features sorted
    /// for diffability.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("crf-model v1\n");
        out.push_str("labels");
        for label in &self.labels {
            out.push('\t');
            out.push_str(label);
        }
        out.push('\n');
        for (p, row) in self.transition_weights.iter().enumerate() {
            for (n, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    let _ = writeln!(out, "t\t{}\t{}\t{}", self.labels[p], self.labels[n], w);
                }
            }
        }
        let mut features: Vec<&String> = self.feature_weights.keys().collect();
        features.sort();
        for feature in features {
            for (idx, &w) in self.feature_weights[feature].iter().enumerate() {
                if w != 0.0 {
                    let _ = writeln!(out, "f\t{}\t{}\t{}", feature, self.labels[idx], w);
                }
            }
        }
        out
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), CrfError> {
        fs::write(path.as_ref(), self.to_text()).map_err(|source| CrfError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn from_text(text: &str, path: &str) -> Result<Self, CrfError> {
        let bad = |line: usize, reason: &str| CrfError::BadModelFile {
            path: path.to_string(),
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        if header.trim() != "crf-model v1" {
            return Err(bad(1, "unrecognized header"));
        }
        let (_, label_line) = lines.next().ok_or_else(|| bad(2, "missing label line"))?;
        let mut fields = label_line.split('\t');
        if fields.next() != Some("labels") {
            return Err(bad(2, "expected labels line"));
        }
        let labels: Vec<&str> = fields.collect();
        let mut model = CrfModel::new(&labels).map_err(|_| bad(2, "bad label alphabet"))?;
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 {
                return Err(bad(i + 1, "expected 4 tab-separated fields"));
            }
            let weight: f64 = parts[3]
                .parse()
                .map_err(|_| bad(i + 1, "unparsable weight"))?;
            if !weight.is_finite() {
                return Err(bad(i + 1, "weight must be finite"));
            }
            match parts[0] {
                "t" => {
                    if model.label_index(parts[1]).is_none() || model.label_index(parts[2]).is_none()
                    {
                        return Err(bad(i + 1, "transition names unknown label"));
                    }
                    model.set_transition_weight(parts[1], parts[2], weight);
                }
                "f" => {
                    if model.label_index(parts[2]).is_none() {
                        return Err(bad(i + 1, "feature row names unknown label"));
                    }
                    model.set_feature_weight(parts[1], parts[2], weight);
                }
                _ => return Err(bad(i + 1, "unknown record kind")),
            }
        }
        Ok(model)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, CrfError> {
        let display = path.as_ref().display().to_string();
        let text = fs::read_to_string(path.as_ref()).map_err(|source| CrfError::Io {
            path: display.clone(),
            source,
        })?;
        Self::from_text(&text, &display)
    }
}

/// Reads the tab-separated training format: one token per line with
/// columns `surface<TAB>label` or `surface<TAB>lemma<TAB>pos<TAB>dep<TAB>label`
/// ("_" marks an absent column); blank lines separate sequences.
pub fn parse_sequence_file(text: &str) -> Result<Vec<LabeledSequence>, String> {
    let mut sequences = Vec::new();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let optional = |s: &str| {
        if s == "_" {
            None
        } else {
            Some(s.to_string())
        }
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !rows.is_empty() {
                sequences.push(LabeledSequence::new(
                    std::mem::take(&mut rows),
                    std::mem::take(&mut labels),
                ));
            }
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        let (row, label) = match parts.len() {
            2 => (TokenRow::new(parts[0]), parts[1]),
            5 => (
                TokenRow {
                    surface: parts[0].to_string(),
                    lemma: optional(parts[1]),
                    pos: optional(parts[2]),
                    dep: optional(parts[3]),
                },
                parts[4],
            ),
            n => {
                return Err(format!(
                    "line {}: expected 2 or 5 tab-separated columns, found {n}",
                    i + 1
                ))
            }
        };
        if row.surface.is_empty() {
            return Err(format!("line {}: empty token surface", i + 1));
        }
        rows.push(row);
        labels.push(label.to_string());
    }
    if !rows.is_empty() {
        sequences.push(LabeledSequence::new(rows, labels));
    }
    Ok(sequences)
}

/// Writes sequences in the format accepted by [`parse_sequence_file`].
pub fn write_sequence_file(sequences: &[LabeledSequence]) -> String {
    let mut out = String::new();
    for seq in sequences {
        for (row, label) in seq.rows.iter().zip(&seq.labels) {
            if row.lemma.is_some() || row.pos.is_some() || row.dep.is_some() {
                let col = |o: &Option<String>| o.clone().unwrap_or_else(|| "_".to_string());
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    row.surface,
                    col(&row.lemma),
                    col(&row.pos),
                    col(&row.dep),
                    label
                );
            } else {
                let _ = writeln!(out, "{}\t{}", row.surface, label);
            }
        }
        out.push('\n');
    }
    out
}
