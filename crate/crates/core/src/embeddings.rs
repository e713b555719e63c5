//! Pretrained word-vector storage and cosine similarity.
//!
//! Vectors are read from GloVe-style text files (one token per line
//! followed by `d` space-separated reals) and kept as `f32` to halve the
//! memory footprint of large vocabularies.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot read embedding file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding dimension must be positive")]
    ZeroDimension,
}

/// Token-to-vector table. Keys are stored lowercased; lookup is
/// case-insensitive. Immutable after load, safe to share across threads.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f32>>,
    skipped_lines: usize,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self, EmbeddingError> {
        if dimension == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        Ok(Self {
            dimension,
            entries: HashMap::new(),
            skipped_lines: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lines that failed to parse during load (wrong dimension, bad float).
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    /// Inserts a vector, keeping the first occurrence on duplicate tokens.
    /// Returns false if the vector has the wrong dimension.
    pub fn insert(&mut self, token: &str, vector: Vec<f32>) -> bool {
        if vector.len() != self.dimension {
            return false;
        }
        self.entries.entry(token.to_lowercase()).or_insert(vector);
        true
    }

    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        self.entries.get(&token.to_lowercase()).map(Vec::as_slice)
    }
}

/// Loads a GloVe-style text file. Malformed lines (dimension mismatch or
/// unparsable numbers) are skipped and counted; an unreadable file is fatal.
pub fn load_embeddings<P: AsRef<Path>>(
    path: P,
    expected_dim: usize,
) -> Result<EmbeddingTable, EmbeddingError> {
    let path = path.as_ref();
    let io_err = |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut table = EmbeddingTable::new(expected_dim)?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line has a first field");
        let values: Result<Vec<f32>, _> = parts.map(str::parse::<f32>).collect();
        match values {
            Ok(vector) if vector.len() == expected_dim => {
                table.insert(token, vector);
            }
            _ => table.skipped_lines += 1,
        }
    }
    Ok(table)
}

/// A composed phrase embedding together with the number of tokens that
/// actually contributed a vector. Zero coverage implies the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseVector {
    pub components: Vec<f32>,
    pub coverage: usize,
}

impl PhraseVector {
    pub fn zeros(dimension: usize) -> Self {
        Self {
            components: vec![0.0; dimension],
            coverage: 0,
        }
    }

    pub fn from_components(components: Vec<f32>, coverage: usize) -> Self {
        Self {
            components,
            coverage,
        }
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &PhraseVector, b: &PhraseVector) -> f64 {
    assert_eq!(
        a.components.len(),
        b.components.len(),
        "phrase vectors must have equal dimension"
    );
    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    for (&x, &y) in a.components.iter().zip(&b.components) {
        dot += f64::from(x) * f64::from(y);
        norm_a += f64::from(x) * f64::from(x);
        norm_b += f64::from(y) * f64::from(y);
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    dot / (norm_a.sqrt() * norm_b.sqrt())
}
