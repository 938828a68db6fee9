//! Word-vector table, mean-pooled sentence embeddings and cosine distance.
//!
//! Serves the similarity-matching trigger policy, the dense retriever, and
//! the frozen token inputs of the Q-network.
//!
//! Word vectors load from a plain-text format, one entry per line:
//! `token v1 v2 ... vd`. Precomputed document vectors persist as JSON lines
//! `{"id": "...", "vector": [...]}`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected {expected}-dimensional vector, found {found}")]
    DimensionMismatch {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: malformed vector line: {msg}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: empty vector file, dimension undeterminable")]
    Empty { path: PathBuf },
}

/// Immutable token -> vector table with a fixed dimension.
///
/// Backed by an ordered map so that iteration (serialization, persistence)
/// is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Build from (token, vector) pairs; every vector must have length `dim`.
    pub fn from_entries<I>(dim: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let vectors: BTreeMap<String, Vec<f64>> = entries.into_iter().collect();
        debug_assert!(vectors.values().all(|v| v.len() == dim));
        EmbeddingTable { dim, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Stored vector for an in-vocabulary token.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Entries in ascending token order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(t, v)| (t.as_str(), v.as_slice()))
    }
}

/// Load the text word-vector format; dimension is inferred from the first
/// line. Duplicate tokens resolve last-wins with a warning.
pub fn load_word_vectors(path: &Path) -> Result<EmbeddingTable, EmbeddingError> {
    let file = File::open(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut dim: Option<usize> = None;
    let mut vectors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts
            .next()
            .expect("non-empty line has a first field")
            .to_string();
        let values: Vec<f64> = parts
            .map(str::parse)
            .collect::<Result<_, std::num::ParseFloatError>>()
            .map_err(|e| EmbeddingError::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
        if values.is_empty() {
            return Err(EmbeddingError::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: "token with no vector components".to_string(),
            });
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(EmbeddingError::DimensionMismatch {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    expected: d,
                    found: values.len(),
                });
            }
            Some(_) => {}
        }
        if vectors.insert(token.clone(), values).is_some() {
            log::warn!("{}:{}: duplicate token {token:?}, keeping last", path.display(), idx + 1);
        }
    }
    let dim = dim.ok_or_else(|| EmbeddingError::Empty {
        path: path.to_path_buf(),
    })?;
    Ok(EmbeddingTable { dim, vectors })
}

/// Write the table back in the text format read by [`load_word_vectors`].
/// Values use the shortest round-trip decimal form, so a reload is bit-exact.
pub fn save_word_vectors(table: &EmbeddingTable, path: &Path) -> Result<(), EmbeddingError> {
    let file = File::create(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for (token, vector) in table.iter() {
        let mut line = String::from(token);
        for v in vector {
            line.push(' ');
            line.push_str(&format!("{v}"));
        }
        writeln!(w, "{line}").map_err(|source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// Mean of the in-vocabulary token vectors; all-OOV or empty input yields
/// the zero vector.
pub fn sentence_embedding<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0.0; table.dim()];
    let mut count = 0usize;
    for token in tokens {
        if let Some(v) = table.get(token.as_ref()) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            count += 1;
        }
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        for s in &mut sum {
            *s *= inv;
        }
    }
    sum
}

/// Stored vector for `token`, or the zero vector when out of vocabulary.
pub fn token_vector(table: &EmbeddingTable, token: &str) -> Vec<f64> {
    table
        .get(token)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; table.dim()])
}

/// Cosine distance `1 - u.v/(|u||v|)` in [0, 2]; if either vector has zero
/// norm the distance is defined as 1.0.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    // clamp: rounding can push the cosine of near-parallel vectors past 1,
    // which would leak out of the documented [0, 2] range
    1.0 - (dot / (nu * nv)).clamp(-1.0, 1.0)
}

#[derive(Serialize, Deserialize)]
struct DocVectorLine {
    id: String,
    vector: Vec<f64>,
}

/// Mean-pooled vector per document, in input order.
pub fn compute_doc_vectors(
    docs: &[Document],
    table: &EmbeddingTable,
) -> Vec<(String, Vec<f64>)> {
    docs.iter()
        .map(|d| (d.id.clone(), sentence_embedding(&d.tokens, table)))
        .collect()
}

/// Persist document vectors as JSON lines `{"id","vector"}`.
pub fn save_doc_vectors(
    vectors: &[(String, Vec<f64>)],
    path: &Path,
) -> Result<(), EmbeddingError> {
    let file = File::create(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for (id, vector) in vectors {
        let line = serde_json::to_string(&DocVectorLine {
            id: id.clone(),
            vector: vector.clone(),
        })
        .expect("doc vector serialization cannot fail");
        writeln!(w, "{line}").map_err(|source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// Load document vectors written by [`save_doc_vectors`].
pub fn load_doc_vectors(path: &Path) -> Result<Vec<(String, Vec<f64>)>, EmbeddingError> {
    let file = File::open(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DocVectorLine =
            serde_json::from_str(&line).map_err(|e| EmbeddingError::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
        out.push((parsed.id, parsed.vector));
    }
    Ok(out)
}
