//! Synthetic saliency corpus generator for training and verification.
//!
//! Construction gives full control over which tokens matter: every keyed
//! document holds exactly one unique salient key plus filler words, queries
//! are 1-2 salient keys shuffled into stop-word padding, and qrels point
//! each query at the documents holding its keys. Key, filler and stop-word
//! vocabularies are disjoint, so term statistics separate them sharply and
//! the optimal trigger policy is known by construction: search exactly when
//! a salient key arrives.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::{save_documents, save_qrels, save_queries, Document, Qrels, Query};
use crate::embeddings::{save_word_vectors, EmbeddingTable};

/// Stop-words used as query padding; all appear in the bundled default
/// stop-word list.
pub const PAD_STOPWORDS: [&str; 8] = ["the", "of", "a", "in", "to", "is", "for", "on"];

const N_FILLERS: usize = 30;
const DOC_FILLER_RANGE: (usize, usize) = (6, 12);

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Embedding(#[from] crate::embeddings::EmbeddingError),
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSpec {
    pub n_docs: usize,
    pub n_queries: usize,
    /// Min/max stop-words padded around a query's keys (inclusive).
    pub stopword_pad_range: (usize, usize),
    /// Number of salient keys; documents beyond this count are pure filler.
    pub salient_vocab_size: usize,
    /// Dimension of the generated word vectors.
    pub vector_dim: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_docs: 200,
            n_queries: 50,
            stopword_pad_range: (2, 5),
            salient_vocab_size: 150,
            vector_dim: 50,
            seed: 7,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.n_docs == 0 || self.n_queries == 0 {
            return Err(SynthError::InvalidSpec(
                "n_docs and n_queries must be >= 1".to_string(),
            ));
        }
        if self.salient_vocab_size == 0 || self.salient_vocab_size > self.n_docs {
            return Err(SynthError::InvalidSpec(format!(
                "salient_vocab_size must be in 1..=n_docs ({}), got {}",
                self.n_docs, self.salient_vocab_size
            )));
        }
        if self.stopword_pad_range.0 > self.stopword_pad_range.1 {
            return Err(SynthError::InvalidSpec(format!(
                "stop-word pad range ({}, {}) is inverted",
                self.stopword_pad_range.0, self.stopword_pad_range.1
            )));
        }
        if self.vector_dim == 0 {
            return Err(SynthError::InvalidSpec("vector_dim must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// A generated corpus, ready to use in memory or to persist.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    pub table: EmbeddingTable,
}

/// Paths written by [`SynthCorpus::write_to_dir`].
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub documents: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    pub vectors: PathBuf,
}

impl SynthCorpus {
    /// Write docs.jsonl, queries.tsv, qrels.txt and vectors.txt into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<SynthPaths, SynthError> {
        let paths = SynthPaths {
            documents: dir.join("docs.jsonl"),
            queries: dir.join("queries.tsv"),
            qrels: dir.join("qrels.txt"),
            vectors: dir.join("vectors.txt"),
        };
        save_documents(&self.documents, &paths.documents)?;
        save_queries(&self.queries, &paths.queries)?;
        save_qrels(&self.qrels, &paths.qrels)?;
        save_word_vectors(&self.table, &paths.vectors)?;
        Ok(paths)
    }
}

fn key_token(i: usize) -> String {
    format!("key{i:03}")
}

fn filler_token(i: usize) -> String {
    format!("filler{i:02}")
}

fn doc_id(i: usize) -> String {
    format!("d{i:04}")
}

/// Generate a corpus; identical specs produce identical corpora.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    // documents: one unique key for the first `salient_vocab_size` docs
    let mut documents = Vec::with_capacity(spec.n_docs);
    for i in 0..spec.n_docs {
        let mut tokens: Vec<String> = Vec::new();
        if i < spec.salient_vocab_size {
            tokens.push(key_token(i));
        }
        let n_fillers = rng.gen_range(DOC_FILLER_RANGE.0..=DOC_FILLER_RANGE.1);
        for _ in 0..n_fillers {
            tokens.push(filler_token(rng.gen_range(0..N_FILLERS)));
        }
        shuffle(&mut tokens, &mut rng);
        documents.push(Document::new(doc_id(i), tokens.join(" ")));
    }

    // queries: 1-2 distinct keys shuffled into stop-word padding
    let mut queries = Vec::with_capacity(spec.n_queries);
    let mut qrels = Qrels::new();
    for qi in 0..spec.n_queries {
        let n_keys = if spec.salient_vocab_size == 1 {
            1
        } else {
            rng.gen_range(1..=2usize)
        };
        let mut keys = Vec::with_capacity(n_keys);
        while keys.len() < n_keys {
            let k = rng.gen_range(0..spec.salient_vocab_size);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let n_pad = rng.gen_range(spec.stopword_pad_range.0..=spec.stopword_pad_range.1);
        let mut tokens: Vec<String> = keys.iter().map(|&k| key_token(k)).collect();
        for _ in 0..n_pad {
            tokens.push(PAD_STOPWORDS[rng.gen_range(0..PAD_STOPWORDS.len())].to_string());
        }
        shuffle(&mut tokens, &mut rng);
        let id = format!("q{qi:03}");
        for &k in &keys {
            qrels.set(&id, &doc_id(k), 1);
        }
        queries.push(Query {
            id,
            raw: tokens.join(" "),
            tokens,
        });
    }

    // word vectors: a random unit vector per vocabulary token, generated in
    // sorted token order so the RNG consumption is reproducible
    let mut vocab: Vec<String> = (0..spec.salient_vocab_size).map(key_token).collect();
    vocab.extend((0..N_FILLERS).map(filler_token));
    vocab.extend(PAD_STOPWORDS.iter().map(|s| s.to_string()));
    vocab.sort();
    let entries: Vec<(String, Vec<f64>)> = vocab
        .into_iter()
        .map(|tok| {
            let mut v: Vec<f64> = (0..spec.vector_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            (tok, v)
        })
        .collect();
    let table = EmbeddingTable::from_entries(spec.vector_dim, entries);

    Ok(SynthCorpus {
        documents,
        queries,
        qrels,
        table,
    })
}

fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
