//! Document, query, relevance-judgment and stop-word loading, plus the
//! deterministic tokenizer shared by every other module.
//!
//! File formats:
//! - documents: JSON lines `{"id": "...", "text": "..."}`
//! - queries: TSV `id<TAB>text`
//! - qrels: 4-column `qid 0 docid rel` (whitespace separated)
//! - stop-words: one token per line

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default English stop-word list bundled with the crate; override with
/// [`StopwordList::from_file`].
const DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed document line: {msg}")]
    MalformedDocument {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: duplicate document id {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{path}:{line}: expected `id<TAB>text`")]
    MissingTab { path: PathBuf, line: usize },
    #[error("{path}:{line}: query {id:?} tokenizes to zero tokens")]
    EmptyQuery {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{path}:{line}: malformed qrels line: {msg}")]
    MalformedQrels {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

/// One indexed document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Always equal to `tokenize(&text)`.
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Document {
            id: id.into(),
            text,
            tokens,
        }
    }
}

/// One search query, kept both raw and tokenized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub id: String,
    pub raw: String,
    pub tokens: Vec<String>,
}

/// Binary relevance judgments: query id -> (doc id -> grade >= 1).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a judgment. Grades <= 0 remove any existing entry (last wins).
    pub fn set(&mut self, query_id: &str, doc_id: &str, grade: i64) {
        if grade >= 1 {
            self.judgments
                .entry(query_id.to_string())
                .or_default()
                .insert(doc_id.to_string(), grade as u32);
        } else if let Some(docs) = self.judgments.get_mut(query_id) {
            docs.remove(doc_id);
            if docs.is_empty() {
                self.judgments.remove(query_id);
            }
        }
    }

    pub fn get(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    /// Doc ids judged relevant for the query.
    pub fn relevant_set(&self, query_id: &str) -> Option<BTreeSet<String>> {
        self.judgments
            .get(query_id)
            .map(|docs| docs.keys().cloned().collect())
    }

    pub fn contains(&self, query_id: &str) -> bool {
        self.judgments.contains_key(query_id)
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

/// Set of normalized tokens treated as stop-words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The bundled English list (~120 function words).
    pub fn default_english() -> Self {
        let words = DEFAULT_STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(str::to_string)
            .collect();
        StopwordList { words }
    }

    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let file = open(path)?;
        let mut words = HashSet::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|source| CorpusError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let w = line.trim();
            if !w.is_empty() {
                words.insert(w.to_string());
            }
        }
        Ok(StopwordList { words })
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: Into<String>>(words: I) -> Self {
        StopwordList {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Exact-match stop-word test; `token` must already be normalized.
pub fn is_stopword(list: &StopwordList, token: &str) -> bool {
    list.contains(token)
}

/// Normalize text into tokens: lowercase, split on whitespace, strip
/// non-alphanumeric characters from token edges, drop empties.
///
/// Idempotent on its own output re-joined with single spaces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|word| {
            let lower = word.to_lowercase();
            let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_string())
            }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct DocLine<'a> {
    id: &'a str,
    text: &'a str,
}

/// Load JSON-lines documents; order preserved, tokens populated.
pub fn load_documents(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let file = open(path)?;
    let mut docs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DocLine = serde_json::from_str(&line).map_err(|e| {
            CorpusError::MalformedDocument {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: e.to_string(),
            }
        })?;
        if !seen.insert(parsed.id.to_string()) {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                line: idx + 1,
                id: parsed.id.to_string(),
            });
        }
        docs.push(Document::new(parsed.id, parsed.text));
    }
    Ok(docs)
}

/// Write documents as JSON lines; `load_documents` of the output round-trips.
pub fn save_documents(docs: &[Document], path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for doc in docs {
        let line = serde_json::to_string(&DocLine {
            id: &doc.id,
            text: &doc.text,
        })
        .expect("document serialization cannot fail");
        writeln!(w, "{line}").map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// Load TSV queries (`id<TAB>text`); every query must tokenize non-empty.
pub fn load_queries(path: &Path) -> Result<Vec<Query>, CorpusError> {
    let file = open(path)?;
    let mut queries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line.split_once('\t').ok_or(CorpusError::MissingTab {
            path: path.to_path_buf(),
            line: idx + 1,
        })?;
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(CorpusError::EmptyQuery {
                path: path.to_path_buf(),
                line: idx + 1,
                id: id.to_string(),
            });
        }
        queries.push(Query {
            id: id.to_string(),
            raw: text.to_string(),
            tokens,
        });
    }
    Ok(queries)
}

/// Write queries in the TSV format read back by `load_queries`.
pub fn save_queries(queries: &[Query], path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for q in queries {
        writeln!(w, "{}\t{}", q.id, q.raw).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// Load 4-column qrels. Lines with rel <= 0 are discarded; duplicate
/// (qid, docid) pairs resolve last-wins.
pub fn load_qrels(path: &Path) -> Result<Qrels, CorpusError> {
    let file = open(path)?;
    let mut qrels = Qrels::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(CorpusError::MalformedQrels {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let rel: i64 = fields[3].parse().map_err(|_| CorpusError::MalformedQrels {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: format!("relevance {:?} is not an integer", fields[3]),
        })?;
        qrels.set(fields[0], fields[2], rel);
    }
    Ok(qrels)
}

/// Write qrels in the 4-column format read back by `load_qrels`.
pub fn save_qrels(qrels: &Qrels, path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for (qid, docs) in &qrels.judgments {
        for (docid, grade) in docs {
            writeln!(w, "{qid} 0 {docid} {grade}").map_err(|source| CorpusError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        }
    }
    Ok(())
}

fn open(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}
