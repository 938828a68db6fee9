//! The search back-end the trigger policies protect: a retriever contract
//! with a BM25 inverted index and a cosine-similarity dense retriever.
//!
//! Both retrievers are deterministic: scores sort descending with ties
//! broken by ascending doc id, so repeated calls return identical rankings.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::corpus::Document;
use crate::embeddings::{cosine_distance, sentence_embedding, EmbeddingTable};

/// Magic bytes prefixing the binary index format.
const INDEX_MAGIC: &[u8; 5] = b"ISTL1";
const INDEX_VERSION: u32 = 1;

/// Default BM25 parameters.
pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;
/// Default ranking depth.
pub const DEFAULT_TOP_K: usize = 1000;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build an index over an empty document collection")]
    EmptyCollection,
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not an index file (bad magic bytes)")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported index version {found} (expected {INDEX_VERSION})")]
    UnsupportedVersion { path: PathBuf, found: u32 },
    #[error("{path}: corrupt or truncated index: {msg}")]
    Corrupt { path: PathBuf, msg: String },
}

/// Inverted index with collection statistics for BM25 scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    k1: f64,
    b: f64,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    avgdl: f64,
    /// term -> postings sorted by doc ordinal; term frequency > 0.
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl Bm25Index {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    /// Document frequency of a term.
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn doc_length(&self, ordinal: usize) -> Option<u32> {
        self.doc_lengths.get(ordinal).copied()
    }

    pub fn doc_id(&self, ordinal: usize) -> Option<&str> {
        self.doc_ids.get(ordinal).map(String::as_str)
    }

    pub fn postings(&self, term: &str) -> Option<&[(u32, u32)]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.n_docs() as f64;
        let df = df as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn term_weight(&self, tf: u32, dl: u32, df: usize) -> f64 {
        let tf = tf as f64;
        let norm = self.k1 * (1.0 - self.b + self.b * dl as f64 / self.avgdl);
        self.idf(df) * tf * (self.k1 + 1.0) / (tf + norm)
    }
}

/// Build a BM25 index; deterministic given document order.
pub fn build_index(docs: &[Document], k1: f64, b: f64) -> Result<Bm25Index, RetrievalError> {
    if docs.is_empty() {
        return Err(RetrievalError::EmptyCollection);
    }
    if k1.is_nan() || k1 <= 0.0 {
        return Err(RetrievalError::InvalidParams(format!("k1 must be > 0, got {k1}")));
    }
    if !(0.0..=1.0).contains(&b) {
        return Err(RetrievalError::InvalidParams(format!("b must be in [0,1], got {b}")));
    }
    let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
    let mut doc_ids = Vec::with_capacity(docs.len());
    let mut doc_lengths = Vec::with_capacity(docs.len());
    for (ordinal, doc) in docs.iter().enumerate() {
        doc_ids.push(doc.id.clone());
        doc_lengths.push(doc.tokens.len() as u32);
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for tok in &doc.tokens {
            *tf.entry(tok.as_str()).or_insert(0) += 1;
        }
        for (term, freq) in tf {
            postings
                .entry(term.to_string())
                .or_default()
                .push((ordinal as u32, freq));
        }
    }
    let avgdl = doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64;
    Ok(Bm25Index {
        k1,
        b,
        doc_ids,
        doc_lengths,
        avgdl,
        postings,
    })
}

/// BM25 score of one document for a token sequence. Repeated query tokens
/// contribute once per occurrence; absent terms contribute zero.
pub fn bm25_score(index: &Bm25Index, query_tokens: &[String], doc_ordinal: usize) -> f64 {
    let dl = match index.doc_length(doc_ordinal) {
        Some(dl) => dl,
        None => return 0.0,
    };
    let mut score = 0.0;
    for token in query_tokens {
        if let Some(pl) = index.postings.get(token) {
            if let Ok(pos) = pl.binary_search_by_key(&(doc_ordinal as u32), |&(o, _)| o) {
                score += index.term_weight(pl[pos].1, dl, pl.len());
            }
        }
    }
    score
}

/// A ranked result list: (doc id, score) with non-increasing scores and no
/// duplicate ids.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ranking {
    pub entries: Vec<(String, f64)>,
}

impl Ranking {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }
}

/// Dense retriever over precomputed document vectors; queries are embedded
/// by mean pooling and ranked by cosine similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRetriever {
    doc_vectors: Vec<(String, Vec<f64>)>,
    table: EmbeddingTable,
}

impl EmbeddingRetriever {
    pub fn new(doc_vectors: Vec<(String, Vec<f64>)>, table: EmbeddingTable) -> Self {
        EmbeddingRetriever { doc_vectors, table }
    }

    pub fn n_docs(&self) -> usize {
        self.doc_vectors.len()
    }
}

/// Either search back-end behind one interface.
#[derive(Debug, Clone)]
pub enum Retriever {
    Bm25(Bm25Index),
    Embedding(EmbeddingRetriever),
}

/// A retriever plus the ranking depth fixed for an evaluation run.
#[derive(Debug, Clone)]
pub struct RetrieverHandle {
    pub retriever: Retriever,
    pub top_k: usize,
}

impl RetrieverHandle {
    pub fn bm25(index: Bm25Index, top_k: usize) -> Self {
        RetrieverHandle {
            retriever: Retriever::Bm25(index),
            top_k,
        }
    }

    pub fn embedding(retriever: EmbeddingRetriever, top_k: usize) -> Self {
        RetrieverHandle {
            retriever: Retriever::Embedding(retriever),
            top_k,
        }
    }

    pub fn n_docs(&self) -> usize {
        match &self.retriever {
            Retriever::Bm25(ix) => ix.n_docs(),
            Retriever::Embedding(er) => er.n_docs(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.retriever {
            Retriever::Bm25(_) => "bm25",
            Retriever::Embedding(_) => "embedding",
        }
    }

    /// Retrieve at the handle's configured depth.
    pub fn retrieve(&self, query_tokens: &[String]) -> Ranking {
        retrieve(self, query_tokens, self.top_k)
    }
}

/// Top-k documents for the query; an empty token list yields an empty
/// ranking. BM25 omits zero-score documents; ties order by ascending doc id.
pub fn retrieve(handle: &RetrieverHandle, query_tokens: &[String], k: usize) -> Ranking {
    if query_tokens.is_empty() || k == 0 {
        return Ranking::empty();
    }
    let mut scored: Vec<(String, f64)> = match &handle.retriever {
        Retriever::Bm25(index) => {
            let mut acc: HashMap<u32, f64> = HashMap::new();
            for token in query_tokens {
                if let Some(pl) = index.postings.get(token) {
                    let df = pl.len();
                    for &(ordinal, tf) in pl {
                        let dl = index.doc_lengths[ordinal as usize];
                        *acc.entry(ordinal).or_insert(0.0) += index.term_weight(tf, dl, df);
                    }
                }
            }
            acc.into_iter()
                .filter(|&(_, s)| s > 0.0)
                .map(|(o, s)| (index.doc_ids[o as usize].clone(), s))
                .collect()
        }
        Retriever::Embedding(er) => {
            let qv = sentence_embedding(query_tokens, &er.table);
            er.doc_vectors
                .iter()
                .map(|(id, dv)| (id.clone(), 1.0 - cosine_distance(&qv, dv)))
                .collect()
        }
    };
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(k);
    Ranking { entries: scored }
}

// ---------------------------------------------------------------------------
// Binary persistence: magic "ISTL1", u32 version, then length-prefixed
// little-endian sections (params, doc table, postings).
// ---------------------------------------------------------------------------

pub fn save_index(index: &Bm25Index, path: &Path) -> Result<(), RetrievalError> {
    let io_err = |source| RetrievalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(INDEX_MAGIC).map_err(io_err)?;
    w.write_u32::<LittleEndian>(INDEX_VERSION).map_err(io_err)?;
    w.write_f64::<LittleEndian>(index.k1).map_err(io_err)?;
    w.write_f64::<LittleEndian>(index.b).map_err(io_err)?;
    w.write_f64::<LittleEndian>(index.avgdl).map_err(io_err)?;
    w.write_u64::<LittleEndian>(index.doc_ids.len() as u64)
        .map_err(io_err)?;
    for (id, &len) in index.doc_ids.iter().zip(&index.doc_lengths) {
        write_str(&mut w, id).map_err(io_err)?;
        w.write_u32::<LittleEndian>(len).map_err(io_err)?;
    }
    w.write_u64::<LittleEndian>(index.postings.len() as u64)
        .map_err(io_err)?;
    for (term, pl) in &index.postings {
        write_str(&mut w, term).map_err(io_err)?;
        w.write_u64::<LittleEndian>(pl.len() as u64).map_err(io_err)?;
        for &(ordinal, tf) in pl {
            w.write_u32::<LittleEndian>(ordinal).map_err(io_err)?;
            w.write_u32::<LittleEndian>(tf).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn load_index(path: &Path) -> Result<Bm25Index, RetrievalError> {
    let file = File::open(path).map_err(|source| RetrievalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = BufReader::new(file);
    let corrupt = |msg: &str| RetrievalError::Corrupt {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };

    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| corrupt("file shorter than header"))?;
    if &magic != INDEX_MAGIC {
        return Err(RetrievalError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|_| corrupt("missing version"))?;
    if version != INDEX_VERSION {
        return Err(RetrievalError::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let k1 = r.read_f64::<LittleEndian>().map_err(|_| corrupt("missing k1"))?;
    let b = r.read_f64::<LittleEndian>().map_err(|_| corrupt("missing b"))?;
    let avgdl = r
        .read_f64::<LittleEndian>()
        .map_err(|_| corrupt("missing avgdl"))?;
    let n_docs = r
        .read_u64::<LittleEndian>()
        .map_err(|_| corrupt("missing doc count"))? as usize;
    let mut doc_ids = Vec::with_capacity(n_docs);
    let mut doc_lengths = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        doc_ids.push(read_str(&mut r).map_err(|_| corrupt("truncated doc table"))?);
        doc_lengths.push(
            r.read_u32::<LittleEndian>()
                .map_err(|_| corrupt("truncated doc table"))?,
        );
    }
    let n_terms = r
        .read_u64::<LittleEndian>()
        .map_err(|_| corrupt("missing term count"))? as usize;
    let mut postings = BTreeMap::new();
    for _ in 0..n_terms {
        let term = read_str(&mut r).map_err(|_| corrupt("truncated postings"))?;
        let len = r
            .read_u64::<LittleEndian>()
            .map_err(|_| corrupt("truncated postings"))? as usize;
        let mut pl = Vec::with_capacity(len);
        for _ in 0..len {
            let ordinal = r
                .read_u32::<LittleEndian>()
                .map_err(|_| corrupt("truncated postings"))?;
            let tf = r
                .read_u32::<LittleEndian>()
                .map_err(|_| corrupt("truncated postings"))?;
            if ordinal as usize >= n_docs {
                return Err(corrupt("posting references unknown document"));
            }
            pl.push((ordinal, tf));
        }
        postings.insert(term, pl);
    }
    Ok(Bm25Index {
        k1,
        b,
        doc_ids,
        doc_lengths,
        avgdl,
        postings,
    })
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
