//! Selective search triggering for instant (search-as-you-type) systems.
//!
//! An instant search front end fires a back-end query at every typed token,
//! which multiplies back-end load by the query length. This crate decides,
//! per typed token, whether issuing that search is worth it: it ships the
//! static baselines (search every token, search only the last token, skip
//! stop-words, embedding-similarity matching), a trigger policy learned by
//! a deep Q-network against the live retriever, and the evaluation harness
//! that measures the resulting load/quality trade-off (Effort, Triggered
//! Searches, mean-AP-by-position curves, paired significance tests).
//!
//! Self-contained: a BM25 inverted index and a cosine dense retriever serve
//! as back-ends, and a synthetic corpus generator provides a controlled
//! environment where token saliency is known by construction.
//!
//! Start with the `examples/` directory (each example is a runnable tour
//! of one capability) or the `instant-trigger` binary for the file-based
//! workflow (`synth`, `index`, `train`, `eval`, `simulate`, `report`).

pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod evalharness;
pub mod metrics;
pub mod neural;
pub mod policies;
pub mod retrieval;
pub mod rl;
pub mod svg;
pub mod synthbench;

pub use corpus::{tokenize, Document, Qrels, Query, StopwordList};
pub use embeddings::{cosine_distance, sentence_embedding, EmbeddingTable};
pub use evalharness::{compare, quality_curve, run_evaluation, Report};
pub use metrics::{average_precision, best_possible_map, paired_t_test};
pub use policies::{Action, Policy, PolicyKind, SessionState};
pub use retrieval::{build_index, retrieve, Bm25Index, Ranking, RetrieverHandle};
pub use rl::{dqn_decide, train, DqnPolicy, TrainConfig};
pub use synthbench::{generate, SynthCorpus, SynthSpec};
