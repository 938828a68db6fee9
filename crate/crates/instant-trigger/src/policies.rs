//! Trigger policies: the per-token WAIT/SEARCH contract and the four
//! non-learned baselines.
//!
//! A session walks through a query token by token. The state splits the
//! typed prefix into `q1` (tokens covered by the last issued search) and
//! `q2` (tokens typed since). A SEARCH action flushes `q2` into `q1` and
//! issues the whole typed prefix as a query.

use std::collections::BTreeSet;
use std::str::FromStr;
use std::sync::Arc;

use crate::corpus::{is_stopword, StopwordList};
use crate::embeddings::{cosine_distance, sentence_embedding, EmbeddingTable};
use crate::metrics::{average_precision, MetricsError};
use crate::retrieval::{retrieve, Ranking, RetrieverHandle};

/// The two-way per-token choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Action {
    #[serde(rename = "WAIT")]
    Wait,
    #[serde(rename = "SEARCH")]
    Search,
}

impl Action {
    pub fn as_str(&self) -> &'static str {
        match self {
            Action::Wait => "WAIT",
            Action::Search => "SEARCH",
        }
    }
}

/// Which trigger policy to run; carries no config, used for CLI selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Search at every typed token.
    Set,
    /// Wait for the whole query, search once at the last token.
    Slt,
    /// Search at every token except stop-words.
    Ss,
    /// Search when the sentence embedding drifted past a threshold.
    Sm,
    /// Learned Q-network decides per token.
    Dqn,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Set => "set",
            PolicyKind::Slt => "slt",
            PolicyKind::Ss => "ss",
            PolicyKind::Sm => "sm",
            PolicyKind::Dqn => "dqn",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "set" => Ok(PolicyKind::Set),
            "slt" => Ok(PolicyKind::Slt),
            "ss" => Ok(PolicyKind::Ss),
            "sm" => Ok(PolicyKind::Sm),
            "dqn" => Ok(PolicyKind::Dqn),
            other => Err(format!(
                "unknown policy {other:?} (expected set, slt, ss, sm or dqn)"
            )),
        }
    }
}

/// One session's view of a partially typed query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionState {
    /// Tokens covered by the last issued search.
    pub q1: Vec<String>,
    /// Tokens typed since the last search.
    pub q2: Vec<String>,
    /// Results currently on screen (empty before the first search).
    pub last_ranking: Ranking,
    /// AP of `last_ranking`; 0 before the first search.
    pub last_map: f64,
    /// Sentence vector of `q1` at the last search (similarity policy only).
    pub searched_vector: Option<Vec<f64>>,
}

impl SessionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// The full typed prefix `q1 ++ q2`.
    pub fn typed_prefix(&self) -> Vec<String> {
        let mut prefix = self.q1.clone();
        prefix.extend(self.q2.iter().cloned());
        prefix
    }
}

/// A per-token trigger decision procedure.
///
/// `decide` must not mutate externally visible state; policies needing to
/// remember something about issued searches write it into the session state
/// via `note_search`, which the session driver calls after each SEARCH.
pub trait Policy: Sync {
    fn name(&self) -> &str;

    fn decide(&self, state: &SessionState, new_token: &str, is_last_token: bool) -> Action;

    fn note_search(&self, _state: &mut SessionState) {}
}

/// The three static baselines share one decision function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaticKind {
    SearchEveryToken,
    SearchLastToken,
    SkipStopwords,
}

/// Decision rule for the static baselines. The caller has already appended
/// `new_token` to `q2`.
pub fn decide_static(
    kind: StaticKind,
    new_token: &str,
    is_last_token: bool,
    stopwords: &StopwordList,
) -> Action {
    match kind {
        StaticKind::SearchEveryToken => Action::Search,
        StaticKind::SearchLastToken => {
            if is_last_token {
                Action::Search
            } else {
                Action::Wait
            }
        }
        StaticKind::SkipStopwords => {
            if is_stopword(stopwords, new_token) {
                Action::Wait
            } else {
                Action::Search
            }
        }
    }
}

/// Search at every typed token (pure instant search).
#[derive(Debug, Clone, Copy, Default)]
pub struct SearchEveryToken;

impl Policy for SearchEveryToken {
    fn name(&self) -> &str {
        "set"
    }

    fn decide(&self, _state: &SessionState, _new_token: &str, _is_last: bool) -> Action {
        Action::Search
    }
}

/// Search once at the true last token (regular search behavior).
#[derive(Debug, Clone, Copy, Default)]
pub struct SearchLastToken;

impl Policy for SearchLastToken {
    fn name(&self) -> &str {
        "slt"
    }

    fn decide(&self, _state: &SessionState, _new_token: &str, is_last: bool) -> Action {
        if is_last {
            Action::Search
        } else {
            Action::Wait
        }
    }
}

/// Search at every token except stop-words; consults only the newly typed
/// token, not the whole pending buffer.
#[derive(Debug, Clone)]
pub struct SkipStopwords {
    stopwords: StopwordList,
}

impl SkipStopwords {
    pub fn new(stopwords: StopwordList) -> Self {
        SkipStopwords { stopwords }
    }
}

impl Policy for SkipStopwords {
    fn name(&self) -> &str {
        "ss"
    }

    fn decide(&self, _state: &SessionState, new_token: &str, is_last: bool) -> Action {
        decide_static(StaticKind::SkipStopwords, new_token, is_last, &self.stopwords)
    }
}

/// Default similarity threshold for the similarity-matching policy.
pub const DEFAULT_SM_THRESHOLD: f64 = 0.1;

/// Search when the typed prefix's sentence embedding has drifted at least
/// `threshold` in cosine distance from the last searched prefix's embedding.
///
/// Before any search the reference vector is the zero vector, whose cosine
/// distance to anything is 1.0 by convention, so the first in-vocabulary
/// token always triggers.
#[derive(Debug, Clone)]
pub struct SimilarityMatching {
    table: Arc<EmbeddingTable>,
    threshold: f64,
}

impl SimilarityMatching {
    pub fn new(table: Arc<EmbeddingTable>, threshold: f64) -> Self {
        SimilarityMatching { table, threshold }
    }
}

/// Decision rule for the similarity-matching policy, exposed for reuse.
pub fn decide_similarity(
    state: &SessionState,
    threshold: f64,
    table: &EmbeddingTable,
) -> Action {
    let prefix = state.typed_prefix();
    let current = sentence_embedding(&prefix, table);
    let zero = vec![0.0; table.dim()];
    let searched = state.searched_vector.as_deref().unwrap_or(&zero);
    if cosine_distance(searched, &current) >= threshold {
        Action::Search
    } else {
        Action::Wait
    }
}

impl Policy for SimilarityMatching {
    fn name(&self) -> &str {
        "sm"
    }

    fn decide(&self, state: &SessionState, _new_token: &str, _is_last: bool) -> Action {
        decide_similarity(state, self.threshold, &self.table)
    }

    fn note_search(&self, state: &mut SessionState) {
        state.searched_vector = Some(sentence_embedding(&state.q1, &self.table));
    }
}

/// Apply an action to the session state. WAIT leaves the state untouched;
/// SEARCH flushes `q2` into `q1`, retrieves the typed prefix and refreshes
/// the held results. Returns the AP delta relative to the previous search
/// (0 for WAIT).
pub fn apply_action(
    state: &mut SessionState,
    action: Action,
    handle: &RetrieverHandle,
    relevant: &BTreeSet<String>,
) -> Result<f64, MetricsError> {
    match action {
        Action::Wait => Ok(0.0),
        Action::Search => {
            let pending = std::mem::take(&mut state.q2);
            state.q1.extend(pending);
            let ranking = retrieve(handle, &state.q1, handle.top_k);
            let ap = average_precision(&ranking, relevant)?;
            let delta = ap - state.last_map;
            state.last_ranking = ranking;
            state.last_map = ap;
            Ok(delta)
        }
    }
}
