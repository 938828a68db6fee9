//! Trace typing sessions the way an instant-search front end sees them:
//! per token, did the policy fire a search, and how much did that search
//! move result quality.
//!
//! Run: `cargo run --example typing_session`

use std::path::PathBuf;

use instant_trigger::corpus::{load_documents, load_qrels, load_queries, StopwordList};
use instant_trigger::policies::{Action, Policy, SessionState, SkipStopwords};
use instant_trigger::retrieval::{build_index, RetrieverHandle, DEFAULT_B, DEFAULT_K1};

fn main() -> anyhow::Result<()> {
    let assets = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/mini");
    let docs = load_documents(&assets.join("docs.jsonl"))?;
    let queries = load_queries(&assets.join("queries.tsv"))?;
    let qrels = load_qrels(&assets.join("qrels.txt"))?;
    let handle = RetrieverHandle::bm25(build_index(&docs, DEFAULT_K1, DEFAULT_B)?, 100);
    let policy = SkipStopwords::new(StopwordList::default_english());

    for query in queries.iter().take(3) {
        let relevant = qrels.relevant_set(&query.id).unwrap();
        println!("typing {:?}", query.raw);
        let mut state = SessionState::new();
        for (i, token) in query.tokens.iter().enumerate() {
            state.q2.push(token.clone());
            let action = policy.decide(&state, token, i + 1 == query.tokens.len());
            let delta =
                instant_trigger::policies::apply_action(&mut state, action, &handle, &relevant)?;
            match action {
                Action::Search => {
                    policy.note_search(&mut state);
                    println!("  {token:<12} SEARCH  dAP {delta:+.4} (held AP {:.4})", state.last_map);
                }
                Action::Wait => println!("  {token:<12} WAIT"),
            }
        }
        println!();
    }
    Ok(())
}
