//! Walk one typing session under each baseline trigger policy and print the
//! WAIT/SEARCH decisions side by side.
//!
//! Run: `cargo run --example baseline_policies`

use std::path::PathBuf;
use std::sync::Arc;

use instant_trigger::corpus::{load_documents, load_qrels, load_queries, StopwordList};
use instant_trigger::embeddings::load_word_vectors;
use instant_trigger::policies::{
    Action, Policy, SearchEveryToken, SearchLastToken, SessionState, SimilarityMatching,
    SkipStopwords,
};
use instant_trigger::retrieval::{build_index, RetrieverHandle, DEFAULT_B, DEFAULT_K1};

fn decisions(
    policy: &dyn Policy,
    tokens: &[String],
    handle: &RetrieverHandle,
    relevant: &std::collections::BTreeSet<String>,
) -> Vec<Action> {
    let mut state = SessionState::new();
    let mut out = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        state.q2.push(tok.clone());
        let action = policy.decide(&state, tok, i + 1 == tokens.len());
        instant_trigger::policies::apply_action(&mut state, action, handle, relevant).unwrap();
        if action == Action::Search {
            policy.note_search(&mut state);
        }
        out.push(action);
    }
    out
}

fn main() -> anyhow::Result<()> {
    let assets = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/mini");
    let docs = load_documents(&assets.join("docs.jsonl"))?;
    let queries = load_queries(&assets.join("queries.tsv"))?;
    let qrels = load_qrels(&assets.join("qrels.txt"))?;
    let table = Arc::new(load_word_vectors(&assets.join("vectors.txt"))?);
    let handle = RetrieverHandle::bm25(build_index(&docs, DEFAULT_K1, DEFAULT_B)?, 100);

    let query = &queries[0];
    let relevant = qrels.relevant_set(&query.id).unwrap();
    println!("query {}: {:?}\n", query.id, query.raw);

    let policies: Vec<Box<dyn Policy>> = vec![
        Box::new(SearchEveryToken),
        Box::new(SearchLastToken),
        Box::new(SkipStopwords::new(StopwordList::default_english())),
        Box::new(SimilarityMatching::new(table, 0.1)),
    ];

    print!("{:<8}", "token");
    for p in &policies {
        print!("{:>8}", p.name());
    }
    println!();
    let traces: Vec<Vec<Action>> = policies
        .iter()
        .map(|p| decisions(p.as_ref(), &query.tokens, &handle, &relevant))
        .collect();
    for (i, tok) in query.tokens.iter().enumerate() {
        print!("{tok:<8}");
        for trace in &traces {
            print!("{:>8}", if trace[i] == Action::Search { "SEARCH" } else { "." });
        }
        println!();
    }
    println!("\nsearches issued:");
    for (p, trace) in policies.iter().zip(&traces) {
        let n = trace.iter().filter(|&&a| a == Action::Search).count();
        println!("  {:<4} {n}", p.name());
    }
    Ok(())
}
