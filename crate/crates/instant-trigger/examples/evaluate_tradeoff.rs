//! Measure the load/quality trade-off of every policy on one corpus: train
//! the network, evaluate all five policies on held-out queries, and print
//! the comparison table against pure instant search.
//!
//! Run: `cargo run --release --example evaluate_tradeoff`

use std::sync::Arc;

use instant_trigger::corpus::StopwordList;
use instant_trigger::evalharness::{compare, format_comparison_table};
use instant_trigger::policies::{
    Policy, SearchEveryToken, SearchLastToken, SimilarityMatching, SkipStopwords,
};
use instant_trigger::retrieval::{build_index, RetrieverHandle, DEFAULT_B, DEFAULT_K1};
use instant_trigger::rl::{train, DqnPolicy, TrainConfig};
use instant_trigger::{generate, run_evaluation, SynthSpec};

fn main() -> anyhow::Result<()> {
    let spec = SynthSpec {
        n_docs: 120,
        n_queries: 60,
        stopword_pad_range: (2, 5),
        salient_vocab_size: 80,
        vector_dim: 12,
        seed: 5,
    };
    let corpus = generate(&spec)?;
    let handle = RetrieverHandle::bm25(build_index(&corpus.documents, DEFAULT_K1, DEFAULT_B)?, 1000);
    let (train_queries, eval_queries) = corpus.queries.split_at(40);

    println!("training on {} queries...", train_queries.len());
    let config = TrainConfig {
        episodes: 600,
        eps_min: 0.05,
        r_th: 0.0001,
        hidden: 12,
        proj: 12,
        seed: 9,
        ..TrainConfig::default()
    };
    let outcome = train(&config, train_queries, &handle, &corpus.qrels, &corpus.table)?;

    let policies: Vec<Box<dyn Policy>> = vec![
        Box::new(SearchLastToken),
        Box::new(SkipStopwords::new(StopwordList::default_english())),
        Box::new(SimilarityMatching::new(Arc::new(corpus.table.clone()), 0.1)),
        Box::new(DqnPolicy::new(outcome.params)),
    ];

    println!("evaluating on {} held-out queries...\n", eval_queries.len());
    let base = run_evaluation(&SearchEveryToken, eval_queries, &handle, &corpus.qrels, 2)?;
    let mut rows = Vec::new();
    for policy in &policies {
        let report = run_evaluation(policy.as_ref(), eval_queries, &handle, &corpus.qrels, 2)?;
        rows.push(compare(&base, &report)?);
    }
    print!("{}", format_comparison_table(&base, &rows));
    println!("(* = significant at p < 0.01)");
    Ok(())
}
