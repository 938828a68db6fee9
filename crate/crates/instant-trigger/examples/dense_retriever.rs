//! Run the evaluation against the cosine-similarity dense retriever instead
//! of BM25; the trigger policies treat either back-end as a black box.
//!
//! Run: `cargo run --example dense_retriever`

use instant_trigger::corpus::StopwordList;
use instant_trigger::embeddings::compute_doc_vectors;
use instant_trigger::policies::{SearchEveryToken, SkipStopwords};
use instant_trigger::retrieval::{EmbeddingRetriever, RetrieverHandle};
use instant_trigger::{generate, run_evaluation, SynthSpec};

fn main() -> anyhow::Result<()> {
    let corpus = generate(&SynthSpec {
        n_docs: 60,
        n_queries: 15,
        stopword_pad_range: (2, 4),
        salient_vocab_size: 40,
        vector_dim: 16,
        seed: 23,
    })?;

    let doc_vectors = compute_doc_vectors(&corpus.documents, &corpus.table);
    let handle = RetrieverHandle::embedding(
        EmbeddingRetriever::new(doc_vectors, corpus.table.clone()),
        1000,
    );

    let set = run_evaluation(&SearchEveryToken, &corpus.queries, &handle, &corpus.qrels, 1)?;
    let ss = run_evaluation(
        &SkipStopwords::new(StopwordList::default_english()),
        &corpus.queries,
        &handle,
        &corpus.qrels,
        1,
    )?;
    println!("dense retriever over {} documents", handle.n_docs());
    for r in [&set, &ss] {
        println!(
            "  {:<4} effort {:.3}  searches/query {:.3}",
            r.policy, r.effort, r.ts_mean
        );
    }
    Ok(())
}
