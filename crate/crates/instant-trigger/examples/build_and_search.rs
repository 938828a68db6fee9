//! Build a BM25 index over the bundled mini corpus and run a few prefix
//! searches, showing how the ranking sharpens as tokens arrive.
//!
//! Run: `cargo run --example build_and_search`

use std::path::PathBuf;

use instant_trigger::corpus::{load_documents, load_queries};
use instant_trigger::retrieval::{build_index, RetrieverHandle, DEFAULT_B, DEFAULT_K1};

fn main() -> anyhow::Result<()> {
    let assets = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/mini");
    let docs = load_documents(&assets.join("docs.jsonl"))?;
    let queries = load_queries(&assets.join("queries.tsv"))?;

    let index = build_index(&docs, DEFAULT_K1, DEFAULT_B)?;
    println!(
        "indexed {} docs, avgdl {:.2}, vocabulary {}\n",
        index.n_docs(),
        index.avgdl(),
        index.vocabulary_size()
    );
    let handle = RetrieverHandle::bm25(index, 5);

    let query = &queries[0];
    println!("typing {:?} token by token:", query.raw);
    for i in 1..=query.tokens.len() {
        let prefix = &query.tokens[..i];
        let ranking = handle.retrieve(prefix);
        let shown: Vec<String> = ranking
            .entries
            .iter()
            .take(3)
            .map(|(id, score)| format!("{id}:{score:.3}"))
            .collect();
        println!("  {:<40} -> [{}]", prefix.join(" "), shown.join(", "));
    }
    Ok(())
}
