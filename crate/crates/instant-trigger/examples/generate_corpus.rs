//! Generate a synthetic saliency corpus and inspect what makes it learnable.
//!
//! Run: `cargo run --example generate_corpus`

use instant_trigger::{generate, SynthSpec};

fn main() -> anyhow::Result<()> {
    let spec = SynthSpec {
        n_docs: 50,
        n_queries: 8,
        stopword_pad_range: (2, 4),
        salient_vocab_size: 30,
        vector_dim: 8,
        seed: 42,
    };
    let corpus = generate(&spec)?;

    println!(
        "{} documents, {} queries, {}-d vectors over {} vocabulary entries\n",
        corpus.documents.len(),
        corpus.queries.len(),
        corpus.table.dim(),
        corpus.table.len()
    );

    println!("sample documents (one unique salient key each):");
    for doc in &corpus.documents[..3] {
        println!("  {}: {}", doc.id, doc.text);
    }

    println!("\nsample queries (salient keys shuffled into stop-word padding):");
    for q in &corpus.queries[..4] {
        let rel = corpus.qrels.relevant_set(&q.id).unwrap();
        println!("  {}: {:?} -> relevant {:?}", q.id, q.raw, rel);
    }

    let dir = std::env::temp_dir().join("instant-trigger-example-corpus");
    std::fs::create_dir_all(&dir)?;
    let paths = corpus.write_to_dir(&dir)?;
    println!("\nwrote corpus files next to each other:");
    for p in [&paths.documents, &paths.queries, &paths.qrels, &paths.vectors] {
        println!("  {}", p.display());
    }
    Ok(())
}
