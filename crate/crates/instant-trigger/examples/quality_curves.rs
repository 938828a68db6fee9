//! Compare the quality curve (mean AP at every token position) of pure
//! instant search against a trigger policy, and render both as SVG.
//!
//! Run: `cargo run --example quality_curves`

use std::path::PathBuf;

use instant_trigger::corpus::{load_documents, load_qrels, load_queries, StopwordList};
use instant_trigger::evalharness::quality_curve;
use instant_trigger::policies::{SearchEveryToken, SkipStopwords};
use instant_trigger::retrieval::{build_index, RetrieverHandle, DEFAULT_B, DEFAULT_K1};
use instant_trigger::svg::render_curves;

fn main() -> anyhow::Result<()> {
    let assets = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/mini");
    let docs = load_documents(&assets.join("docs.jsonl"))?;
    let queries = load_queries(&assets.join("queries.tsv"))?;
    let qrels = load_qrels(&assets.join("qrels.txt"))?;
    let handle = RetrieverHandle::bm25(build_index(&docs, DEFAULT_K1, DEFAULT_B)?, 1000);

    let set_curve = quality_curve(&SearchEveryToken, &queries, &handle, &qrels)?;
    let ss_curve = quality_curve(
        &SkipStopwords::new(StopwordList::default_english()),
        &queries,
        &handle,
        &qrels,
    )?;

    println!("position  set      ss       queries");
    for (s, k) in set_curve.iter().zip(&ss_curve) {
        println!(
            "{:>8}  {:<8.4} {:<8.4} {:>7}",
            s.position, s.mean_map, k.mean_map, s.count
        );
    }

    let svg = render_curves(
        &[("set", &set_curve), ("ss", &ss_curve)],
        "mean AP by token position",
    );
    let path = std::env::temp_dir().join("instant-trigger-quality.svg");
    std::fs::write(&path, svg)?;
    println!("\nSVG written to {}", path.display());
    Ok(())
}
