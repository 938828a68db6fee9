//! Train the trigger network on a small synthetic corpus and watch the
//! per-episode reward climb as it learns which tokens are worth a search.
//!
//! Run: `cargo run --example train_dqn` (about half a minute unoptimized;
//! use `--release` for a fast run)

use instant_trigger::retrieval::{build_index, RetrieverHandle, DEFAULT_B, DEFAULT_K1};
use instant_trigger::rl::{train, TrainConfig};
use instant_trigger::{generate, SynthSpec};

fn main() -> anyhow::Result<()> {
    let spec = SynthSpec {
        n_docs: 80,
        n_queries: 30,
        stopword_pad_range: (2, 4),
        salient_vocab_size: 50,
        vector_dim: 12,
        seed: 17,
    };
    let corpus = generate(&spec)?;
    let handle = RetrieverHandle::bm25(build_index(&corpus.documents, DEFAULT_K1, DEFAULT_B)?, 100);

    let config = TrainConfig {
        episodes: 400,
        eps_min: 0.05,
        r_th: 0.0001,
        hidden: 12,
        proj: 12,
        seed: 3,
        ..TrainConfig::default()
    };
    println!("training {} episodes...", config.episodes);
    let outcome = train(&config, &corpus.queries, &handle, &corpus.qrels, &corpus.table)?;

    println!("\nepisode  eps    reward  searches");
    for row in outcome.log.rows.iter().step_by(50) {
        println!(
            "{:>7}  {:<5.3} {:>7.2}  {:>8}",
            row.episode, row.eps, row.total_reward, row.searches
        );
    }
    let rewards: Vec<f64> = outcome.log.rows.iter().map(|r| r.total_reward).collect();
    let head = rewards[..50].iter().sum::<f64>() / 50.0;
    let tail = rewards[rewards.len() - 50..].iter().sum::<f64>() / 50.0;
    println!("\nmean episode reward: first 50 = {head:.2}, last 50 = {tail:.2}");

    let ckpt = std::env::temp_dir().join("instant-trigger-example.ckpt.json");
    instant_trigger::neural::save_checkpoint(&outcome.params, &ckpt)?;
    println!("checkpoint saved to {}", ckpt.display());
    Ok(())
}
