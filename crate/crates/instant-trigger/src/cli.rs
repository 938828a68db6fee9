//! Command-line front end: generate synthetic corpora, build indexes, train
//! the trigger network, evaluate policies, trace single sessions and compare
//! reports.
//!
//! Exit codes: 0 success, 2 usage/input error, 3 refusing to overwrite an
//! existing output without `--force`, 1 internal error.
//!
//! An optional `--config FILE` supplies `key=value` defaults, where keys are
//! the long flag names of the invoked subcommand; explicit flags win.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::corpus::{load_documents, load_qrels, load_queries, tokenize, StopwordList};
use crate::embeddings::{
    compute_doc_vectors, load_doc_vectors, load_word_vectors, save_doc_vectors,
};
use crate::evalharness::{
    compare, format_comparison_table, load_report_json, run_evaluation, save_report_json,
    write_comparison_csv, write_curve_csv, write_summary_csv, Report,
};
use crate::metrics::write_trec_run;
use crate::neural::{load_checkpoint, save_checkpoint};
use crate::policies::{
    Action, Policy, PolicyKind, SearchEveryToken, SearchLastToken, SimilarityMatching,
    SkipStopwords, DEFAULT_SM_THRESHOLD,
};
use crate::retrieval::{
    build_index, load_index, save_index, EmbeddingRetriever, RetrieverHandle, DEFAULT_B,
    DEFAULT_K1, DEFAULT_TOP_K,
};
use crate::rl::{train, DqnPolicy, TrainConfig};
use crate::svg::render_curves;
use crate::synthbench::{generate, SynthSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0} exists; pass --force to overwrite")]
    Overwrite(PathBuf),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Overwrite(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

macro_rules! input_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Input(e.to_string())
            }
        })*
    };
}

input_from!(
    crate::corpus::CorpusError,
    crate::embeddings::EmbeddingError,
    crate::retrieval::RetrievalError,
    crate::metrics::MetricsError,
    crate::neural::NeuralError,
    crate::synthbench::SynthError,
    crate::rl::RlError,
    crate::evalharness::HarnessError
);

fn write_err(e: std::io::Error) -> CliError {
    CliError::Internal(format!("write failed: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "instant-trigger",
    version,
    about = "Trigger policies for instant search: decide per typed token whether to hit the back-end"
)]
pub struct Cli {
    /// Key=value defaults file; explicit flags override.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic saliency corpus (documents, queries, qrels, vectors).
    Synth(SynthArgs),
    /// Build a retriever index from a document collection.
    Index(IndexArgs),
    /// Train the trigger Q-network against a retriever.
    Train(TrainArgs),
    /// Evaluate a trigger policy: Effort, Triggered Searches and quality curve.
    Eval(EvalArgs),
    /// Trace one typing session token by token.
    Simulate(SimulateArgs),
    /// Compare evaluation reports against a baseline.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RetrieverKind {
    Bm25,
    Embedding,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for docs.jsonl, queries.tsv, qrels.txt, vectors.txt.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub docs: usize,
    #[arg(long, default_value_t = 50)]
    pub queries: usize,
    /// Minimum stop-words padded around a query's keys.
    #[arg(long, default_value_t = 2)]
    pub pad_min: usize,
    /// Maximum stop-words padded around a query's keys.
    #[arg(long, default_value_t = 5)]
    pub pad_max: usize,
    /// Number of salient key tokens (one unique key per relevant document).
    #[arg(long, default_value_t = 150)]
    pub salient: usize,
    /// Word-vector dimension.
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = false)]
    pub force: bool,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        n_docs: args.docs,
        n_queries: args.queries,
        stopword_pad_range: (args.pad_min, args.pad_max),
        salient_vocab_size: args.salient,
        vector_dim: args.dim,
        seed: args.seed,
    };
    let corpus = generate(&spec)?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", args.out_dir.display())))?;
    for name in ["docs.jsonl", "queries.tsv", "qrels.txt", "vectors.txt"] {
        ensure_writable(&args.out_dir.join(name), args.force)?;
    }
    corpus.write_to_dir(&args.out_dir)?;
    println!(
        "wrote {} docs, {} queries, {} judged queries, {}-d vectors under {}",
        corpus.documents.len(),
        corpus.queries.len(),
        corpus.qrels.len(),
        corpus.table.dim(),
        args.out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Document collection (JSON lines {"id","text"}).
    #[arg(long, value_name = "FILE")]
    pub docs: PathBuf,
    /// Output index file (bm25) or document-vector file (embedding).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = RetrieverKind::Bm25)]
    pub kind: RetrieverKind,
    #[arg(long, default_value_t = DEFAULT_K1)]
    pub k1: f64,
    #[arg(long, default_value_t = DEFAULT_B)]
    pub b: f64,
    /// Word vectors (required for the embedding kind).
    #[arg(long, value_name = "FILE")]
    pub vectors: Option<PathBuf>,
    /// Build-stats JSON path (default: <out>.stats.json).
    #[arg(long, value_name = "FILE")]
    pub stats: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    pub force: bool,
}

pub fn cmd_index(args: &IndexArgs) -> Result<(), CliError> {
    let docs = load_documents(&args.docs)?;
    ensure_writable(&args.out, args.force)?;
    let stats_path = args
        .stats
        .clone()
        .unwrap_or_else(|| append_ext(&args.out, "stats.json"));
    ensure_writable(&stats_path, args.force)?;
    let stats = match args.kind {
        RetrieverKind::Bm25 => {
            let index = build_index(&docs, args.k1, args.b)?;
            save_index(&index, &args.out)?;
            serde_json::json!({
                "kind": "bm25",
                "n_docs": index.n_docs(),
                "avgdl": index.avgdl(),
                "vocabulary": index.vocabulary_size(),
            })
        }
        RetrieverKind::Embedding => {
            let vectors_path = args.vectors.as_ref().ok_or_else(|| {
                CliError::Input("--vectors is required for --kind embedding".to_string())
            })?;
            let table = load_word_vectors(vectors_path)?;
            let doc_vectors = compute_doc_vectors(&docs, &table);
            save_doc_vectors(&doc_vectors, &args.out)?;
            serde_json::json!({
                "kind": "embedding",
                "n_docs": doc_vectors.len(),
                "dim": table.dim(),
            })
        }
    };
    fs::write(&stats_path, format!("{stats}")).map_err(write_err)?;
    println!("wrote {} and {}", args.out.display(), stats_path.display());
    Ok(())
}

/// Retriever selection shared by train/eval/simulate.
#[derive(Debug, Args)]
pub struct RetrieverArgs {
    #[arg(long, value_enum, default_value_t = RetrieverKind::Bm25)]
    pub retriever: RetrieverKind,
    /// BM25 index file (required for the bm25 retriever).
    #[arg(long, value_name = "FILE")]
    pub index: Option<PathBuf>,
    /// Precomputed document vectors (required for the embedding retriever).
    #[arg(long, value_name = "FILE")]
    pub doc_vectors: Option<PathBuf>,
    /// Ranking depth.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
}

impl RetrieverArgs {
    /// `vectors` is the word-vector table used to embed queries when the
    /// embedding retriever is selected.
    fn build(&self, vectors: Option<&PathBuf>) -> Result<RetrieverHandle, CliError> {
        match self.retriever {
            RetrieverKind::Bm25 => {
                let path = self.index.as_ref().ok_or_else(|| {
                    CliError::Input("--index is required for the bm25 retriever".to_string())
                })?;
                Ok(RetrieverHandle::bm25(load_index(path)?, self.top_k))
            }
            RetrieverKind::Embedding => {
                let dv_path = self.doc_vectors.as_ref().ok_or_else(|| {
                    CliError::Input(
                        "--doc-vectors is required for the embedding retriever".to_string(),
                    )
                })?;
                let vec_path = vectors.ok_or_else(|| {
                    CliError::Input("--vectors is required for the embedding retriever".to_string())
                })?;
                let table = load_word_vectors(vec_path)?;
                let doc_vectors = load_doc_vectors(dv_path)?;
                Ok(RetrieverHandle::embedding(
                    EmbeddingRetriever::new(doc_vectors, table),
                    self.top_k,
                ))
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub queries: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub qrels: PathBuf,
    /// Word vectors feeding the network's frozen embedding layer.
    #[arg(long, value_name = "FILE")]
    pub vectors: PathBuf,
    #[command(flatten)]
    pub retriever: RetrieverArgs,
    /// Output checkpoint path.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Training-log CSV path (default: <out>.log.csv).
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.995)]
    pub eps_decay: f64,
    #[arg(long, default_value_t = 0.7)]
    pub eps_min: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.0)]
    pub r_th: f64,
    #[arg(long, default_value_t = 10_000)]
    pub replay_capacity: usize,
    #[arg(long, default_value_t = 100)]
    pub sync_interval: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub proj: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = false)]
    pub force: bool,
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let queries = load_queries(&args.queries)?;
    let qrels = load_qrels(&args.qrels)?;
    let table = load_word_vectors(&args.vectors)?;
    let handle = args.retriever.build(Some(&args.vectors))?;
    ensure_writable(&args.out, args.force)?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| append_ext(&args.out, "log.csv"));
    ensure_writable(&log_path, args.force)?;

    let config = TrainConfig {
        gamma: args.gamma,
        eps_start: args.eps,
        eps_decay: args.eps_decay,
        eps_min: args.eps_min,
        alpha: args.alpha,
        batch: args.batch,
        r_th: args.r_th,
        replay_capacity: args.replay_capacity,
        target_sync_interval: args.sync_interval,
        episodes: args.episodes,
        seed: args.seed,
        hidden: args.hidden,
        proj: args.proj,
    };
    let outcome = train(&config, &queries, &handle, &qrels, &table)?;

    // stage the checkpoint so an interrupted write never leaves a partial file
    let tmp = append_ext(&args.out, "tmp");
    if let Err(e) = save_checkpoint(&outcome.params, &tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    fs::rename(&tmp, &args.out).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        write_err(e)
    })?;
    outcome.log.save_csv(&log_path).map_err(write_err)?;
    println!(
        "trained {} episodes; checkpoint {}, log {}",
        args.episodes,
        args.out.display(),
        log_path.display()
    );
    Ok(())
}

/// Policy selection shared by eval/simulate.
#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Trigger policy: set, slt, ss, sm or dqn.
    #[arg(long)]
    pub policy: PolicyKind,
    /// Stop-word list file (ss policy; default: bundled English list).
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    /// Word vectors (sm policy and embedding retriever).
    #[arg(long, value_name = "FILE")]
    pub vectors: Option<PathBuf>,
    /// Similarity threshold (sm policy).
    #[arg(long, default_value_t = DEFAULT_SM_THRESHOLD)]
    pub threshold: f64,
    /// Trained checkpoint (dqn policy).
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
}

impl PolicyArgs {
    fn build(&self) -> Result<Box<dyn Policy>, CliError> {
        Ok(match self.policy {
            PolicyKind::Set => Box::new(SearchEveryToken),
            PolicyKind::Slt => Box::new(SearchLastToken),
            PolicyKind::Ss => {
                let stopwords = match &self.stopwords {
                    Some(path) => StopwordList::from_file(path)?,
                    None => StopwordList::default_english(),
                };
                Box::new(SkipStopwords::new(stopwords))
            }
            PolicyKind::Sm => {
                let path = self.vectors.as_ref().ok_or_else(|| {
                    CliError::Input("--vectors is required for the sm policy".to_string())
                })?;
                let table = load_word_vectors(path)?;
                Box::new(SimilarityMatching::new(Arc::new(table), self.threshold))
            }
            PolicyKind::Dqn => {
                let path = self.checkpoint.as_ref().ok_or_else(|| {
                    CliError::Input(
                        "the dqn policy needs a trained network: pass --checkpoint FILE"
                            .to_string(),
                    )
                })?;
                Box::new(DqnPolicy::new(load_checkpoint(path)?))
            }
        })
    }
}

impl clap::builder::ValueParserFactory for PolicyKind {
    type Parser = clap::builder::ValueParser;

    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| {
            s.parse::<PolicyKind>().map_err(|e| {
                clap::Error::raw(clap::error::ErrorKind::InvalidValue, format!("{e}\n"))
            })
        })
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, value_name = "FILE")]
    pub queries: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub qrels: PathBuf,
    #[command(flatten)]
    pub retriever: RetrieverArgs,
    /// Output directory for <policy>.report.json/.summary.csv/.curve.csv.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Parallel per-query sessions; the output does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also render the quality curve as SVG.
    #[arg(long, default_value_t = false)]
    pub svg: bool,
    /// Also write the full-query retrieval run in TREC format.
    #[arg(long, value_name = "FILE")]
    pub trec_run: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    pub force: bool,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let policy = args.policy.build()?;
    let queries = load_queries(&args.queries)?;
    let qrels = load_qrels(&args.qrels)?;
    let handle = args.retriever.build(args.policy.vectors.as_ref())?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let name = args.policy.policy.as_str();
    let report_path = args.out_dir.join(format!("{name}.report.json"));
    let summary_path = args.out_dir.join(format!("{name}.summary.csv"));
    let curve_path = args.out_dir.join(format!("{name}.curve.csv"));
    let svg_path = args.out_dir.join(format!("{name}.curve.svg"));
    ensure_writable(&report_path, args.force)?;
    ensure_writable(&summary_path, args.force)?;
    ensure_writable(&curve_path, args.force)?;
    if args.svg {
        ensure_writable(&svg_path, args.force)?;
    }

    let report = run_evaluation(policy.as_ref(), &queries, &handle, &qrels, args.jobs.max(1))?;
    save_report_json(&report, &report_path)?;
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, &report).map_err(write_err)?;
    fs::write(&summary_path, buf).map_err(write_err)?;
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, &report.curve).map_err(write_err)?;
    fs::write(&curve_path, buf).map_err(write_err)?;
    if args.svg {
        let svg = render_curves(
            &[(report.policy.as_str(), report.curve.as_slice())],
            &format!("mean AP by token position ({})", report.policy),
        );
        fs::write(&svg_path, svg).map_err(write_err)?;
    }
    if let Some(run_path) = &args.trec_run {
        ensure_writable(run_path, args.force)?;
        let mut buf = Vec::new();
        for query in &queries {
            let ranking = handle.retrieve(&query.tokens);
            write_trec_run(&mut buf, &query.id, &ranking, name).map_err(write_err)?;
        }
        fs::write(run_path, buf).map_err(write_err)?;
    }
    println!(
        "policy={} queries={} effort={:.4} ts_mean={:.4} -> {}",
        report.policy,
        report.query_ids.len(),
        report.effort,
        report.ts_mean,
        report_path.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// The query to type, token by token.
    #[arg(long)]
    pub query: String,
    #[command(flatten)]
    pub retriever: RetrieverArgs,
    /// Relevance judgments enabling the per-search AP delta column.
    #[arg(long, value_name = "FILE")]
    pub qrels: Option<PathBuf>,
    /// Query id to look up in --qrels.
    #[arg(long)]
    pub qid: Option<String>,
    /// Emit a JSON array instead of the text trace.
    #[arg(long, default_value_t = false)]
    pub json: bool,
}

#[derive(serde::Serialize)]
struct TraceStep {
    token: String,
    action: Action,
    delta_map: Option<f64>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let policy = args.policy.build()?;
    let handle = args.retriever.build(args.policy.vectors.as_ref())?;
    let tokens = tokenize(&args.query);
    if tokens.is_empty() {
        return Err(CliError::Input(format!(
            "query {:?} tokenizes to nothing",
            args.query
        )));
    }
    let relevant: Option<BTreeSet<String>> = match (&args.qrels, &args.qid) {
        (Some(path), Some(qid)) => {
            let qrels = load_qrels(path)?;
            Some(qrels.relevant_set(qid).ok_or_else(|| {
                CliError::Input(format!("no judgments for query id {qid:?} in {}", path.display()))
            })?)
        }
        (None, None) => None,
        _ => {
            return Err(CliError::Input(
                "--qrels and --qid must be given together".to_string(),
            ))
        }
    };

    let mut state = crate::policies::SessionState::new();
    let mut trace = Vec::with_capacity(tokens.len());
    let total = tokens.len();
    for (pos, token) in tokens.iter().enumerate() {
        state.q2.push(token.clone());
        let action = policy.decide(&state, token, pos + 1 == total);
        let delta = match (&relevant, action) {
            (Some(rel), _) => {
                let d = crate::policies::apply_action(&mut state, action, &handle, rel)?;
                (action == Action::Search).then_some(d)
            }
            (None, Action::Search) => {
                // no judgments: perform the transition without quality accounting
                let pending = std::mem::take(&mut state.q2);
                state.q1.extend(pending);
                state.last_ranking = handle.retrieve(&state.q1);
                None
            }
            (None, Action::Wait) => None,
        };
        if action == Action::Search {
            policy.note_search(&mut state);
        }
        trace.push(TraceStep {
            token: token.clone(),
            action,
            delta_map: delta,
        });
    }

    if args.json {
        println!("{}", serde_json::to_string(&trace).map_err(|e| CliError::Internal(e.to_string()))?);
    } else {
        for step in &trace {
            match step.delta_map {
                Some(d) => println!("{:<20} {:<7} {:+.4}", step.token, step.action.as_str(), d),
                None => println!("{:<20} {:<7}", step.token, step.action.as_str()),
            }
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files; the first is the baseline.
    #[arg(value_name = "REPORT", num_args = 2..)]
    pub reports: Vec<PathBuf>,
    /// Also write the comparison as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    pub force: bool,
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let reports: Vec<Report> = args
        .reports
        .iter()
        .map(|p| load_report_json(p))
        .collect::<Result<_, _>>()?;
    let (base, others) = reports.split_first().expect("clap enforces >= 2 reports");
    let rows = others
        .iter()
        .map(|r| compare(base, r))
        .collect::<Result<Vec<_>, _>>()?;
    print!("{}", format_comparison_table(base, &rows));
    println!("(* = significant at p < 0.01, two-tailed paired t-test on per-query searches)");
    if let Some(csv_path) = &args.csv {
        ensure_writable(csv_path, args.force)?;
        let mut buf = Vec::new();
        write_comparison_csv(&mut buf, &rows).map_err(write_err)?;
        fs::write(csv_path, buf).map_err(write_err)?;
    }
    Ok(())
}

/// Entry point used by the binary. Returns the process exit code.
pub fn run() -> i32 {
    let args = match merged_args() {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version to stdout (exit 0) and usage errors to
            // stderr (exit 2)
            e.exit()
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Index(a) => cmd_index(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Merge `--config FILE` key=value pairs into argv as defaults: a key is
/// appended as `--key value` unless the flag is already present.
fn merged_args() -> Result<Vec<String>, CliError> {
    let argv: Vec<String> = std::env::args().collect();
    let Some(config_path) = find_config_path(&argv) else {
        return Ok(argv);
    };
    let content = fs::read_to_string(&config_path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", config_path.display())))?;
    let mut merged = argv.clone();
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Input(format!(
                "{}:{}: expected key=value",
                config_path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        let flag = format!("--{key}");
        let present = argv
            .iter()
            .any(|a| a == &flag || a.starts_with(&format!("{flag}=")));
        if present {
            continue;
        }
        match value {
            "true" => merged.push(flag),
            "false" => {}
            _ => {
                merged.push(flag);
                merged.push(value.to_string());
            }
        }
    }
    Ok(merged)
}

fn find_config_path(argv: &[String]) -> Option<PathBuf> {
    let mut iter = argv.iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(rest) = arg.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

fn ensure_writable(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Overwrite(path.to_path_buf()));
    }
    Ok(())
}

/// `foo.json` + `tmp` -> `foo.json.tmp`.
fn append_ext(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}
