//! Session replay and metric accounting: walk each query token by token
//! under a trigger policy, account Effort and Triggered Searches with early
//! stopping, build mean-AP-by-position quality curves with full replay, and
//! compare methods with a paired significance test.
//!
//! Effort/TS sessions stop as soon as the held results reach the query's
//! best achievable AP; quality curves replay every token so each position
//! is observed. Records always aggregate in ascending query-id order, so
//! reports are byte-identical regardless of worker count.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Qrels, Query};
use crate::metrics::{best_possible_map, paired_t_test, BestMap, MetricsError};
use crate::policies::{apply_action, Action, Policy, SessionState};
use crate::retrieval::RetrieverHandle;

/// Significance level for method comparisons.
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no relevance judgments for query {qid:?}")]
    MissingQrels { qid: String },
    #[error("reports cover different query sets and cannot be compared")]
    QuerySetMismatch,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Outcome of one simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query_id: String,
    /// Tokens typed before the session ended (1..=query length).
    pub n_q: usize,
    /// Searches issued before the session ended.
    pub ts: usize,
    /// Whether the held results reached the query's best achievable AP.
    pub reached_best: bool,
    /// AP of the held results after each consumed token.
    pub map_trace: Vec<f64>,
}

/// One point of the mean-AP-by-position quality curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// 1-based token position.
    pub position: usize,
    /// Mean AP over the queries long enough to reach this position.
    pub mean_map: f64,
    /// Number of queries contributing to the mean.
    pub count: usize,
}

/// Aggregated evaluation of one policy over a query set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub policy: String,
    /// Mean of per-query `n_q`.
    pub effort: f64,
    /// Mean of per-query `ts`.
    pub ts_mean: f64,
    /// Ascending query ids; `n_q`/`ts` align with this order.
    pub query_ids: Vec<String>,
    pub n_q: Vec<usize>,
    pub ts: Vec<usize>,
    /// Full-replay quality curve.
    pub curve: Vec<CurvePoint>,
}

/// Walk one query under a policy. With `early_stop`, the session ends at the
/// first position where the held AP reaches `map_best`; without it, every
/// token is consumed (quality-curve mode).
pub fn simulate_session(
    policy: &dyn Policy,
    query: &Query,
    handle: &RetrieverHandle,
    relevant: &BTreeSet<String>,
    map_best: &BestMap,
    early_stop: bool,
) -> Result<EvalRecord, HarnessError> {
    let total = query.tokens.len();
    let mut state = SessionState::new();
    let mut ts = 0usize;
    let mut map_trace = Vec::with_capacity(total);

    for (pos, token) in query.tokens.iter().enumerate() {
        state.q2.push(token.clone());
        let action = policy.decide(&state, token, pos + 1 == total);
        apply_action(&mut state, action, handle, relevant)?;
        if action == Action::Search {
            ts += 1;
            policy.note_search(&mut state);
        }
        map_trace.push(state.last_map);
        if early_stop && state.last_map >= map_best.map_best {
            return Ok(EvalRecord {
                query_id: query.id.clone(),
                n_q: pos + 1,
                ts,
                reached_best: true,
                map_trace,
            });
        }
    }
    let reached_best = state.last_map >= map_best.map_best;
    Ok(EvalRecord {
        query_id: query.id.clone(),
        n_q: total,
        ts,
        reached_best,
        map_trace,
    })
}

/// Early-stop record plus full-replay trace for one query.
fn evaluate_query(
    policy: &dyn Policy,
    query: &Query,
    handle: &RetrieverHandle,
    qrels: &Qrels,
) -> Result<(EvalRecord, EvalRecord), HarnessError> {
    let relevant = qrels
        .relevant_set(&query.id)
        .ok_or_else(|| HarnessError::MissingQrels {
            qid: query.id.clone(),
        })?;
    let map_best = best_possible_map(query, handle, qrels)?;
    let early = simulate_session(policy, query, handle, &relevant, &map_best, true)?;
    let full = simulate_session(policy, query, handle, &relevant, &map_best, false)?;
    Ok((early, full))
}

/// Evaluate a policy over a query set. `jobs` worker threads split the
/// queries; the aggregation order is fixed (ascending query id), so the
/// result is independent of `jobs`.
pub fn run_evaluation(
    policy: &dyn Policy,
    queries: &[Query],
    handle: &RetrieverHandle,
    qrels: &Qrels,
    jobs: usize,
) -> Result<Report, HarnessError> {
    let mut results: Vec<(EvalRecord, EvalRecord)> = if jobs <= 1 || queries.len() <= 1 {
        queries
            .iter()
            .map(|q| evaluate_query(policy, q, handle, qrels))
            .collect::<Result<_, _>>()?
    } else {
        let workers = jobs.min(queries.len());
        let chunk = queries.len().div_ceil(workers);
        let chunks: Vec<&[Query]> = queries.chunks(chunk).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|q| evaluate_query(policy, q, handle, qrels))
                            .collect::<Result<Vec<_>, _>>()
                    })
                })
                .collect();
            let mut all = Vec::with_capacity(queries.len());
            for h in handles {
                all.extend(h.join().expect("evaluation worker panicked")?);
            }
            Ok::<_, HarnessError>(all)
        })?
    };
    results.sort_by(|a, b| a.0.query_id.cmp(&b.0.query_id));

    let n = results.len().max(1) as f64;
    let effort = results.iter().map(|(e, _)| e.n_q as f64).sum::<f64>() / n;
    let ts_mean = results.iter().map(|(e, _)| e.ts as f64).sum::<f64>() / n;
    let traces: Vec<&[f64]> = results.iter().map(|(_, f)| f.map_trace.as_slice()).collect();
    Ok(Report {
        policy: policy.name().to_string(),
        effort,
        ts_mean,
        query_ids: results.iter().map(|(e, _)| e.query_id.clone()).collect(),
        n_q: results.iter().map(|(e, _)| e.n_q).collect(),
        ts: results.iter().map(|(e, _)| e.ts).collect(),
        curve: curve_from_traces(&traces),
    })
}

/// Mean AP per token position; position i averages only the queries with at
/// least i tokens.
pub fn curve_from_traces(traces: &[&[f64]]) -> Vec<CurvePoint> {
    let max_len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    (1..=max_len)
        .map(|position| {
            let values: Vec<f64> = traces
                .iter()
                .filter_map(|t| t.get(position - 1).copied())
                .collect();
            CurvePoint {
                position,
                mean_map: values.iter().sum::<f64>() / values.len() as f64,
                count: values.len(),
            }
        })
        .collect()
}

/// Quality curve of a policy over a query set (full replay, no early stop).
pub fn quality_curve(
    policy: &dyn Policy,
    queries: &[Query],
    handle: &RetrieverHandle,
    qrels: &Qrels,
) -> Result<Vec<CurvePoint>, HarnessError> {
    let mut traces = Vec::with_capacity(queries.len());
    for query in queries {
        let relevant = qrels
            .relevant_set(&query.id)
            .ok_or_else(|| HarnessError::MissingQrels {
                qid: query.id.clone(),
            })?;
        let map_best = best_possible_map(query, handle, qrels)?;
        let rec = simulate_session(policy, query, handle, &relevant, &map_best, false)?;
        traces.push(rec.map_trace);
    }
    let views: Vec<&[f64]> = traces.iter().map(Vec::as_slice).collect();
    Ok(curve_from_traces(&views))
}

/// One comparison line against a baseline report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub effort: f64,
    pub ts_mean: f64,
    pub delta_effort_pct: f64,
    pub delta_ts_pct: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

/// Percentage deltas of `other` relative to `base` plus a two-tailed paired
/// t-test over the per-query search counts. Requires identical query sets.
pub fn compare(base: &Report, other: &Report) -> Result<ComparisonRow, HarnessError> {
    if base.query_ids != other.query_ids {
        return Err(HarnessError::QuerySetMismatch);
    }
    let base_ts: Vec<f64> = base.ts.iter().map(|&v| v as f64).collect();
    let other_ts: Vec<f64> = other.ts.iter().map(|&v| v as f64).collect();
    let ttest = paired_t_test(&other_ts, &base_ts)?;
    Ok(ComparisonRow {
        policy: other.policy.clone(),
        effort: other.effort,
        ts_mean: other.ts_mean,
        delta_effort_pct: 100.0 * (other.effort - base.effort) / base.effort,
        delta_ts_pct: 100.0 * (other.ts_mean - base.ts_mean) / base.ts_mean,
        t: ttest.t,
        p: ttest.p,
        significant: ttest.p < SIGNIFICANCE_LEVEL,
    })
}

// ---------------------------------------------------------------------------
// Writers for the report formats.
// ---------------------------------------------------------------------------

pub fn save_report_json(report: &Report, path: &Path) -> Result<(), HarnessError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(file, report).map_err(|e| HarnessError::Io(e.into()))
}

pub fn load_report_json(path: &Path) -> Result<Report, HarnessError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    serde_json::from_reader(file).map_err(|e| HarnessError::Io(e.into()))
}

pub const SUMMARY_CSV_HEADER: &str =
    "policy,effort,ts_mean,delta_effort_pct,delta_ts_pct,t,p,significant";

/// Summary CSV for a standalone report (comparison columns left empty).
pub fn write_summary_csv<W: Write>(w: &mut W, report: &Report) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_CSV_HEADER}")?;
    writeln!(w, "{},{},{},,,,,", report.policy, report.effort, report.ts_mean)
}

/// Summary CSV for comparisons against a baseline, one row per compared
/// policy.
pub fn write_comparison_csv<W: Write>(w: &mut W, rows: &[ComparisonRow]) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.policy, r.effort, r.ts_mean, r.delta_effort_pct, r.delta_ts_pct, r.t, r.p,
            r.significant
        )?;
    }
    Ok(())
}

/// Curve CSV `position,mean_map,count`.
pub fn write_curve_csv<W: Write>(w: &mut W, curve: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(w, "position,mean_map,count")?;
    for p in curve {
        writeln!(w, "{},{},{}", p.position, p.mean_map, p.count)?;
    }
    Ok(())
}

/// Human-readable comparison table; significant rows are starred.
pub fn format_comparison_table(base: &Report, rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>10} {:>10} {:>14} {:>12} {:>10} {:>12}\n",
        "policy", "effort", "ts", "dEffort(%)", "dTS(%)", "t", "p"
    ));
    out.push_str(&format!(
        "{:<10} {:>10.4} {:>10.4} {:>14} {:>12} {:>10} {:>12}\n",
        base.policy, base.effort, base.ts_mean, "-", "-", "-", "-"
    ));
    for r in rows {
        let star = if r.significant { "*" } else { "" };
        out.push_str(&format!(
            "{:<10} {:>10.4} {:>10.4} {:>+14.2} {:>+12.2} {:>10.3} {:>12.5}{star}\n",
            r.policy, r.effort, r.ts_mean, r.delta_effort_pct, r.delta_ts_pct, r.t, r.p
        ));
    }
    out
}
