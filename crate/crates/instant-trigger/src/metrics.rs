//! Ranking-quality math: average precision with trec_eval-compatible
//! semantics, per-query best-achievable quality over typed prefixes, and a
//! two-tailed paired t-test for method comparison.

use std::collections::BTreeSet;
use std::io::Write;

use thiserror::Error;

use crate::corpus::{Qrels, Query};
use crate::retrieval::{retrieve, Ranking, RetrieverHandle};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("average precision is undefined for an empty relevant set")]
    EmptyRelevantSet,
    #[error("no relevance judgments for query {qid:?}")]
    MissingQrels { qid: String },
    #[error("paired samples differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("paired t-test requires at least 2 samples, got {n}")]
    TooFewSamples { n: usize },
}

/// Average precision of a ranking against binary relevance.
///
/// `AP = sum over ranks r holding a relevant doc of (precision@r) / |relevant|`,
/// computed over the returned list only; the denominator is the total number
/// of judged-relevant documents, not just those retrieved.
pub fn average_precision(
    ranking: &Ranking,
    relevant: &BTreeSet<String>,
) -> Result<f64, MetricsError> {
    if relevant.is_empty() {
        return Err(MetricsError::EmptyRelevantSet);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, (doc_id, _)) in ranking.entries.iter().enumerate() {
        if relevant.contains(doc_id) {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

/// Best average precision achievable by searching any prefix of the query,
/// and the earliest token position that attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct BestMap {
    pub query_id: String,
    pub map_best: f64,
    /// 1-based token position; smallest position achieving `map_best`.
    pub first_position: usize,
}

/// Exhaustively search every prefix `x1..xi` of the query and record the
/// maximum AP together with the earliest position attaining it.
pub fn best_possible_map(
    query: &Query,
    handle: &RetrieverHandle,
    qrels: &Qrels,
) -> Result<BestMap, MetricsError> {
    let relevant = qrels
        .relevant_set(&query.id)
        .ok_or_else(|| MetricsError::MissingQrels {
            qid: query.id.clone(),
        })?;
    let mut map_best = 0.0;
    let mut first_position = 1;
    for i in 1..=query.tokens.len() {
        let ranking = retrieve(handle, &query.tokens[..i], handle.top_k);
        let ap = average_precision(&ranking, &relevant)?;
        if ap > map_best {
            map_best = ap;
            first_position = i;
        }
    }
    Ok(BestMap {
        query_id: query.id.clone(),
        map_best,
        first_position,
    })
}

/// Result of a two-tailed paired t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
}

/// Two-tailed paired t-test on equal-length samples.
///
/// Uses the sample standard deviation (n-1 denominator) of the differences.
/// Conventions: all-zero differences yield (t=0, p=1); zero-variance nonzero
/// differences yield (t=+/-inf, p=0).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0 }
        } else {
            TTest {
                t: mean.signum() * f64::INFINITY,
                p: 0.0,
            }
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let df = (n - 1) as f64;
    let p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    Ok(TTest { t, p })
}

/// Write one query's ranking in TREC run format:
/// `qid Q0 docid rank score tag`, rank starting at 1.
pub fn write_trec_run<W: Write>(
    w: &mut W,
    query_id: &str,
    ranking: &Ranking,
    tag: &str,
) -> std::io::Result<()> {
    for (rank, (doc_id, score)) in ranking.entries.iter().enumerate() {
        writeln!(w, "{query_id} Q0 {doc_id} {} {score} {tag}", rank + 1)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta function I_x(a, b), evaluated by the Lentz
// continued fraction to 1e-10. This is the p-value backbone: the two-tailed
// Student-t tail probability is I_{df/(df+t^2)}(df/2, 1/2).
// ---------------------------------------------------------------------------

const BETA_EPS: f64 = 1e-10;
const MAX_ITER: usize = 400;

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g=7, n=9.
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection formula
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let tiny = 1e-300;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_EPS {
            break;
        }
    }
    h
}

/// I_x(a, b) for a, b > 0 and x in [0, 1].
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln())
        .exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::retrieval::{build_index, RetrieverHandle, DEFAULT_B, DEFAULT_K1};

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn ranking(ids: &[&str]) -> Ranking {
        Ranking {
            entries: ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.to_string(), 1.0 / (i + 1) as f64))
                .collect(),
        }
    }

    #[test]
    fn ap_perfect_ranking() {
        assert_eq!(
            average_precision(&ranking(&["d1", "d2"]), &set(&["d1"])).unwrap(),
            1.0
        );
    }

    #[test]
    fn ap_hand_fixture() {
        // relevant={d1,d2}, ranking=[d1,x,d2] -> (1/1 + 2/3)/2 = 5/6
        let ap = average_precision(&ranking(&["d1", "x", "d2"]), &set(&["d1", "d2"])).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn ap_empty_ranking_is_zero() {
        assert_eq!(
            average_precision(&Ranking::empty(), &set(&["d1"])).unwrap(),
            0.0
        );
    }

    #[test]
    fn ap_rejects_empty_relevant_set() {
        assert!(matches!(
            average_precision(&ranking(&["d1"]), &BTreeSet::new()).unwrap_err(),
            MetricsError::EmptyRelevantSet
        ));
    }

    fn toy_handle() -> RetrieverHandle {
        // only "zebra" retrieves dz; "apple" retrieves da; stop-ish words hit nothing
        let docs = vec![
            Document::new("da", "apple fruit"),
            Document::new("dz", "zebra animal"),
            Document::new("dx", "fruit animal common"),
        ];
        RetrieverHandle::bm25(build_index(&docs, DEFAULT_K1, DEFAULT_B).unwrap(), 10)
    }

    #[test]
    fn best_map_full_query_needed() {
        let q = Query {
            id: "q1".to_string(),
            raw: "the of zebra".to_string(),
            tokens: vec!["the".into(), "of".into(), "zebra".into()],
        };
        let mut qrels = Qrels::new();
        qrels.set("q1", "dz", 1);
        let bm = best_possible_map(&q, &toy_handle(), &qrels).unwrap();
        assert_eq!(bm.map_best, 1.0);
        assert_eq!(bm.first_position, 3);
    }

    #[test]
    fn best_map_first_token_sufficient() {
        let q = Query {
            id: "q2".to_string(),
            raw: "apple the".to_string(),
            tokens: vec!["apple".into(), "the".into()],
        };
        let mut qrels = Qrels::new();
        qrels.set("q2", "da", 1);
        let bm = best_possible_map(&q, &toy_handle(), &qrels).unwrap();
        assert_eq!(bm.map_best, 1.0);
        assert_eq!(bm.first_position, 1);
    }

    #[test]
    fn best_map_takes_earliest_of_equal_prefixes() {
        // Prefix APs brute-forced by hand on the toy index: relevant={da, dz};
        // "qqq" matches nothing (AP 0); "qqq fruit" retrieves [da, dx] since the
        // shorter da outscores dx, so AP = (1/1)/2 = 0.5; the third token matches
        // nothing and leaves AP at 0.5. Expected (map_best, first_position) = (0.5, 2).
        let q = Query {
            id: "q3".to_string(),
            raw: "qqq fruit zzz".to_string(),
            tokens: vec!["qqq".into(), "fruit".into(), "zzz".into()],
        };
        let mut qrels = Qrels::new();
        qrels.set("q3", "da", 1);
        qrels.set("q3", "dz", 1);
        let bm = best_possible_map(&q, &toy_handle(), &qrels).unwrap();
        assert_eq!(bm.map_best, 0.5);
        assert_eq!(bm.first_position, 2);
    }

    #[test]
    fn best_map_requires_qrels() {
        let q = Query {
            id: "missing".to_string(),
            raw: "apple".to_string(),
            tokens: vec!["apple".into()],
        };
        assert!(matches!(
            best_possible_map(&q, &toy_handle(), &Qrels::new()).unwrap_err(),
            MetricsError::MissingQrels { .. }
        ));
    }

    #[test]
    fn t_test_identical_inputs() {
        let a = [1.0, 2.0, 3.0];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn t_test_zero_variance_nonzero_mean() {
        let a = [2.0, 3.0, 4.0];
        let b = [1.0, 2.0, 3.0];
        let r = paired_t_test(&a, &b).unwrap();
        assert!(r.t.is_infinite() && r.t > 0.0);
        assert_eq!(r.p, 0.0);
    }

    #[test]
    fn t_test_reference_fixture() {
        // independently computed: t=3.872983346207417, p=0.030466291662170977
        let r = paired_t_test(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((r.t - 3.872_983_346_207_417).abs() < 1e-12, "t={}", r.t);
        assert!((r.p - 0.030_466_291_662_170_977).abs() < 1e-9, "p={}", r.p);
    }

    #[test]
    fn t_test_second_reference_fixture() {
        // independently computed: t=1.777208469863677, p=0.15017209008134558
        let a = [2.1, 1.9, 3.0, 2.5, 2.2];
        let b = [2.0, 2.0, 2.0, 2.0, 2.0];
        let r = paired_t_test(&a, &b).unwrap();
        assert!((r.t - 1.777_208_469_863_677).abs() < 1e-12);
        assert!((r.p - 0.150_172_090_081_345_58).abs() < 1e-9);
    }

    #[test]
    fn t_test_antisymmetric() {
        let a = [1.0, 2.0, 3.5, 0.5];
        let b = [0.2, 2.2, 3.0, 1.0];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn t_test_length_mismatch() {
        assert!(matches!(
            paired_t_test(&[1.0], &[1.0, 2.0]).unwrap_err(),
            MetricsError::LengthMismatch { .. }
        ));
    }

    #[test]
    fn incomplete_beta_reference_values() {
        // frozen from an independent statistical library
        let cases = [
            (1.5, 0.5, 1.0 / 6.0, 0.030_466_291_662_170_977),
            (0.5, 0.5, 0.3, 0.369_010_119_565_545_36),
            (2.0, 3.0, 0.4, 0.524_799_999_999_999_9),
            (5.0, 0.5, 0.9, 0.316_642_915_020_012_2),
        ];
        for (a, b, x, expected) in cases {
            let got = regularized_incomplete_beta(a, b, x);
            assert!(
                (got - expected).abs() < 1e-9,
                "I_{x}({a},{b}) = {got}, expected {expected}"
            );
        }
        assert_eq!(regularized_incomplete_beta(2.0, 2.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 2.0, 1.0), 1.0);
    }

    #[test]
    fn trec_run_format() {
        let mut buf = Vec::new();
        write_trec_run(&mut buf, "q1", &ranking(&["d1", "d2"]), "runA").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "q1 Q0 d1 1 1 runA\nq1 Q0 d2 2 0.5 runA\n");
    }
}
