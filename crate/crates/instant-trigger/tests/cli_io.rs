//! End-to-end tests of the `instant-trigger` binary: exit codes, file
//! outputs and the machine-readable simulate format.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_instant-trigger"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

/// Generate a small corpus + index under `dir`; returns common path strings.
fn prepare(dir: &Path) -> (String, String, String, String, String) {
    let data = path_str(&dir.join("data"));
    assert_code(
        &run(&[
            "synth", "--out-dir", &data, "--docs", "40", "--queries", "10", "--salient", "25",
            "--dim", "6", "--seed", "21",
        ]),
        0,
    );
    let index = path_str(&dir.join("index.istl"));
    assert_code(
        &run(&["index", "--docs", &format!("{data}/docs.jsonl"), "--out", &index]),
        0,
    );
    (
        data.clone(),
        index,
        format!("{data}/queries.tsv"),
        format!("{data}/qrels.txt"),
        format!("{data}/vectors.txt"),
    )
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let (_data, index, queries, qrels, vectors) = prepare(dir.path());

    let ckpt = path_str(&dir.path().join("ckpt.json"));
    assert_code(
        &run(&[
            "train", "--queries", &queries, "--qrels", &qrels, "--vectors", &vectors,
            "--index", &index, "--out", &ckpt, "--episodes", "30", "--eps-min", "0.05",
            "--r-th", "0.0001", "--hidden", "8", "--proj", "8", "--seed", "4",
        ]),
        0,
    );
    assert!(dir.path().join("ckpt.json").exists());
    assert!(dir.path().join("ckpt.json.log.csv").exists());
    let log = std::fs::read_to_string(dir.path().join("ckpt.json.log.csv")).unwrap();
    assert!(log.starts_with("episode,eps,total_reward,mean_loss,searches\n"));
    assert_eq!(log.lines().count(), 31);

    let reports = path_str(&dir.path().join("reports"));
    for policy in ["set", "slt", "ss"] {
        assert_code(
            &run(&[
                "eval", "--policy", policy, "--queries", &queries, "--qrels", &qrels,
                "--index", &index, "--out-dir", &reports,
            ]),
            0,
        );
    }
    assert_code(
        &run(&[
            "eval", "--policy", "dqn", "--checkpoint", &ckpt, "--queries", &queries,
            "--qrels", &qrels, "--index", &index, "--out-dir", &reports, "--svg",
        ]),
        0,
    );
    assert!(dir.path().join("reports/dqn.curve.svg").exists());

    let out = run(&[
        "report",
        &format!("{reports}/set.report.json"),
        &format!("{reports}/slt.report.json"),
        &format!("{reports}/ss.report.json"),
        &format!("{reports}/dqn.report.json"),
    ]);
    assert_code(&out, 0);
    let table = String::from_utf8_lossy(&out.stdout);
    // three comparison rows plus the baseline line
    assert!(table.contains("set"));
    assert!(table.contains("slt"));
    assert!(table.contains("ss"));
    assert!(table.contains("dqn"));
}

#[test]
fn simulate_emits_parsable_json() {
    let dir = tempfile::tempdir().unwrap();
    let (data, index, _queries, qrels, _vectors) = prepare(dir.path());

    // take the first generated query so judgments exist
    let queries = std::fs::read_to_string(format!("{data}/queries.tsv")).unwrap();
    let (qid, text) = queries.lines().next().unwrap().split_once('\t').unwrap();

    let out = run(&[
        "simulate", "--policy", "ss", "--index", &index, "--query", text, "--qrels", &qrels,
        "--qid", qid, "--json",
    ]);
    assert_code(&out, 0);
    let steps: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let steps = steps.as_array().unwrap();
    assert_eq!(steps.len(), text.split_whitespace().count());
    for step in steps {
        let action = step["action"].as_str().unwrap();
        assert!(action == "WAIT" || action == "SEARCH");
        if action == "WAIT" {
            assert!(step["delta_map"].is_null());
        }
    }
    // the key token must trigger a search under ss (pads are stop-words)
    assert!(steps
        .iter()
        .any(|s| s["token"].as_str().unwrap().starts_with("key")
            && s["action"] == "SEARCH"));
}

#[test]
fn simulate_text_trace_has_one_line_per_token() {
    let dir = tempfile::tempdir().unwrap();
    let (_data, index, _queries, _qrels, _vectors) = prepare(dir.path());
    let out = run(&[
        "simulate", "--policy", "set", "--index", &index, "--query", "alpha beta gamma",
    ]);
    assert_code(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.contains("SEARCH")));
}

#[test]
fn train_zero_episodes_writes_valid_untrained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (_data, index, queries, qrels, vectors) = prepare(dir.path());
    let ckpt = path_str(&dir.path().join("untrained.json"));
    assert_code(
        &run(&[
            "train", "--queries", &queries, "--qrels", &qrels, "--vectors", &vectors,
            "--index", &index, "--out", &ckpt, "--episodes", "0", "--hidden", "6",
            "--proj", "4", "--seed", "1",
        ]),
        0,
    );
    let params = instant_trigger::neural::load_checkpoint(dir.path().join("untrained.json").as_path())
        .expect("checkpoint loads");
    assert_eq!(params.dims.hidden, 6);
    assert_eq!(params.dims.proj, 4);
    // empty log besides the header
    let log = std::fs::read_to_string(dir.path().join("untrained.json.log.csv")).unwrap();
    assert_eq!(log, "episode,eps,total_reward,mean_loss,searches\n");
}

#[test]
fn missing_input_exits_2() {
    let out = run(&["index", "--docs", "/nonexistent/docs.jsonl", "--out", "/tmp/never.istl"]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn dqn_without_checkpoint_exits_2_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let (_data, index, queries, qrels, _vectors) = prepare(dir.path());
    let out = run(&[
        "eval", "--policy", "dqn", "--queries", &queries, "--qrels", &qrels, "--index", &index,
        "--out-dir", &path_str(&dir.path().join("r")),
    ]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--checkpoint"));
}

#[test]
fn refusing_to_overwrite_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _index, _queries, _qrels, _vectors) = prepare(dir.path());
    // second synth into the same directory without --force
    let out = run(&["synth", "--out-dir", &data, "--docs", "10", "--queries", "3", "--salient", "5"]);
    assert_code(&out, 3);
    // --force allows it
    let out = run(&[
        "synth", "--out-dir", &data, "--docs", "10", "--queries", "3", "--salient", "5", "--force",
    ]);
    assert_code(&out, 0);
}

#[test]
fn unknown_policy_is_a_usage_error() {
    let out = run(&[
        "eval", "--policy", "nope", "--queries", "q", "--qrels", "r", "--index", "i",
        "--out-dir", "o",
    ]);
    assert_code(&out, 2);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let (_data, _index, _queries, _qrels, _vectors) = prepare(dir.path());
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "docs=5\nqueries=2\nsalient=3\nseed=9\n").unwrap();

    let out_a = path_str(&dir.path().join("a"));
    assert_code(
        &run(&["synth", "--out-dir", &out_a, "--config", &path_str(&cfg)]),
        0,
    );
    let docs = std::fs::read_to_string(dir.path().join("a/docs.jsonl")).unwrap();
    assert_eq!(docs.lines().count(), 5, "config value applied");

    // explicit flag beats the config value
    let out_b = path_str(&dir.path().join("b"));
    assert_code(
        &run(&[
            "synth", "--out-dir", &out_b, "--config", &path_str(&cfg), "--docs", "7",
        ]),
        0,
    );
    let docs = std::fs::read_to_string(dir.path().join("b/docs.jsonl")).unwrap();
    assert_eq!(docs.lines().count(), 7, "flag overrides config");
}

#[test]
fn eval_jobs_flag_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let (_data, index, queries, qrels, _vectors) = prepare(dir.path());
    let r1 = path_str(&dir.path().join("r1"));
    let r4 = path_str(&dir.path().join("r4"));
    for (out_dir, jobs) in [(&r1, "1"), (&r4, "4")] {
        assert_code(
            &run(&[
                "eval", "--policy", "set", "--queries", &queries, "--qrels", &qrels,
                "--index", &index, "--out-dir", out_dir, "--jobs", jobs,
            ]),
            0,
        );
    }
    let a = std::fs::read(dir.path().join("r1/set.report.json")).unwrap();
    let b = std::fs::read(dir.path().join("r4/set.report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trec_run_output_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let (_data, index, queries, qrels, _vectors) = prepare(dir.path());
    let run_path = path_str(&dir.path().join("run.trec"));
    assert_code(
        &run(&[
            "eval", "--policy", "set", "--queries", &queries, "--qrels", &qrels, "--index",
            &index, "--out-dir", &path_str(&dir.path().join("r")), "--trec-run", &run_path,
        ]),
        0,
    );
    let text = std::fs::read_to_string(&run_path).unwrap();
    for line in text.lines() {
        let fields: Vec<&str> = line.split(' ').collect();
        assert_eq!(fields.len(), 6);
        assert_eq!(fields[1], "Q0");
        fields[3].parse::<usize>().unwrap();
        fields[4].parse::<f64>().unwrap();
    }
}
