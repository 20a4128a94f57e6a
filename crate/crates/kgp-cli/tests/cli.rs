//! End-to-end tests for the `kgp` binary: each test drives the compiled
//! executable through `std::process::Command` against files in a temp dir,
//! exactly as a user would.

mod common;

use common::{StubResponse, StubServer};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn kgp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kgp"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn kgp")
}

fn stdout_lines(output: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&output.stdout)
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("stdout lines are JSON"))
        .collect()
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed: {}",
        stderr_text(output)
    );
}

/// gen-synth → build-graph in `dir`; returns (corpus, goldens, graph) paths.
fn make_world(dir: &Path, total: usize) -> (PathBuf, PathBuf, PathBuf) {
    let bundle = dir.join("bundle");
    let out = run(kgp()
        .args(["gen-synth", "--total", &total.to_string(), "--distractors", "3"])
        .arg("--out")
        .arg(&bundle));
    assert_success(&out);

    let corpus = bundle.join("corpus.jsonl");
    let goldens = bundle.join("goldens.jsonl");
    let graph = dir.join("graph.bin");
    let out = run(kgp()
        .arg("build-graph")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(&graph)
        .args(["--k-edges", "10"]));
    assert_success(&out);
    (corpus, goldens, graph)
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let out = run(kgp().arg(flag));
        assert_eq!(out.status.code(), Some(0), "{flag} should exit 0");
    }
    let out = run(kgp().args(["traverse", "--help"]));
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = run(kgp().args(["eval", "--no-such-flag"]));
    assert_eq!(out.status.code(), Some(1));

    let out = run(kgp().arg("no-such-command"));
    assert_eq!(out.status.code(), Some(1));

    // gen-synth needs exactly one of --spec / --total
    let out = run(kgp().args(["gen-synth", "--out", "/tmp/unused"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_text(&out).contains("--spec or --total"));
}

#[test]
fn offline_pipeline_reaches_perfect_oracle_recall() {
    let dir = TempDir::new().unwrap();
    let (corpus, goldens, graph) = make_world(dir.path(), 20);
    let report_path = dir.path().join("report.json");

    let out = run(kgp()
        .arg("eval")
        .arg("--graph")
        .arg(&graph)
        .arg("--corpus")
        .arg(&corpus)
        .arg("--questions")
        .arg(&goldens)
        .args(["--agents", "oracle,stop"])
        .arg("--out")
        .arg(&report_path));
    assert_success(&out);

    // One summary line per agent, machine-readable.
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 2);
    let oracle = &lines[0];
    assert_eq!(oracle["agent"], "oracle");
    assert_eq!(oracle["mean_em"], 1.0);
    assert_eq!(oracle["errors"], 0);
    let stop = &lines[1];
    assert_eq!(stop["agent"], "stop");
    assert!(stop["mean_em"].as_f64().unwrap() < 1.0);

    // The written report carries per-question rows that recompute the mean.
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let rows = report["agents"][0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 20);
    let mean: f64 = rows.iter().map(|r| r["em"].as_f64().unwrap()).sum::<f64>() / 20.0;
    assert_eq!(mean, 1.0);
}

#[test]
fn missing_corpus_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out = run(kgp()
        .arg("build-graph")
        .arg("--corpus")
        .arg(&missing)
        .arg("--out")
        .arg(dir.path().join("g.bin")));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).contains("nope.jsonl"));
}

#[test]
fn graph_builds_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let (corpus, _, graph) = make_world(dir.path(), 8);
    let again = dir.path().join("again.bin");
    let out = run(kgp()
        .arg("build-graph")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(&again)
        .args(["--k-edges", "10"]));
    assert_success(&out);
    assert_eq!(
        std::fs::read(&graph).unwrap(),
        std::fs::read(&again).unwrap(),
        "identical inputs must produce byte-identical graphs"
    );
}

#[test]
fn traverse_emits_paths_and_optional_trace() {
    let dir = TempDir::new().unwrap();
    let (corpus, _, graph) = make_world(dir.path(), 8);

    let base = |cmd: &mut Command| {
        cmd.arg("traverse")
            .arg("--graph")
            .arg(&graph)
            .arg("--corpus")
            .arg(&corpus)
            .args(["--query", "What is the", "--agent", "keyword"]);
    };
    let mut cmd = kgp();
    base(&mut cmd);
    let out = run(&mut cmd);
    assert_success(&out);
    let summary = &stdout_lines(&out)[0];
    assert_eq!(summary["agent"], "keyword-diff");
    let retrieved = summary["retrieved"].as_array().unwrap();
    assert!(!retrieved.is_empty() && retrieved.len() <= 30);
    assert!(summary.get("trace").is_none());

    let mut cmd = kgp();
    base(&mut cmd);
    cmd.arg("--trace");
    let out = run(&mut cmd);
    assert_success(&out);
    let summary = &stdout_lines(&out)[0];
    let trace = summary["trace"].as_array().unwrap();
    assert!(!trace.is_empty());
    assert!(trace[0].get("decision").is_some());
}

#[test]
fn oracle_traverse_requires_golden_records() {
    let dir = TempDir::new().unwrap();
    let (corpus, goldens, graph) = make_world(dir.path(), 8);

    let out = run(kgp()
        .arg("traverse")
        .arg("--graph")
        .arg(&graph)
        .arg("--corpus")
        .arg(&corpus)
        .args(["--query", "anything", "--agent", "oracle"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_text(&out).contains("--questions"));

    // With goldens supplied, the oracle resolves a real question.
    let first_question = {
        let text = std::fs::read_to_string(&goldens).unwrap();
        let rec: serde_json::Value =
            serde_json::from_str(text.lines().next().unwrap()).unwrap();
        rec["question"].as_str().unwrap().to_string()
    };
    let out = run(kgp()
        .arg("traverse")
        .arg("--graph")
        .arg(&graph)
        .arg("--corpus")
        .arg(&corpus)
        .arg("--questions")
        .arg(&goldens)
        .args(["--query", &first_question, "--agent", "oracle"]));
    assert_success(&out);
}

#[test]
fn followupqa_and_benchmark_round_trip() {
    let dir = TempDir::new().unwrap();
    let hotpot = dir.path().join("hotpot.jsonl");
    std::fs::write(
        &hotpot,
        concat!(
            r#"{"id":"q1","question":"What is the capital of the country where the Rhine ends?","type":"bridge","answer":"Amsterdam","supporting":[{"title":"Rhine","text":"The Rhine ends in the Netherlands."},{"title":"Netherlands","text":"The capital of the Netherlands is Amsterdam."}]}"#,
            "\n",
            r#"{"id":"q2","question":"What is the boiling point of water?","type":"single","answer":"100 C","supporting":[{"title":"Water","text":"Water boils at 100 degrees Celsius."}]}"#,
            "\n",
        ),
    )
    .unwrap();

    let samples = dir.path().join("samples.jsonl");
    let out = run(kgp()
        .arg("gen-followupqa")
        .arg("--in")
        .arg(&hotpot)
        .arg("--out")
        .arg(&samples));
    assert_success(&out);
    assert_eq!(stdout_lines(&out)[0]["samples"], 2);

    let bench = dir.path().join("bench.json");
    let out = run(kgp()
        .arg("benchmark-agent")
        .arg("--testset")
        .arg(&samples)
        .args(["--agent", "stop"])
        .arg("--out")
        .arg(&bench));
    assert_success(&out);
    let summary = &stdout_lines(&out)[0];
    // The always-stop agent is right on the NA row, wrong on the bridge row.
    assert_eq!(summary["stop_accuracy"], 1.0);
    assert_eq!(summary["mean_rouge1"], 0.0);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&bench).unwrap()).unwrap();
    assert_eq!(report["histograms"]["rouge1"].as_array().unwrap().len(), 10);

    // The oracle agent cannot run detached from its corpus.
    let out = run(kgp()
        .arg("benchmark-agent")
        .arg("--testset")
        .arg(&samples)
        .args(["--agent", "oracle"])
        .arg("--out")
        .arg(&bench));
    assert_eq!(out.status.code(), Some(1));
}

fn write_config(path: &Path, body: &str) {
    std::fs::write(path, body).unwrap();
}

#[test]
fn answer_command_round_trips_through_the_endpoint() {
    let server = StubServer::start(|req| {
        let content = req.json()["messages"][1]["content"]
            .as_str()
            .unwrap()
            .to_string();
        assert!(content.contains("Question:"), "prompt carries the question");
        StubResponse::chat("stub answer")
    });

    let dir = TempDir::new().unwrap();
    let (corpus, goldens, graph) = make_world(dir.path(), 8);
    let config = dir.path().join("engine.toml");
    write_config(
        &config,
        &format!(
            "[llm.answerer]\nbase_url = \"{}\"\nmodel = \"stub\"\n",
            server.base_url()
        ),
    );

    let answers = dir.path().join("answers.jsonl");
    let out = run(kgp()
        .arg("--config")
        .arg(&config)
        .arg("answer")
        .arg("--graph")
        .arg(&graph)
        .arg("--corpus")
        .arg(&corpus)
        .arg("--questions")
        .arg(&goldens)
        .args(["--agent", "keyword"])
        .arg("--out")
        .arg(&answers));
    assert_success(&out);
    assert!(server.hits() > 0);

    let text = std::fs::read_to_string(&answers).unwrap();
    let records: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 8);
    for rec in &records {
        assert_eq!(rec["answer"], "stub answer");
        assert!(!rec["retrieved"].as_array().unwrap().is_empty());
    }
}

#[test]
fn eval_with_answers_judges_through_the_endpoint() {
    let server = StubServer::start(|req| {
        let content = req.json()["messages"][1]["content"]
            .as_str()
            .unwrap()
            .to_string();
        if content.trim_end().ends_with("Verdict:") {
            StubResponse::chat("correct")
        } else {
            StubResponse::chat("stub answer")
        }
    });

    let dir = TempDir::new().unwrap();
    let (corpus, goldens, graph) = make_world(dir.path(), 6);
    let config = dir.path().join("engine.toml");
    write_config(
        &config,
        &format!(
            "[llm.answerer]\nbase_url = \"{url}\"\nmodel = \"stub\"\n\n\
             [llm.judge]\nbase_url = \"{url}\"\nmodel = \"stub\"\n",
            url = server.base_url()
        ),
    );

    let report = dir.path().join("report.json");
    let out = run(kgp()
        .arg("--config")
        .arg(&config)
        .arg("eval")
        .arg("--graph")
        .arg(&graph)
        .arg("--corpus")
        .arg(&corpus)
        .arg("--questions")
        .arg(&goldens)
        .args(["--agents", "oracle", "--with-answers", "--judge", "llm"])
        .arg("--out")
        .arg(&report));
    assert_success(&out);
    let summary = &stdout_lines(&out)[0];
    assert_eq!(summary["accuracy"], 1.0, "stub judge approves everything");
}

#[test]
fn llm_agent_traversal_reads_the_agent_section() {
    let server = StubServer::start(|_| StubResponse::chat("NA"));

    let dir = TempDir::new().unwrap();
    let (corpus, _, graph) = make_world(dir.path(), 6);
    let config = dir.path().join("engine.toml");
    write_config(
        &config,
        &format!(
            "[llm.agent]\nbase_url = \"{}\"\nmodel = \"stub\"\n",
            server.base_url()
        ),
    );

    let out = run(kgp()
        .arg("--config")
        .arg(&config)
        .arg("traverse")
        .arg("--graph")
        .arg(&graph)
        .arg("--corpus")
        .arg(&corpus)
        .args(["--query", "What is the", "--agent", "llm"]));
    assert_success(&out);
    let summary = &stdout_lines(&out)[0];
    // The model said NA on the first decision, so early termination fires
    // immediately and the retrieval is exactly the seed set.
    assert_eq!(summary["terminated_early"], true);
    assert_eq!(summary["iterations"], 1);
    assert_eq!(summary["retrieved"].as_array().unwrap().len(), 5);
    assert_eq!(server.hits(), 1);

    // Without the [llm.agent] section the same command is a usage error.
    let out = run(kgp()
        .arg("traverse")
        .arg("--graph")
        .arg(&graph)
        .arg("--corpus")
        .arg(&corpus)
        .args(["--query", "What is the", "--agent", "llm"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_text(&out).contains("[llm.agent]"));
}

#[test]
fn unreachable_endpoint_is_a_network_error() {
    let dir = TempDir::new().unwrap();
    let (corpus, goldens, graph) = make_world(dir.path(), 6);
    let config = dir.path().join("engine.toml");
    // Nothing listens on this port; retries are disabled to keep it fast.
    write_config(
        &config,
        "[llm.answerer]\nbase_url = \"http://127.0.0.1:9\"\nmodel = \"stub\"\nmax_retries = 0\ntimeout_secs = 2\n",
    );

    let out = run(kgp()
        .arg("--config")
        .arg(&config)
        .arg("answer")
        .arg("--graph")
        .arg(&graph)
        .arg("--corpus")
        .arg(&corpus)
        .arg("--questions")
        .arg(&goldens)
        .args(["--agent", "keyword"])
        .arg("--out")
        .arg(dir.path().join("answers.jsonl")));
    assert_eq!(out.status.code(), Some(3), "{}", stderr_text(&out));
}

#[test]
fn config_supplies_default_paths_and_traversal_knobs() {
    let dir = TempDir::new().unwrap();
    let (corpus, goldens, graph) = make_world(dir.path(), 8);
    let config = dir.path().join("engine.toml");
    write_config(
        &config,
        &format!(
            "corpus = {corpus:?}\ngraph = {graph:?}\n\n[traversal]\nbudget = 12\nn_seed = 3\n",
            corpus = corpus.to_str().unwrap(),
            graph = graph.to_str().unwrap(),
        ),
    );

    // No --graph/--corpus flags: both come from the config file.
    let out = run(kgp()
        .arg("--config")
        .arg(&config)
        .arg("traverse")
        .args(["--query", "What is the", "--agent", "keyword"]));
    assert_success(&out);
    let summary = &stdout_lines(&out)[0];
    assert!(summary["retrieved"].as_array().unwrap().len() <= 12);

    // Unknown keys in the config are rejected, not silently ignored.
    write_config(&config, "corpsu = \"typo.jsonl\"\n");
    let out = run(kgp()
        .arg("--config")
        .arg(&config)
        .arg("eval")
        .arg("--questions")
        .arg(&goldens)
        .arg("--out")
        .arg(dir.path().join("r.json")));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_synth_accepts_a_spec_file() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "seed = 3\nbridge = 2\ncomparison = 1\nsingle = 1\ndistractors_per_question = 2\n",
    )
    .unwrap();
    let bundle = dir.path().join("bundle");
    let out = run(kgp()
        .arg("gen-synth")
        .arg("--spec")
        .arg(&spec)
        .arg("--out")
        .arg(&bundle));
    assert_success(&out);
    let summary = &stdout_lines(&out)[0];
    // 2 bridges (2 passages) + 1 comparison (2) + 1 single (1) + 4*2 distractors
    assert_eq!(summary["passages"], 15);
    assert_eq!(summary["questions"], 4);
    assert_eq!(summary["all_linked"], true);

    // An empty spec is rejected as bad data.
    std::fs::write(&spec, "bridge = 0\ncomparison = 0\nsingle = 0\n").unwrap();
    let out = run(kgp()
        .arg("gen-synth")
        .arg("--spec")
        .arg(&spec)
        .arg("--out")
        .arg(&bundle));
    assert_eq!(out.status.code(), Some(2));
}
