//! Retrieval and agent-quality measurement.
//!
//! Retrieval EM here is per-question golden recall: a golden passage counts
//! as found if some retrieved passage is cosine-similar to it above a
//! threshold (default 0.9), and a question's EM is the found fraction,
//! macro-averaged across questions. Follow-up quality is measured with
//! ROUGE-1/ROUGE-L F1 and embedding cosine against gold follow-ups, plus a
//! binary stop accuracy on samples whose gold target is "NA". ROUGE uses the
//! engine tokenizer — no stemming, no stopword list.
//!
//! `run_eval` drives the full loop (traverse, match, optionally answer and
//! judge) for several agents over one question set, recording per-question
//! rows; per-question failures are recorded in their rows and excluded from
//! aggregates rather than aborting the run.

use crate::agent::TraversalAgent;
use crate::answer::{generate_answer_with, judge_exact, judge_llm, AnswerOptions, Verdict};
use crate::corpus::Passage;
use crate::embedding::{cosine, EmbedError, EmbeddingProvider};
use crate::graph::KnowledgeGraph;
use crate::lexical::{tokenize, TfidfModel};
use crate::llm::ChatClient;
use crate::synth::FollowUpSample;
use crate::traversal::{dense_retrieve_baseline, traverse, TraversalConfig, TraversalError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("question {question_id}: golden id {id:?} not in corpus")]
    UnknownGoldenId { question_id: String, id: String },
    #[error("question {question_id}: {reason}")]
    MalformedGolden { question_id: String, reason: String },
    #[error("no questions to evaluate")]
    EmptyInput,
    #[error("EM threshold must be in [0, 1], got {value}")]
    InvalidThreshold { value: f64 },
    #[error("embedding failed: {0}")]
    Embed(#[from] EmbedError),
    #[error("golden records io on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("golden records line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Bridge,
    Comparison,
    Single,
}

/// One evaluation question: its golden passage chain in reasoning order and
/// its gold answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub question_id: String,
    pub question: String,
    pub answer: String,
    pub golden_ids: Vec<String>,
    pub question_type: QuestionType,
}

impl GoldenRecord {
    /// Bridge and comparison chains need at least two passages; single-hop
    /// exactly one.
    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |reason: String| {
            Err(EvalError::MalformedGolden {
                question_id: self.question_id.clone(),
                reason,
            })
        };
        match self.question_type {
            QuestionType::Bridge | QuestionType::Comparison => {
                if self.golden_ids.len() < 2 {
                    return fail(format!(
                        "{:?} question needs >= 2 golden ids, has {}",
                        self.question_type,
                        self.golden_ids.len()
                    ));
                }
            }
            QuestionType::Single => {
                if self.golden_ids.len() != 1 {
                    return fail(format!(
                        "single question needs exactly 1 golden id, has {}",
                        self.golden_ids.len()
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn load_goldens(path: &Path) -> Result<Vec<GoldenRecord>, EvalError> {
    let file = std::fs::File::open(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GoldenRecord =
            serde_json::from_str(&line).map_err(|e| EvalError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

pub fn save_goldens(records: &[GoldenRecord], path: &Path) -> Result<(), EvalError> {
    let io_err = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| EvalError::Malformed {
            line: 0,
            reason: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Fraction of golden passages found among the retrieved ones: a golden
/// counts as matched when its best cosine against any retrieved passage
/// meets the threshold. A retrieved passage may match several goldens.
pub fn exact_match(
    retrieved_texts: &[String],
    golden_texts: &[String],
    provider: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<f64, EvalError> {
    assert!(!golden_texts.is_empty(), "EM needs at least one golden");
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::InvalidThreshold { value: threshold });
    }
    if retrieved_texts.is_empty() {
        return Ok(0.0);
    }
    let mut batch: Vec<String> = Vec::with_capacity(golden_texts.len() + retrieved_texts.len());
    batch.extend_from_slice(golden_texts);
    batch.extend_from_slice(retrieved_texts);
    let vectors = provider.embed_batch(&batch)?;
    let (golden_vecs, retrieved_vecs) = vectors.split_at(golden_texts.len());

    let matched = golden_vecs
        .iter()
        .filter(|g| {
            retrieved_vecs
                .iter()
                .any(|r| cosine(g, r) >= threshold)
        })
        .count();
    Ok(matched as f64 / golden_texts.len() as f64)
}

/// Unigram-overlap F1 with clipped counts; 0 when either side has no tokens.
pub fn rouge1_f(candidate: &str, reference: &str) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for tok in &r {
        *ref_counts.entry(tok.as_str()).or_insert(0) += 1;
    }
    let mut cand_counts: HashMap<&str, usize> = HashMap::new();
    for tok in &c {
        *cand_counts.entry(tok.as_str()).or_insert(0) += 1;
    }
    let overlap: usize = cand_counts
        .iter()
        .map(|(tok, &n)| n.min(*ref_counts.get(tok).unwrap_or(&0)))
        .sum();
    f1(overlap, c.len(), r.len())
}

/// Longest-common-subsequence F1 over token sequences; 0 when either side
/// has no tokens.
pub fn rouge_l_f(candidate: &str, reference: &str) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    // standard LCS dynamic program, rolling rows
    let mut prev = vec![0usize; r.len() + 1];
    let mut row = vec![0usize; r.len() + 1];
    for ci in &c {
        for (j, rj) in r.iter().enumerate() {
            row[j + 1] = if ci == rj {
                prev[j] + 1
            } else {
                row[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    f1(prev[r.len()], c.len(), r.len())
}

fn f1(overlap: usize, cand_len: usize, ref_len: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_len as f64;
    let r = overlap as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

/// Histogram over [0, 1] with `bins` equal-width buckets; values are clamped
/// into range. Emitted by the CLI as plain data files for plotting.
pub fn histogram_unit_interval(values: &[f64], bins: usize) -> Vec<usize> {
    assert!(bins > 0, "histogram needs at least one bin");
    let mut counts = vec![0usize; bins];
    for &v in values {
        let clamped = v.clamp(0.0, 1.0);
        let idx = ((clamped * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
}

/// One follow-up benchmark sample's outcome. Rows with a gold follow-up get
/// ROUGE/cosine scores (zero when the agent wrongly stopped); rows with a
/// gold "NA" get a stop-accuracy bit instead.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub index: usize,
    pub question: String,
    pub target: String,
    pub generated: Option<String>,
    pub rouge1: Option<f64>,
    pub rouge_l: Option<f64>,
    pub cosine: Option<f64>,
    pub stop_expected: bool,
    pub stop_correct: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub agent: String,
    pub rows: Vec<BenchmarkRow>,
    /// Means over error-free rows with a gold follow-up.
    pub mean_rouge1: f64,
    pub mean_rouge_l: f64,
    pub mean_cosine: f64,
    /// Stop accuracy over error-free rows with gold "NA"; `None` when the
    /// set has no such rows.
    pub stop_accuracy: Option<f64>,
    pub errors: usize,
}

/// Scores an agent's follow-up questions against gold targets. Each sample
/// presents (question, given passage); the agent's decision is compared to
/// the gold follow-up (ROUGE-1/ROUGE-L/cosine) or, for "NA" targets, to the
/// expectation that it stops. Agent and embedding failures are recorded per
/// row and excluded from aggregates.
pub fn benchmark_agent(
    agent: &dyn TraversalAgent,
    samples: &[FollowUpSample],
    provider: &dyn EmbeddingProvider,
) -> BenchmarkReport {
    let rows: Vec<BenchmarkRow> = samples
        .iter()
        .enumerate()
        .map(|(index, sample)| {
            let stop_expected = sample.target == "NA";
            let given = Passage {
                id: format!("sample-{index}"),
                title: String::new(),
                text: sample.given.clone(),
            };
            let mut row = BenchmarkRow {
                index,
                question: sample.question.clone(),
                target: sample.target.clone(),
                generated: None,
                rouge1: None,
                rouge_l: None,
                cosine: None,
                stop_expected,
                stop_correct: None,
                error: None,
            };
            let decision = match agent.decide(&sample.question, &[&given]) {
                Ok(d) => d,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            };
            let generated = match &decision {
                crate::agent::AgentDecision::Stop => None,
                crate::agent::AgentDecision::FollowUp(q) => Some(q.clone()),
            };
            row.generated = Some(generated.clone().unwrap_or_else(|| "NA".to_string()));
            if stop_expected {
                row.stop_correct = Some(generated.is_none());
                return row;
            }
            match &generated {
                None => {
                    // wrongly stopped: zero quality scores
                    row.rouge1 = Some(0.0);
                    row.rouge_l = Some(0.0);
                    row.cosine = Some(0.0);
                }
                Some(q) => {
                    row.rouge1 = Some(rouge1_f(q, &sample.target));
                    row.rouge_l = Some(rouge_l_f(q, &sample.target));
                    match provider.embed_batch(&[q.clone(), sample.target.clone()]) {
                        Ok(vecs) => row.cosine = Some(cosine(&vecs[0], &vecs[1])),
                        Err(e) => {
                            row.rouge1 = None;
                            row.rouge_l = None;
                            row.error = Some(e.to_string());
                        }
                    }
                }
            }
            row
        })
        .collect();

    let ok_follow: Vec<&BenchmarkRow> = rows
        .iter()
        .filter(|r| r.error.is_none() && !r.stop_expected)
        .collect();
    let ok_stop: Vec<&BenchmarkRow> = rows
        .iter()
        .filter(|r| r.error.is_none() && r.stop_expected)
        .collect();
    let mean = |f: fn(&BenchmarkRow) -> f64| -> f64 {
        if ok_follow.is_empty() {
            0.0
        } else {
            ok_follow.iter().map(|r| f(r)).sum::<f64>() / ok_follow.len() as f64
        }
    };
    BenchmarkReport {
        agent: agent.name().to_string(),
        mean_rouge1: mean(|r| r.rouge1.unwrap_or(0.0)),
        mean_rouge_l: mean(|r| r.rouge_l.unwrap_or(0.0)),
        mean_cosine: mean(|r| r.cosine.unwrap_or(0.0)),
        stop_accuracy: if ok_stop.is_empty() {
            None
        } else {
            Some(
                ok_stop.iter().filter(|r| r.stop_correct == Some(true)).count() as f64
                    / ok_stop.len() as f64,
            )
        },
        errors: rows.iter().filter(|r| r.error.is_some()).count(),
        rows,
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub traversal: TraversalConfig,
    pub em_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            traversal: TraversalConfig::default(),
            em_threshold: 0.9,
        }
    }
}

#[derive(Clone, Copy)]
pub enum JudgeKind<'a> {
    Llm(&'a ChatClient),
    Exact,
}

/// Enables answer generation + judging inside `run_eval`.
pub struct AnsweringConfig<'a> {
    pub answer_client: &'a ChatClient,
    pub judge: JudgeKind<'a>,
    pub options: AnswerOptions,
}

/// One question × agent outcome, shaped for line-delimited output.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub question_id: String,
    pub question_type: QuestionType,
    /// Golden recall for this question; `None` when the row errored.
    pub em: Option<f64>,
    pub matched_golden: Option<usize>,
    pub golden_count: usize,
    pub retrieved: Vec<String>,
    pub iterations: usize,
    pub nodes_visited: usize,
    pub terminated_early: bool,
    pub wall_ms: f64,
    pub answer: Option<String>,
    pub correct: Option<bool>,
    pub error: Option<String>,
}

/// Per-agent aggregate; every mean is recomputable from the error-free rows.
#[derive(Debug, Clone, Serialize)]
pub struct AgentReport {
    pub agent: String,
    pub rows: Vec<EvalRow>,
    pub mean_em: f64,
    /// Fraction of judged answers deemed correct; `None` when answering was
    /// disabled or nothing was judged.
    pub accuracy: Option<f64>,
    pub mean_iterations: f64,
    pub mean_nodes_visited: f64,
    pub mean_wall_ms: f64,
    pub terminated_early_count: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub agents: Vec<AgentReport>,
}

fn aggregate(agent: &str, rows: Vec<EvalRow>) -> AgentReport {
    let ok: Vec<&EvalRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let mean = |f: &dyn Fn(&EvalRow) -> f64| -> f64 {
        if ok.is_empty() {
            0.0
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    let judged: Vec<&&EvalRow> = ok.iter().filter(|r| r.correct.is_some()).collect();
    AgentReport {
        agent: agent.to_string(),
        mean_em: mean(&|r| r.em.unwrap_or(0.0)),
        accuracy: if judged.is_empty() {
            None
        } else {
            Some(
                judged.iter().filter(|r| r.correct == Some(true)).count() as f64
                    / judged.len() as f64,
            )
        },
        mean_iterations: mean(&|r| r.iterations as f64),
        mean_nodes_visited: mean(&|r| r.nodes_visited as f64),
        mean_wall_ms: mean(&|r| r.wall_ms),
        terminated_early_count: ok.iter().filter(|r| r.terminated_early).count(),
        errors: rows.iter().filter(|r| r.error.is_some()).count(),
        rows,
    }
}

fn validate_questions(
    graph: &KnowledgeGraph,
    questions: &[GoldenRecord],
) -> Result<(), EvalError> {
    if questions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    for q in questions {
        q.validate()?;
        for id in &q.golden_ids {
            if !graph.corpus().contains_id(id) {
                return Err(EvalError::UnknownGoldenId {
                    question_id: q.question_id.clone(),
                    id: id.clone(),
                });
            }
        }
    }
    Ok(())
}

fn golden_texts(graph: &KnowledgeGraph, record: &GoldenRecord) -> Vec<String> {
    record
        .golden_ids
        .iter()
        .map(|id| graph.corpus().get(id).expect("validated").text.clone())
        .collect()
}

fn retrieved_texts(graph: &KnowledgeGraph, ids: &[String]) -> Vec<String> {
    ids.iter()
        .map(|id| graph.corpus().get(id).expect("retrieved from corpus").text.clone())
        .collect()
}

fn answer_and_judge(
    graph: &KnowledgeGraph,
    answering: &AnsweringConfig,
    record: &GoldenRecord,
    retrieved: &[String],
) -> (Option<String>, Option<bool>, Option<String>) {
    if retrieved.is_empty() {
        return (None, None, None);
    }
    let passages: Vec<&Passage> = retrieved
        .iter()
        .map(|id| graph.corpus().get(id).expect("retrieved from corpus"))
        .collect();
    let answer = match generate_answer_with(
        answering.answer_client,
        &record.question,
        &passages,
        &answering.options,
    ) {
        Ok(a) => a,
        Err(e) => return (None, None, Some(format!("answering failed: {e}"))),
    };
    let verdict = match answering.judge {
        JudgeKind::Exact => Ok(judge_exact(&answer, &record.answer)),
        JudgeKind::Llm(client) => judge_llm(client, &record.question, &answer, &record.answer),
    };
    match verdict {
        Ok(v) => (Some(answer), Some(v == Verdict::Correct), None),
        Err(e) => (Some(answer), None, Some(format!("judging failed: {e}"))),
    }
}

/// Evaluates each agent over the question set: traverse, score golden
/// recall, optionally answer and judge. Questions run in parallel; rows are
/// sorted by question id so reports are deterministic for deterministic
/// agents (wall-clock fields aside).
pub fn run_eval(
    graph: &KnowledgeGraph,
    tfidf: &TfidfModel,
    agents: &[&dyn TraversalAgent],
    ranker: &dyn EmbeddingProvider,
    questions: &[GoldenRecord],
    config: &EvalConfig,
    answering: Option<&AnsweringConfig>,
) -> Result<EvalReport, EvalError> {
    validate_questions(graph, questions)?;
    if !(0.0..=1.0).contains(&config.em_threshold) {
        return Err(EvalError::InvalidThreshold {
            value: config.em_threshold,
        });
    }

    let mut reports = Vec::with_capacity(agents.len());
    for agent in agents {
        let mut rows: Vec<EvalRow> = questions
            .par_iter()
            .map(|record| {
                let mut row = EvalRow {
                    question_id: record.question_id.clone(),
                    question_type: record.question_type,
                    em: None,
                    matched_golden: None,
                    golden_count: record.golden_ids.len(),
                    retrieved: Vec::new(),
                    iterations: 0,
                    nodes_visited: 0,
                    terminated_early: false,
                    wall_ms: 0.0,
                    answer: None,
                    correct: None,
                    error: None,
                };
                let result = match traverse(
                    graph,
                    tfidf,
                    *agent,
                    ranker,
                    &record.question,
                    &config.traversal,
                ) {
                    Ok(r) => r,
                    Err(e) => {
                        // keep whatever the traversal managed to retrieve
                        if let TraversalError::Agent { partial, .. }
                        | TraversalError::Provider { partial, .. } = &e
                        {
                            row.retrieved = partial.retrieved.clone();
                            row.iterations = partial.iterations;
                            row.nodes_visited = partial.nodes_visited;
                        }
                        row.error = Some(e.to_string());
                        return row;
                    }
                };
                row.retrieved = result.retrieved;
                row.iterations = result.iterations;
                row.nodes_visited = result.nodes_visited;
                row.terminated_early = result.terminated_early;
                row.wall_ms = result.wall_time.as_secs_f64() * 1000.0;

                let goldens = golden_texts(graph, record);
                let texts = retrieved_texts(graph, &row.retrieved);
                match exact_match(&texts, &goldens, ranker, config.em_threshold) {
                    Ok(em) => {
                        row.em = Some(em);
                        row.matched_golden =
                            Some((em * goldens.len() as f64).round() as usize);
                    }
                    Err(e) => {
                        row.error = Some(format!("EM computation failed: {e}"));
                        return row;
                    }
                }
                if let Some(answering) = answering {
                    let (answer, correct, error) =
                        answer_and_judge(graph, answering, record, &row.retrieved);
                    row.answer = answer;
                    row.correct = correct;
                    if let Some(e) = error {
                        row.error = Some(e);
                    }
                }
                row
            })
            .collect();
        rows.sort_by(|a, b| a.question_id.cmp(&b.question_id));
        reports.push(aggregate(agent.name(), rows));
    }
    Ok(EvalReport { agents: reports })
}

/// Evaluates the traversal-free dense baseline at retrieval depth `k`
/// against the same golden-recall metric.
pub fn run_dense_eval(
    graph: &KnowledgeGraph,
    ranker: &dyn EmbeddingProvider,
    questions: &[GoldenRecord],
    k: usize,
    em_threshold: f64,
) -> Result<AgentReport, EvalError> {
    validate_questions(graph, questions)?;
    if !(0.0..=1.0).contains(&em_threshold) {
        return Err(EvalError::InvalidThreshold { value: em_threshold });
    }
    let mut rows: Vec<EvalRow> = questions
        .par_iter()
        .map(|record| {
            let start = std::time::Instant::now();
            let mut row = EvalRow {
                question_id: record.question_id.clone(),
                question_type: record.question_type,
                em: None,
                matched_golden: None,
                golden_count: record.golden_ids.len(),
                retrieved: Vec::new(),
                iterations: 0,
                nodes_visited: 0,
                terminated_early: false,
                wall_ms: 0.0,
                answer: None,
                correct: None,
                error: None,
            };
            let retrieved = match dense_retrieve_baseline(graph, ranker, &record.question, k) {
                Ok(r) => r,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            };
            row.nodes_visited = retrieved.len();
            row.retrieved = retrieved;
            let goldens = golden_texts(graph, record);
            let texts = retrieved_texts(graph, &row.retrieved);
            match exact_match(&texts, &goldens, ranker, em_threshold) {
                Ok(em) => {
                    row.em = Some(em);
                    row.matched_golden = Some((em * goldens.len() as f64).round() as usize);
                }
                Err(e) => row.error = Some(format!("EM computation failed: {e}")),
            }
            row.wall_ms = start.elapsed().as_secs_f64() * 1000.0;
            row
        })
        .collect();
    rows.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    Ok(aggregate("dense-baseline", rows))
}
