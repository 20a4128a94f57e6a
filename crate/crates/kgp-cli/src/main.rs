//! `kgp` — batch front end for the knowledge-graph-prompting retrieval
//! engine. Every command reads and writes plain files (JSONL corpora,
//! binary graphs, JSON reports) and prints one JSON summary line to stdout.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error,
//! 3 network error.

mod config;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use config::{build_provider, EngineConfig};
use kgp_core::agent::{AgentError, LlmAgent, OracleKnowledge};
use kgp_core::answer::{generate_answer, AnswerRecord};
use kgp_core::corpus::{load_corpus, save_corpus, Corpus};
use kgp_core::embedding::{EmbedError, EmbeddingProvider};
use kgp_core::eval::{
    benchmark_agent, histogram_unit_interval, load_goldens, run_eval, save_goldens,
    AnsweringConfig, EvalConfig, EvalError, GoldenRecord, JudgeKind,
};
use kgp_core::graph::GraphError;
use kgp_core::llm::{ChatClient, EndpointConfig, LlmError};
use kgp_core::synth::{
    build_followupqa, generate_synthetic, load_hotpot_records, load_samples, save_samples,
    FollowUpMode, SynthSpec,
};
use kgp_core::traversal::{traverse, traverse_with_trace, TraversalError};
use kgp_core::{
    KeywordDiffAgent, KnowledgeGraph, OracleAgent, StopAgent, TfidfModel, TraversalAgent,
};
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Network(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Network(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Network(_) => 3,
        }
    }
}

fn from_llm(e: &LlmError) -> CliError {
    match e {
        LlmError::MissingCredential { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Network(e.to_string()),
    }
}

fn from_embed(e: &EmbedError) -> CliError {
    match e {
        EmbedError::Remote { source, .. } => match source {
            LlmError::MissingCredential { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Network(e.to_string()),
        },
        EmbedError::DimensionMismatch { .. } => CliError::Network(e.to_string()),
    }
}

fn from_graph(e: &GraphError) -> CliError {
    match e {
        GraphError::Embed(inner) => from_embed(inner),
        _ => CliError::Data(e.to_string()),
    }
}

fn from_agent(e: &AgentError) -> CliError {
    match e {
        AgentError::Llm(inner) => from_llm(inner),
        _ => CliError::Data(e.to_string()),
    }
}

fn from_traversal(e: &TraversalError) -> CliError {
    match e {
        TraversalError::Agent { source, .. } => from_agent(source),
        TraversalError::Provider { source, .. } | TraversalError::Ranker(source) => {
            from_embed(source)
        }
        TraversalError::InvalidConfig { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn from_eval(e: &EvalError) -> CliError {
    match e {
        EvalError::Embed(inner) => from_embed(inner),
        _ => CliError::Data(e.to_string()),
    }
}

fn data(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "kgp",
    about = "Knowledge-graph retrieval engine for multi-document QA",
    version
)]
struct Cli {
    /// Engine configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Llm,
    Oracle,
    Keyword,
    Stop,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Hash,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeKind {
    Llm,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum JudgeChoice {
    Exact,
    Llm,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a corpus and persist its kNN knowledge graph.
    BuildGraph {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        k_edges: usize,
        /// Embedding provider; `remote` reads [providers.graph-builder].
        #[arg(long, value_enum, default_value_t = ProviderKind::Hash)]
        provider: ProviderKind,
    },
    /// Run one query through the graph and print the retrieval.
    Traverse {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        query: String,
        #[arg(long, value_enum, default_value_t = AgentKind::Keyword)]
        agent: AgentKind,
        /// Golden records (JSONL); required by the oracle agent.
        #[arg(long)]
        questions: Option<PathBuf>,
        /// Include one trace event per agent decision in the output.
        #[arg(long)]
        trace: bool,
    },
    /// Evaluate agents over a question set and write a report.
    Eval {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        questions: PathBuf,
        /// Comma-separated agent list, e.g. "oracle,keyword,stop".
        #[arg(long, default_value = "oracle")]
        agents: String,
        #[arg(long)]
        out: PathBuf,
        /// Also generate answers and judge them (reads [llm.answerer]).
        #[arg(long)]
        with_answers: bool,
        /// Judge for --with-answers; `llm` reads [llm.judge].
        #[arg(long, value_enum, default_value_t = JudgeChoice::Exact)]
        judge: JudgeChoice,
    },
    /// Generate a synthetic multi-hop corpus bundle.
    GenSynth {
        /// Generator spec (TOML); alternative to --total.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Question count split by the default type proportions.
        #[arg(long)]
        total: Option<usize>,
        /// Distractor passages per question.
        #[arg(long)]
        distractors: Option<usize>,
        /// Output directory for corpus.jsonl, goldens.jsonl, report.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build follow-up samples from HotpotQA-format records.
    GenFollowupqa {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `oracle` reconstructs targets offline; `llm` reads [llm.dataset].
        #[arg(long, value_enum, default_value_t = ModeKind::Oracle)]
        mode: ModeKind,
        /// Maximum samples drawn (without replacement); default all.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Score an agent's follow-up questions against a gold test set.
    BenchmarkAgent {
        #[arg(long)]
        testset: PathBuf,
        #[arg(long, value_enum, default_value_t = AgentKind::Keyword)]
        agent: AgentKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve evidence and generate answers for a question set.
    Answer {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        questions: PathBuf,
        #[arg(long, value_enum, default_value_t = AgentKind::Keyword)]
        agent: AgentKind,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are not failures
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = EngineConfig::load(cli.config.as_deref())?;
    if let Some(workers) = config.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    }
    let seed = cli.seed.or(config.seed).unwrap_or(0);

    match cli.command {
        Command::BuildGraph {
            corpus,
            out,
            k_edges,
            provider,
        } => cmd_build_graph(&config, &corpus, &out, k_edges, provider),
        Command::Traverse {
            graph,
            corpus,
            query,
            agent,
            questions,
            trace,
        } => cmd_traverse(
            &config,
            graph.as_deref(),
            corpus.as_deref(),
            &query,
            agent,
            questions.as_deref(),
            trace,
        ),
        Command::Eval {
            graph,
            corpus,
            questions,
            agents,
            out,
            with_answers,
            judge,
        } => cmd_eval(
            &config,
            graph.as_deref(),
            corpus.as_deref(),
            &questions,
            &agents,
            &out,
            with_answers,
            judge,
        ),
        Command::GenSynth {
            spec,
            total,
            distractors,
            out,
        } => cmd_gen_synth(seed, spec.as_deref(), total, distractors, &out),
        Command::GenFollowupqa {
            input,
            out,
            mode,
            budget,
        } => cmd_gen_followupqa(&config, seed, &input, &out, mode, budget),
        Command::BenchmarkAgent {
            testset,
            agent,
            out,
        } => cmd_benchmark(&config, &testset, agent, &out),
        Command::Answer {
            graph,
            corpus,
            questions,
            agent,
            out,
        } => cmd_answer(
            &config,
            graph.as_deref(),
            corpus.as_deref(),
            &questions,
            agent,
            &out,
        ),
    }
}

/// Flag value, else config default, else a usage error naming the flag.
fn resolve_path<'a>(
    flag: Option<&'a Path>,
    config_default: Option<&'a Path>,
    what: &str,
) -> Result<&'a Path, CliError> {
    flag.or(config_default).ok_or_else(|| {
        CliError::Usage(format!("--{what} is required (no default in config)"))
    })
}

fn endpoint_for<'a>(
    role: &str,
    endpoint: Option<&'a EndpointConfig>,
) -> Result<&'a EndpointConfig, CliError> {
    endpoint.ok_or_else(|| {
        CliError::Usage(format!("config section [llm.{role}] is required for this command"))
    })
}

fn chat_client(role: &str, endpoint: Option<&EndpointConfig>) -> Result<ChatClient, CliError> {
    ChatClient::new(endpoint_for(role, endpoint)?.clone()).map_err(|e| from_llm(&e))
}

struct LoadedWorld {
    corpus: Arc<Corpus>,
    graph: KnowledgeGraph,
    tfidf: TfidfModel,
    ranker: Box<dyn EmbeddingProvider>,
}

fn load_world(
    config: &EngineConfig,
    graph_flag: Option<&Path>,
    corpus_flag: Option<&Path>,
) -> Result<LoadedWorld, CliError> {
    let corpus_path = resolve_path(corpus_flag, config.corpus.as_deref(), "corpus")?;
    let graph_path = resolve_path(graph_flag, config.graph.as_deref(), "graph")?;
    let corpus = load_corpus(corpus_path).map_err(data)?;
    let graph = KnowledgeGraph::load(graph_path, &corpus).map_err(|e| from_graph(&e))?;
    let tfidf = TfidfModel::fit(&corpus).map_err(data)?;
    let ranker = build_provider(config.providers.ranker.as_ref())?;
    Ok(LoadedWorld {
        corpus,
        graph,
        tfidf,
        ranker,
    })
}

/// Builds one traversal agent. The oracle agent reconstructs its answer key
/// from golden records; the LLM agent reads [llm.agent].
fn build_agent(
    kind: AgentKind,
    config: &EngineConfig,
    corpus: Option<&Arc<Corpus>>,
    goldens: Option<&[GoldenRecord]>,
) -> Result<Box<dyn TraversalAgent>, CliError> {
    match kind {
        AgentKind::Keyword => Ok(Box::new(KeywordDiffAgent)),
        AgentKind::Stop => Ok(Box::new(StopAgent)),
        AgentKind::Llm => {
            let client = chat_client("agent", config.llm.agent.as_ref())?;
            Ok(Box::new(LlmAgent::new(client)))
        }
        AgentKind::Oracle => {
            let corpus = corpus.ok_or_else(|| {
                CliError::Usage("oracle agent needs a corpus".to_string())
            })?;
            let goldens = goldens.ok_or_else(|| {
                CliError::Usage(
                    "oracle agent needs --questions (golden records)".to_string(),
                )
            })?;
            let knowledge = OracleKnowledge::new(
                corpus,
                goldens
                    .iter()
                    .map(|g| (g.question.clone(), g.golden_ids.clone())),
            )
            .map_err(|e| from_agent(&e))?;
            Ok(Box::new(OracleAgent::new(Arc::clone(corpus), knowledge)))
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(data)?;
    w.write_all(b"\n").map_err(data)?;
    w.flush().map_err(data)
}

fn print_summary(value: serde_json::Value) {
    // Tolerate a closed stdout (`kgp ... | head`) instead of panicking.
    let _ = writeln!(std::io::stdout(), "{value}");
}

fn cmd_build_graph(
    config: &EngineConfig,
    corpus_path: &Path,
    out: &Path,
    k_edges: usize,
    provider_kind: ProviderKind,
) -> Result<(), CliError> {
    let corpus = load_corpus(corpus_path).map_err(data)?;
    let provider: Box<dyn EmbeddingProvider> = match provider_kind {
        ProviderKind::Hash => match config.providers.graph_builder.as_ref() {
            spec @ (None | Some(config::ProviderSpec::Hash { .. })) => build_provider(spec)?,
            Some(config::ProviderSpec::Remote { .. }) => {
                return Err(CliError::Usage(
                    "--provider hash conflicts with a remote [providers.graph-builder]"
                        .to_string(),
                ))
            }
        },
        ProviderKind::Remote => match config.providers.graph_builder.as_ref() {
            Some(spec @ config::ProviderSpec::Remote { .. }) => build_provider(Some(spec))?,
            _ => {
                return Err(CliError::Usage(
                    "--provider remote needs a remote [providers.graph-builder] section"
                        .to_string(),
                ))
            }
        },
    };
    let graph =
        KnowledgeGraph::build(&corpus, provider.as_ref(), k_edges).map_err(|e| from_graph(&e))?;
    graph.save(out).map_err(|e| from_graph(&e))?;
    print_summary(serde_json::json!({
        "command": "build-graph",
        "nodes": graph.node_count(),
        "k_edges": graph.k_edges(),
        "provider": graph.provider_name(),
        "dim": graph.dim(),
        "out": out,
    }));
    Ok(())
}

fn cmd_traverse(
    config: &EngineConfig,
    graph_flag: Option<&Path>,
    corpus_flag: Option<&Path>,
    query: &str,
    agent_kind: AgentKind,
    questions: Option<&Path>,
    trace: bool,
) -> Result<(), CliError> {
    let world = load_world(config, graph_flag, corpus_flag)?;
    let goldens = questions
        .map(|p| load_goldens(p).map_err(|e| from_eval(&e)))
        .transpose()?;
    let agent = build_agent(agent_kind, config, Some(&world.corpus), goldens.as_deref())?;
    let traversal_config = config.traversal.to_config();

    let (result, trace_events) = if trace {
        let (result, events) = traverse_with_trace(
            &world.graph,
            &world.tfidf,
            agent.as_ref(),
            world.ranker.as_ref(),
            query,
            &traversal_config,
        )
        .map_err(|e| from_traversal(&e))?;
        (result, Some(events))
    } else {
        let result = traverse(
            &world.graph,
            &world.tfidf,
            agent.as_ref(),
            world.ranker.as_ref(),
            query,
            &traversal_config,
        )
        .map_err(|e| from_traversal(&e))?;
        (result, None)
    };

    let paths: Vec<Vec<&str>> = result
        .paths
        .iter()
        .map(|p| {
            p.iter()
                .map(|&ord| world.corpus.passage(ord).id.as_str())
                .collect()
        })
        .collect();
    let mut output = serde_json::json!({
        "command": "traverse",
        "query": query,
        "agent": agent.name(),
        "retrieved": result.retrieved,
        "paths": paths,
        "iterations": result.iterations,
        "nodes_visited": result.nodes_visited,
        "terminated_early": result.terminated_early,
        "wall_ms": result.wall_time.as_secs_f64() * 1000.0,
    });
    if let Some(events) = trace_events {
        output["trace"] = serde_json::to_value(events).map_err(data)?;
    }
    print_summary(output);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    config: &EngineConfig,
    graph_flag: Option<&Path>,
    corpus_flag: Option<&Path>,
    questions_path: &Path,
    agents_flag: &str,
    out: &Path,
    with_answers: bool,
    judge: JudgeChoice,
) -> Result<(), CliError> {
    let world = load_world(config, graph_flag, corpus_flag)?;
    let questions = load_goldens(questions_path).map_err(|e| from_eval(&e))?;

    let kinds: Vec<AgentKind> = agents_flag
        .split(',')
        .map(|name| {
            AgentKind::from_str(name.trim(), true)
                .map_err(|_| CliError::Usage(format!("unknown agent {name:?}")))
        })
        .collect::<Result<_, _>>()?;
    let agents: Vec<Box<dyn TraversalAgent>> = kinds
        .into_iter()
        .map(|kind| build_agent(kind, config, Some(&world.corpus), Some(&questions)))
        .collect::<Result<_, _>>()?;
    let agent_refs: Vec<&dyn TraversalAgent> = agents.iter().map(|a| a.as_ref()).collect();

    let eval_config = EvalConfig {
        traversal: config.traversal.to_config(),
        em_threshold: config.em_threshold.unwrap_or(0.9),
    };

    let answer_client;
    let judge_client;
    let answering = if with_answers {
        answer_client = chat_client("answerer", config.llm.answerer.as_ref())?;
        let judge_kind = match judge {
            JudgeChoice::Exact => JudgeKind::Exact,
            JudgeChoice::Llm => {
                judge_client = chat_client("judge", config.llm.judge.as_ref())?;
                JudgeKind::Llm(&judge_client)
            }
        };
        Some(AnsweringConfig {
            answer_client: &answer_client,
            judge: judge_kind,
            options: Default::default(),
        })
    } else {
        None
    };

    let report = run_eval(
        &world.graph,
        &world.tfidf,
        &agent_refs,
        world.ranker.as_ref(),
        &questions,
        &eval_config,
        answering.as_ref(),
    )
    .map_err(|e| from_eval(&e))?;

    write_json(out, &serde_json::to_value(&report).map_err(data)?)?;
    for agent in &report.agents {
        print_summary(serde_json::json!({
            "command": "eval",
            "agent": agent.agent,
            "questions": agent.rows.len(),
            "mean_em": agent.mean_em,
            "accuracy": agent.accuracy,
            "mean_iterations": agent.mean_iterations,
            "terminated_early": agent.terminated_early_count,
            "errors": agent.errors,
            "out": out,
        }));
    }
    Ok(())
}

fn cmd_gen_synth(
    seed: u64,
    spec_path: Option<&Path>,
    total: Option<usize>,
    distractors: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let mut spec = match (spec_path, total) {
        (Some(path), None) => {
            let raw = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<SynthSpec>(&raw)
                .map_err(|e| CliError::Data(format!("spec {}: {e}", path.display())))?
        }
        (None, Some(total)) => SynthSpec::from_total(total, seed),
        _ => {
            return Err(CliError::Usage(
                "exactly one of --spec or --total is required".to_string(),
            ))
        }
    };
    if spec_path.is_none() {
        spec.seed = seed;
    }
    if let Some(d) = distractors {
        spec.distractors_per_question = d;
    }

    let bundle = generate_synthetic(&spec).map_err(data)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
    save_corpus(&bundle.corpus, out.join("corpus.jsonl")).map_err(data)?;
    save_goldens(&bundle.goldens, &out.join("goldens.jsonl")).map_err(|e| from_eval(&e))?;
    let report_file = std::fs::File::create(out.join("report.jsonl"))
        .map_err(|e| CliError::Data(format!("cannot write report: {e}")))?;
    let mut w = std::io::BufWriter::new(report_file);
    for chain in &bundle.report.chains {
        serde_json::to_writer(&mut w, chain).map_err(data)?;
        w.write_all(b"\n").map_err(data)?;
    }
    w.flush().map_err(data)?;

    print_summary(serde_json::json!({
        "command": "gen-synth",
        "passages": bundle.corpus.len(),
        "questions": bundle.goldens.len(),
        "all_linked": bundle.report.all_linked,
        "out": out,
    }));
    Ok(())
}

fn cmd_gen_followupqa(
    config: &EngineConfig,
    seed: u64,
    input: &Path,
    out: &Path,
    mode: ModeKind,
    budget: Option<usize>,
) -> Result<(), CliError> {
    let records = load_hotpot_records(input).map_err(data)?;
    let budget = budget.unwrap_or(records.len());

    let client;
    let mode = match mode {
        ModeKind::Oracle => FollowUpMode::Oracle,
        ModeKind::Llm => {
            client = chat_client("dataset", config.llm.dataset.as_ref())?;
            FollowUpMode::Llm(&client)
        }
    };
    let build = build_followupqa(&records, mode, budget, seed);
    save_samples(&build.samples, out).map_err(data)?;
    print_summary(serde_json::json!({
        "command": "gen-followupqa",
        "samples": build.samples.len(),
        "skipped_malformed": build.skipped_malformed,
        "skipped_client": build.skipped_client,
        "out": out,
    }));
    Ok(())
}

fn cmd_benchmark(
    config: &EngineConfig,
    testset: &Path,
    agent_kind: AgentKind,
    out: &Path,
) -> Result<(), CliError> {
    if matches!(agent_kind, AgentKind::Oracle) {
        return Err(CliError::Usage(
            "the oracle agent is corpus-bound and cannot score detached samples".to_string(),
        ));
    }
    let samples = load_samples(testset).map_err(data)?;
    if samples.is_empty() {
        return Err(CliError::Data(format!(
            "no samples in {}",
            testset.display()
        )));
    }
    let agent = build_agent(agent_kind, config, None, None)?;
    let provider = build_provider(config.providers.ranker.as_ref())?;
    let report = benchmark_agent(agent.as_ref(), &samples, provider.as_ref());

    let collect = |f: fn(&kgp_core::eval::BenchmarkRow) -> Option<f64>| -> Vec<f64> {
        report.rows.iter().filter_map(f).collect()
    };
    let mut value = serde_json::to_value(&report).map_err(data)?;
    value["histograms"] = serde_json::json!({
        "bins": 10,
        "rouge1": histogram_unit_interval(&collect(|r| r.rouge1), 10),
        "rouge_l": histogram_unit_interval(&collect(|r| r.rouge_l), 10),
        "cosine": histogram_unit_interval(&collect(|r| r.cosine), 10),
    });
    write_json(out, &value)?;
    print_summary(serde_json::json!({
        "command": "benchmark-agent",
        "agent": report.agent,
        "samples": report.rows.len(),
        "mean_rouge1": report.mean_rouge1,
        "mean_rouge_l": report.mean_rouge_l,
        "mean_cosine": report.mean_cosine,
        "stop_accuracy": report.stop_accuracy,
        "errors": report.errors,
        "out": out,
    }));
    Ok(())
}

fn cmd_answer(
    config: &EngineConfig,
    graph_flag: Option<&Path>,
    corpus_flag: Option<&Path>,
    questions_path: &Path,
    agent_kind: AgentKind,
    out: &Path,
) -> Result<(), CliError> {
    let world = load_world(config, graph_flag, corpus_flag)?;
    let questions = load_goldens(questions_path).map_err(|e| from_eval(&e))?;
    let agent = build_agent(agent_kind, config, Some(&world.corpus), Some(&questions))?;
    let client = chat_client("answerer", config.llm.answerer.as_ref())?;
    let traversal_config = config.traversal.to_config();

    let file = std::fs::File::create(out)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let mut skipped_empty = 0usize;
    for question in &questions {
        let result = traverse(
            &world.graph,
            &world.tfidf,
            agent.as_ref(),
            world.ranker.as_ref(),
            &question.question,
            &traversal_config,
        )
        .map_err(|e| from_traversal(&e))?;
        if result.retrieved.is_empty() {
            skipped_empty += 1;
            continue;
        }
        let passages: Vec<&kgp_core::Passage> = result
            .retrieved
            .iter()
            .map(|id| world.corpus.get(id).expect("retrieved ids resolve"))
            .collect();
        let answer = generate_answer(&client, &question.question, &passages)
            .map_err(|e| from_llm(&e))?;
        let record = AnswerRecord {
            question_id: question.question_id.clone(),
            question: question.question.clone(),
            retrieved: result.retrieved.clone(),
            answer,
            gold: Some(question.answer.clone()),
        };
        serde_json::to_writer(&mut w, &record).map_err(data)?;
        w.write_all(b"\n").map_err(data)?;
    }
    w.flush().map_err(data)?;
    print_summary(serde_json::json!({
        "command": "answer",
        "questions": questions.len(),
        "answered": questions.len() - skipped_empty,
        "skipped_empty_retrieval": skipped_empty,
        "agent": agent.name(),
        "out": out,
    }));
    Ok(())
}
