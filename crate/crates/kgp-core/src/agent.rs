//! Traversal agents: given the original question and the passages gathered
//! along a path, either ask a follow-up question that would close the gap or
//! signal that the evidence is complete.
//!
//! Three implementations share one interface: [`LlmAgent`] (a chat model
//! prompted with the NA convention), [`OracleAgent`] (knows each question's
//! golden passage chain; the test-time upper bound), and
//! [`KeywordDiffAgent`] (asks for the query tokens not yet covered by the
//! path; a cheap deterministic heuristic). [`StopAgent`] always stops and
//! exists for seeds-only baselines and budget tests.
//!
//! The stop signal on the wire is the literal token "NA"; [`parse_decision`]
//! normalizes model output into a decision and is deliberately forgiving
//! about casing, quoting, and trailing punctuation.

use crate::corpus::{Corpus, Passage};
use crate::lexical::tokenize;
use crate::llm::{ChatClient, ChatMessage, ChatRequest, LlmError};
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

/// Default system instruction for the LLM agent; see templates/.
pub const AGENT_SYSTEM_TEMPLATE: &str = include_str!("../templates/agent_system.txt");

/// Evidence sent to the LLM agent is capped at this many characters unless
/// overridden; most recent passages are kept when truncating.
pub const DEFAULT_EVIDENCE_BUDGET: usize = 8000;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("agent llm call failed: {0}")]
    Llm(#[from] LlmError),
    #[error("oracle has no golden chain for query {query:?}")]
    UnknownQuery { query: String },
    #[error("oracle chain references passage id {id:?} not present in the corpus")]
    UnknownGoldenId { id: String },
}

/// What an agent wants the traversal to do next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentDecision {
    /// Ask this (non-empty, single-line) question and expand the path.
    FollowUp(String),
    /// The path already answers the query; stop expanding.
    Stop,
}

/// Normalizes raw model output into a decision.
///
/// Rules: trim whitespace and surrounding quote pairs; empty output and
/// (case-insensitively) "NA" — bare or followed by punctuation/whitespace —
/// mean [`AgentDecision::Stop`]; anything else becomes a follow-up question
/// truncated to its first line.
pub fn parse_decision(raw: &str) -> AgentDecision {
    let mut s = raw.trim();
    loop {
        let unquoted = s
            .strip_prefix('"')
            .and_then(|t| t.strip_suffix('"'))
            .or_else(|| s.strip_prefix('\'').and_then(|t| t.strip_suffix('\'')));
        match unquoted {
            Some(t) => s = t.trim(),
            None => break,
        }
    }
    if s.is_empty() {
        return AgentDecision::Stop;
    }
    let mut chars = s.chars();
    let first_two: String = chars.by_ref().take(2).collect();
    if first_two.eq_ignore_ascii_case("na") {
        match chars.next() {
            None => return AgentDecision::Stop,
            Some(c) if !c.is_alphanumeric() => return AgentDecision::Stop,
            Some(_) => {}
        }
    }
    let first_line = s.lines().next().expect("non-empty after trim").trim_end();
    AgentDecision::FollowUp(first_line.to_string())
}

/// A traversal decision policy. Implementations must be stateless with
/// respect to the engine: `decide` may not assume anything about call order.
pub trait TraversalAgent: Send + Sync {
    fn name(&self) -> &str;

    /// Decide for `query` given the passages of one path, in visit order.
    /// `path_passages` is never empty — a path always contains its seed.
    fn decide(&self, query: &str, path_passages: &[&Passage])
        -> Result<AgentDecision, AgentError>;
}

/// Per-question golden passage chains, keyed by question text.
#[derive(Debug, Clone, Default)]
pub struct OracleKnowledge {
    chains: HashMap<String, Vec<String>>,
}

impl OracleKnowledge {
    /// Builds the knowledge table, verifying every golden id against the
    /// corpus so a typo in a dataset fails here and not mid-traversal.
    pub fn new(
        corpus: &Corpus,
        chains: impl IntoIterator<Item = (String, Vec<String>)>,
    ) -> Result<Self, AgentError> {
        let mut table = HashMap::new();
        for (query, chain) in chains {
            for id in &chain {
                if !corpus.contains_id(id) {
                    return Err(AgentError::UnknownGoldenId { id: id.clone() });
                }
            }
            table.insert(query, chain);
        }
        Ok(OracleKnowledge { chains: table })
    }

    pub fn chain(&self, query: &str) -> Option<&[String]> {
        self.chains.get(query).map(|c| c.as_slice())
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }
}

/// Knows the golden chain for every question: stops once the path covers the
/// whole chain, otherwise asks for the earliest missing golden passage using
/// that passage's full text as the "question". Under any embedder the true
/// passage then ranks first (cosine 1 with itself), which makes traversal
/// correctness testable independent of agent language quality.
pub struct OracleAgent {
    corpus: Arc<Corpus>,
    knowledge: OracleKnowledge,
}

impl OracleAgent {
    pub fn new(corpus: Arc<Corpus>, knowledge: OracleKnowledge) -> Self {
        OracleAgent { corpus, knowledge }
    }
}

impl TraversalAgent for OracleAgent {
    fn name(&self) -> &str {
        "oracle"
    }

    fn decide(
        &self,
        query: &str,
        path_passages: &[&Passage],
    ) -> Result<AgentDecision, AgentError> {
        let chain = self
            .knowledge
            .chain(query)
            .ok_or_else(|| AgentError::UnknownQuery {
                query: query.to_string(),
            })?;
        let present: HashSet<&str> = path_passages.iter().map(|p| p.id.as_str()).collect();
        match chain.iter().find(|id| !present.contains(id.as_str())) {
            None => Ok(AgentDecision::Stop),
            Some(missing) => {
                let passage = self.corpus.get(missing).expect("chain validated at build");
                Ok(AgentDecision::FollowUp(passage.text.clone()))
            }
        }
    }
}

/// Stops once every query token appears somewhere in the path (titles
/// count), otherwise asks for the missing tokens, space-joined in query
/// order with duplicates removed.
pub struct KeywordDiffAgent;

impl TraversalAgent for KeywordDiffAgent {
    fn name(&self) -> &str {
        "keyword-diff"
    }

    fn decide(
        &self,
        query: &str,
        path_passages: &[&Passage],
    ) -> Result<AgentDecision, AgentError> {
        let mut covered: HashSet<String> = HashSet::new();
        for p in path_passages {
            covered.extend(tokenize(&p.title));
            covered.extend(tokenize(&p.text));
        }
        let mut missing: Vec<String> = Vec::new();
        for tok in tokenize(query) {
            if !covered.contains(&tok) && !missing.contains(&tok) {
                missing.push(tok);
            }
        }
        if missing.is_empty() {
            Ok(AgentDecision::Stop)
        } else {
            Ok(AgentDecision::FollowUp(missing.join(" ")))
        }
    }
}

/// Always stops. Traversal with this agent retrieves exactly the seeds,
/// which is the seeds-only baseline.
pub struct StopAgent;

impl TraversalAgent for StopAgent {
    fn name(&self) -> &str {
        "stop"
    }

    fn decide(&self, _query: &str, _path: &[&Passage]) -> Result<AgentDecision, AgentError> {
        Ok(AgentDecision::Stop)
    }
}

/// Chat-model agent: renders the question and the path's passages into a
/// prompt, asks for a follow-up or NA, and parses the reply.
pub struct LlmAgent {
    client: ChatClient,
    system: String,
    evidence_budget: usize,
}

impl LlmAgent {
    pub fn new(client: ChatClient) -> Self {
        LlmAgent {
            client,
            system: AGENT_SYSTEM_TEMPLATE.to_string(),
            evidence_budget: DEFAULT_EVIDENCE_BUDGET,
        }
    }

    pub fn with_system_template(mut self, template: String) -> Self {
        self.system = template;
        self
    }

    pub fn with_evidence_budget(mut self, chars: usize) -> Self {
        assert!(chars > 0, "evidence budget must be positive");
        self.evidence_budget = chars;
        self
    }

    /// Path passages in visit order, title-prefixed, newline-separated,
    /// truncated to the evidence budget by dropping oldest passages first
    /// (the newest passage is truncated from the front as a last resort).
    fn render_evidence(&self, path_passages: &[&Passage]) -> String {
        let rendered: Vec<String> = path_passages
            .iter()
            .map(|p| {
                if p.title.is_empty() {
                    p.text.clone()
                } else {
                    format!("{}: {}", p.title, p.text)
                }
            })
            .collect();
        let mut kept: Vec<&str> = Vec::new();
        let mut total = 0usize;
        for r in rendered.iter().rev() {
            let cost = r.chars().count() + if kept.is_empty() { 0 } else { 1 };
            if total + cost > self.evidence_budget {
                break;
            }
            total += cost;
            kept.push(r);
        }
        if kept.is_empty() {
            // newest passage alone exceeds the budget: keep its tail
            let newest = rendered.last().expect("path is never empty");
            let tail_start = newest
                .char_indices()
                .rev()
                .nth(self.evidence_budget.saturating_sub(1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            return newest[tail_start..].to_string();
        }
        kept.reverse();
        kept.join("\n")
    }

    fn render_user(&self, query: &str, path_passages: &[&Passage]) -> String {
        format!(
            "Question: {}\nGiven: {}\nFollow-up question:",
            query,
            self.render_evidence(path_passages)
        )
    }
}

impl TraversalAgent for LlmAgent {
    fn name(&self) -> &str {
        "llm"
    }

    fn decide(
        &self,
        query: &str,
        path_passages: &[&Passage],
    ) -> Result<AgentDecision, AgentError> {
        assert!(!path_passages.is_empty(), "a path always contains its seed");
        let request = ChatRequest::for_traversal(vec![
            ChatMessage::system(self.system.clone()),
            ChatMessage::user(self.render_user(query, path_passages)),
        ]);
        let response = self.client.complete(&request)?;
        Ok(parse_decision(&response.text))
    }
}
