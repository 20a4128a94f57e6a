//! Budgeted, agent-guided breadth-first traversal over the passage graph.
//!
//! A query is answered in three stages: lexical seeding (TF-IDF top
//! `n_seed`, each seed becoming a unit path), breadth-first expansion (paths
//! are dequeued FIFO; the agent either stops a path or asks a follow-up
//! question; candidates — the newest node's unvisited neighbors — are ranked
//! by cosine between the follow-up question and the candidate text, and the
//! `top_k` best extend the path), and assembly (seeds plus selections, in
//! order, truncated to the budget `K`).
//!
//! Two global brakes: each selection increments a counter `k` (initialized
//! to the seed count) and `k > K` ends the whole traversal; a stop decision
//! ends the whole traversal when `early_termination` is on, and only retires
//! its path when off (the comparison arm for iteration studies). Paths never
//! exceed `1 + max_hops` nodes, and a node retrieved once is never selected
//! again (global visited set).

use crate::agent::{AgentDecision, AgentError, TraversalAgent};
use crate::corpus::Passage;
use crate::embedding::{cosine, EmbedError, EmbeddingProvider};
use crate::graph::KnowledgeGraph;
use crate::lexical::TfidfModel;
use serde::Serialize;
use std::collections::{HashSet, VecDeque};
use std::time::{Duration, Instant};

#[derive(Debug, thiserror::Error)]
pub enum TraversalError {
    #[error("invalid traversal config: {reason}")]
    InvalidConfig { reason: String },
    #[error("graph and seed model are built over different corpora")]
    CorpusMismatch,
    #[error("ranker dimension {ranker} does not match graph embedding dimension {graph}")]
    RankerDimension { graph: usize, ranker: usize },
    #[error("agent failed mid-traversal ({count} passages retrieved so far): {source}", count = .partial.retrieved.len())]
    Agent {
        #[source]
        source: AgentError,
        partial: Box<TraversalResult>,
    },
    #[error("embedding provider failed mid-traversal ({count} passages retrieved so far): {source}", count = .partial.retrieved.len())]
    Provider {
        #[source]
        source: EmbedError,
        partial: Box<TraversalResult>,
    },
    #[error("embedding the query failed: {0}")]
    Ranker(#[from] EmbedError),
}

/// Errors from a single path expansion; `traverse` wraps these with the
/// partial result accumulated so far.
#[derive(Debug, thiserror::Error)]
pub enum ExpandError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Ranker(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversalConfig {
    /// Total retrieval budget K; seeds count against it.
    pub budget: usize,
    /// Number of TF-IDF seed passages.
    pub n_seed: usize,
    /// Fan-out per expansion: how many ranked candidates extend a path.
    pub top_k: usize,
    /// Maximum hops from a seed; paths hold at most `1 + max_hops` nodes.
    pub max_hops: usize,
    /// Whether one stop decision terminates the whole traversal.
    pub early_termination: bool,
}

impl Default for TraversalConfig {
    fn default() -> Self {
        TraversalConfig {
            budget: 30,
            n_seed: 5,
            top_k: 3,
            max_hops: 2,
            early_termination: true,
        }
    }
}

impl TraversalConfig {
    pub fn validate(&self) -> Result<(), TraversalError> {
        let fail = |reason: String| Err(TraversalError::InvalidConfig { reason });
        if self.budget == 0 {
            return fail("budget must be positive".into());
        }
        if self.n_seed == 0 || self.n_seed > self.budget {
            return fail(format!(
                "n_seed must be in 1..=budget ({}), got {}",
                self.budget, self.n_seed
            ));
        }
        if self.top_k == 0 {
            return fail("top_k must be at least 1".into());
        }
        if self.max_hops == 0 {
            return fail("max_hops must be at least 1".into());
        }
        Ok(())
    }
}

/// Outcome of one traversal. `retrieved` lists unique passage ids, seeds
/// first (in TF-IDF rank order) then selections (in selection order),
/// truncated to the budget. `paths` holds every path that was never
/// extended — the traversal's leaves.
#[derive(Debug, Clone)]
pub struct TraversalResult {
    pub retrieved: Vec<String>,
    pub paths: Vec<Vec<usize>>,
    /// Number of agent decide() calls.
    pub iterations: usize,
    /// Number of distinct passages retrieved (after truncation).
    pub nodes_visited: usize,
    pub terminated_early: bool,
    pub wall_time: Duration,
}

/// One dequeue-decide-select step, for debugging and iteration studies.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEvent {
    pub step: usize,
    pub path: Vec<usize>,
    /// "stop" or "follow_up"
    pub decision: String,
    pub follow_up: Option<String>,
    pub selected: Vec<usize>,
    /// Budget counter after this step's selections.
    pub k_after: usize,
}

/// Result of expanding one path: the agent's decision and the candidates
/// chosen to extend the path (empty on stop or when nothing is rankable).
#[derive(Debug, Clone)]
pub struct ExpandOutcome {
    pub decision: AgentDecision,
    pub selected: Vec<usize>,
}

/// Asks the agent about `path` and, on a follow-up, ranks `candidates` by
/// cosine between the follow-up question and each candidate's text (query
/// and candidates embedded together by the ranker provider), returning the
/// `top_k` best — ties broken by ascending ordinal.
pub fn expand_path(
    graph: &KnowledgeGraph,
    ranker: &dyn EmbeddingProvider,
    agent: &dyn TraversalAgent,
    query: &str,
    path: &[usize],
    candidates: &[usize],
    top_k: usize,
) -> Result<ExpandOutcome, ExpandError> {
    let corpus = graph.corpus();
    let path_passages: Vec<&Passage> = path.iter().map(|&o| corpus.passage(o)).collect();
    let decision = agent.decide(query, &path_passages)?;

    let follow_up = match &decision {
        AgentDecision::Stop => {
            return Ok(ExpandOutcome {
                decision,
                selected: Vec::new(),
            })
        }
        AgentDecision::FollowUp(q) => q.clone(),
    };
    if candidates.is_empty() {
        return Ok(ExpandOutcome {
            decision,
            selected: Vec::new(),
        });
    }

    // One batch: the follow-up question first, then every candidate text.
    let mut texts = Vec::with_capacity(1 + candidates.len());
    texts.push(follow_up);
    texts.extend(candidates.iter().map(|&o| corpus.passage(o).text.clone()));
    let vectors = ranker.embed_batch(&texts)?;
    let (question_vec, candidate_vecs) = vectors.split_first().expect("batch non-empty");

    let mut ranked: Vec<(usize, f64)> = candidates
        .iter()
        .zip(candidate_vecs)
        .map(|(&o, v)| (o, cosine(question_vec, v)))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ranked.truncate(top_k);

    Ok(ExpandOutcome {
        decision,
        selected: ranked.into_iter().map(|(o, _)| o).collect(),
    })
}

struct RunState {
    retrieved: Vec<usize>,
    visited: HashSet<usize>,
    queue: VecDeque<Vec<usize>>,
    /// Paths that never produced a child.
    leaves: Vec<Vec<usize>>,
    iterations: usize,
    k: usize,
    terminated_early: bool,
}

impl RunState {
    fn into_result(
        mut self,
        graph: &KnowledgeGraph,
        budget: usize,
        start: Instant,
    ) -> TraversalResult {
        self.leaves.extend(self.queue.drain(..));
        let retrieved: Vec<String> = self
            .retrieved
            .iter()
            .take(budget)
            .map(|&o| graph.corpus().passage(o).id.clone())
            .collect();
        let nodes_visited = retrieved.len();
        TraversalResult {
            retrieved,
            paths: self.leaves,
            iterations: self.iterations,
            nodes_visited,
            terminated_early: self.terminated_early,
            wall_time: start.elapsed(),
        }
    }
}

/// Runs the full traversal for one query. See the module docs for the
/// algorithm; errors from the agent or the embedding provider abort the
/// query but carry the partial result accumulated so far.
pub fn traverse(
    graph: &KnowledgeGraph,
    tfidf: &TfidfModel,
    agent: &dyn TraversalAgent,
    ranker: &dyn EmbeddingProvider,
    query: &str,
    config: &TraversalConfig,
) -> Result<TraversalResult, TraversalError> {
    traverse_inner(graph, tfidf, agent, ranker, query, config, None)
}

/// Like [`traverse`], additionally recording one [`TraceEvent`] per agent
/// decision.
pub fn traverse_with_trace(
    graph: &KnowledgeGraph,
    tfidf: &TfidfModel,
    agent: &dyn TraversalAgent,
    ranker: &dyn EmbeddingProvider,
    query: &str,
    config: &TraversalConfig,
) -> Result<(TraversalResult, Vec<TraceEvent>), TraversalError> {
    let mut trace = Vec::new();
    let result = traverse_inner(graph, tfidf, agent, ranker, query, config, Some(&mut trace))?;
    Ok((result, trace))
}

fn traverse_inner(
    graph: &KnowledgeGraph,
    tfidf: &TfidfModel,
    agent: &dyn TraversalAgent,
    ranker: &dyn EmbeddingProvider,
    query: &str,
    config: &TraversalConfig,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> Result<TraversalResult, TraversalError> {
    config.validate()?;
    let corpus = graph.corpus();
    let same_corpus = std::sync::Arc::ptr_eq(corpus, tfidf.corpus())
        || (corpus.len() == tfidf.corpus().len()
            && corpus
                .iter()
                .zip(tfidf.corpus().iter())
                .all(|(a, b)| a.id == b.id));
    if !same_corpus {
        return Err(TraversalError::CorpusMismatch);
    }

    let start = Instant::now();
    let seeds: Vec<usize> = tfidf
        .top_k(query, config.n_seed)
        .into_iter()
        .map(|(id, _)| corpus.ordinal_of(&id).expect("seed id from same corpus"))
        .collect();

    let mut st = RunState {
        retrieved: seeds.clone(),
        visited: seeds.iter().copied().collect(),
        queue: seeds.iter().map(|&s| vec![s]).collect(),
        leaves: Vec::new(),
        iterations: 0,
        k: seeds.len(),
        terminated_early: false,
    };

    'search: while let Some(path) = st.queue.pop_front() {
        let newest = *path.last().expect("paths are non-empty");
        let candidates: Vec<usize> = graph
            .neighbors(newest)
            .iter()
            .copied()
            .filter(|n| !st.visited.contains(n))
            .collect();

        st.iterations += 1;
        let outcome = match expand_path(
            graph,
            ranker,
            agent,
            query,
            &path,
            &candidates,
            config.top_k,
        ) {
            Ok(outcome) => outcome,
            Err(source) => {
                st.queue.push_front(path);
                let partial = Box::new(st.into_result(graph, config.budget, start));
                return Err(match source {
                    ExpandError::Agent(source) => TraversalError::Agent { source, partial },
                    ExpandError::Ranker(source) => TraversalError::Provider { source, partial },
                });
            }
        };

        let (decision_label, follow_up) = match &outcome.decision {
            AgentDecision::Stop => ("stop", None),
            AgentDecision::FollowUp(q) => ("follow_up", Some(q.clone())),
        };

        if outcome.decision == AgentDecision::Stop {
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceEvent {
                    step: st.iterations,
                    path: path.clone(),
                    decision: decision_label.into(),
                    follow_up,
                    selected: Vec::new(),
                    k_after: st.k,
                });
            }
            st.leaves.push(path);
            if config.early_termination {
                st.terminated_early = true;
                break 'search;
            }
            continue;
        }

        let mut appended = Vec::new();
        let mut budget_hit = false;
        for &s in &outcome.selected {
            st.visited.insert(s);
            st.retrieved.push(s);
            st.k += 1;
            appended.push(s);
            let mut child = path.clone();
            child.push(s);
            if child.len() > config.max_hops {
                st.leaves.push(child);
            } else {
                st.queue.push_back(child);
            }
            if st.k > config.budget {
                budget_hit = true;
                break;
            }
        }
        if appended.is_empty() {
            // follow-up with nothing to rank: the path is a leaf
            st.leaves.push(path.clone());
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceEvent {
                step: st.iterations,
                path,
                decision: decision_label.into(),
                follow_up,
                selected: appended,
                k_after: st.k,
            });
        }
        if budget_hit {
            break 'search;
        }
    }

    Ok(st.into_result(graph, config.budget, start))
}

/// Traversal-free dense baseline: embed the query with the ranker and rank
/// every passage by cosine against the graph's stored embeddings; top `k`,
/// ties by ascending ordinal.
pub fn dense_retrieve_baseline(
    graph: &KnowledgeGraph,
    ranker: &dyn EmbeddingProvider,
    query: &str,
    k: usize,
) -> Result<Vec<String>, TraversalError> {
    if ranker.dim() != graph.dim() {
        return Err(TraversalError::RankerDimension {
            graph: graph.dim(),
            ranker: ranker.dim(),
        });
    }
    let query_vec = ranker.embed(query)?;
    let n = graph.node_count();
    let mut ranked: Vec<(usize, f64)> = (0..n)
        .map(|i| (i, cosine(&query_vec, graph.embedding(i))))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked
        .into_iter()
        .map(|(i, _)| graph.corpus().passage(i).id.clone())
        .collect())
}
