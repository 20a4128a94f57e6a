//! Knowledge-graph-prompting retrieval engine for multi-document question
//! answering.
//!
//! The engine builds a passage-level knowledge graph (nodes are passages,
//! edges connect passages with high embedding cosine similarity), seeds a
//! search with TF-IDF, and expands it breadth-first under a passage budget.
//! At each expansion a pluggable agent looks at the question and the evidence
//! gathered along the current path and either asks a follow-up question
//! (used to rank candidate neighbors) or signals that the evidence suffices,
//! which can terminate the search early.
//!
//! Modules:
//! - [`corpus`]: passage corpora (JSONL load/save, id addressing)
//! - [`lexical`]: tokenization, TF-IDF and BM25 retrieval
//! - [`embedding`]: embedding providers (deterministic feature hashing and a
//!   remote HTTP provider) plus cosine similarity
//! - [`graph`]: kNN knowledge-graph construction, persistence, queries
//! - [`llm`]: minimal chat-completions client shared by every LLM role
//! - [`agent`]: traversal agents (LLM, oracle, keyword-diff, stop)
//! - [`traversal`]: the budgeted breadth-first search engine
//! - [`answer`]: answer generation and judging
//! - [`eval`]: retrieval metrics (cosine exact match, ROUGE) and harnesses
//! - [`synth`]: deterministic synthetic corpora and the follow-up dataset
//!   pipeline
//!
//! Everything except the remote providers runs fully offline; the test suite
//! exercises network paths against an in-process stub server.

pub mod agent;
pub mod answer;
pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod graph;
pub mod lexical;
pub mod llm;
pub mod synth;
pub mod traversal;

mod sync;

pub use agent::{AgentDecision, KeywordDiffAgent, LlmAgent, OracleAgent, StopAgent, TraversalAgent};
pub use corpus::{Corpus, Passage};
pub use embedding::{cosine, Embedding, EmbeddingProvider, HashEmbedder, RemoteEmbedder};
pub use eval::{exact_match, rouge1_f, rouge_l_f, EvalConfig, EvalReport, GoldenRecord, QuestionType};
pub use graph::KnowledgeGraph;
pub use lexical::{tokenize, Bm25Model, TfidfModel};
pub use llm::{ChatClient, ChatRequest, ChatResponse, EndpointConfig};
pub use synth::{generate_synthetic, FollowUpSample, SynthBundle, SynthSpec};
pub use traversal::{TraversalConfig, TraversalResult};
