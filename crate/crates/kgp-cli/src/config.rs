//! Engine configuration file: one TOML document with paths, traversal
//! parameters, embedding provider roles, and per-role LLM endpoints.
//! Commands read only the sections they need, so offline commands never
//! touch network configuration. Credentials are never stored here — endpoint
//! sections name an environment variable instead.

use crate::CliError;
use kgp_core::embedding::{EmbeddingProvider, HashEmbedder, RemoteEmbedder};
use kgp_core::llm::EndpointConfig;
use kgp_core::traversal::TraversalConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    /// Default RNG seed; the --seed flag overrides it.
    pub seed: Option<u64>,
    /// Worker-pool width for question-parallel evaluation.
    pub workers: Option<usize>,
    /// Cosine threshold for golden-recall matching.
    pub em_threshold: Option<f64>,
    /// Default corpus path; per-command --corpus overrides it.
    pub corpus: Option<PathBuf>,
    /// Default graph path; per-command --graph overrides it.
    pub graph: Option<PathBuf>,
    #[serde(default)]
    pub traversal: TraversalSection,
    #[serde(default)]
    pub providers: ProvidersSection,
    #[serde(default)]
    pub llm: LlmSection,
}

impl EngineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(EngineConfig::default());
        };
        let raw = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&raw)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Partial traversal parameters; unset fields keep engine defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraversalSection {
    pub budget: Option<usize>,
    pub n_seed: Option<usize>,
    pub top_k: Option<usize>,
    pub max_hops: Option<usize>,
    pub early_termination: Option<bool>,
}

impl TraversalSection {
    pub fn to_config(&self) -> TraversalConfig {
        let d = TraversalConfig::default();
        TraversalConfig {
            budget: self.budget.unwrap_or(d.budget),
            n_seed: self.n_seed.unwrap_or(d.n_seed),
            top_k: self.top_k.unwrap_or(d.top_k),
            max_hops: self.max_hops.unwrap_or(d.max_hops),
            early_termination: self.early_termination.unwrap_or(d.early_termination),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersSection {
    /// Embedder used when building graphs (node vectors).
    #[serde(rename = "graph-builder")]
    pub graph_builder: Option<ProviderSpec>,
    /// Embedder used at query time (candidate ranking, recall matching).
    pub ranker: Option<ProviderSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSpec {
    Hash {
        seed: Option<u64>,
        dim: Option<usize>,
    },
    Remote {
        dim: usize,
        #[serde(flatten)]
        endpoint: EndpointConfig,
    },
}

/// Chat endpoints by role; absent roles only matter to commands that use
/// them.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub agent: Option<EndpointConfig>,
    pub answerer: Option<EndpointConfig>,
    pub judge: Option<EndpointConfig>,
    pub dataset: Option<EndpointConfig>,
}

/// Instantiates a provider role; no configuration means the default hash
/// embedder, which keeps every command offline-capable.
pub fn build_provider(spec: Option<&ProviderSpec>) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    match spec {
        None => Ok(Box::new(HashEmbedder::default())),
        Some(ProviderSpec::Hash { seed, dim }) => {
            let dim = dim.unwrap_or(256);
            if dim < 16 {
                return Err(CliError::Usage(format!(
                    "hash provider dimension must be >= 16, got {dim}"
                )));
            }
            Ok(Box::new(HashEmbedder::new(seed.unwrap_or(0), dim)))
        }
        Some(ProviderSpec::Remote { dim, endpoint }) => Ok(Box::new(
            RemoteEmbedder::new(endpoint.clone(), *dim)
                .map_err(|e| CliError::Network(e.to_string()))?,
        )),
    }
}
