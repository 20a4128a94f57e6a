//! Dense passage representations behind a provider abstraction.
//!
//! Two providers: [`HashEmbedder`], a deterministic feature-hashing encoder
//! that makes the whole engine runnable offline and byte-reproducible, and
//! [`RemoteEmbedder`], which calls a hosted embeddings endpoint. Both
//! normalize at the boundary, so cosine similarity reduces to a dot product
//! everywhere downstream (graph construction and follow-up ranking).
//!
//! Vectors are stored as `f32`; similarity accumulates in `f64` so rankings
//! don't wobble with summation order.

use crate::lexical::tokenize;
use crate::llm::{EndpointConfig, HttpEndpoint, LlmError};
use std::sync::Arc;

pub type Embedding = Vec<f32>;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding request for inputs {start}..{end} failed: {source}")]
    Remote {
        start: usize,
        end: usize,
        #[source]
        source: LlmError,
    },
    #[error("provider declared dimension {expected} but returned a vector of length {got} (inputs {start}..{end})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        start: usize,
        end: usize,
    },
}

/// Cosine similarity of two same-length vectors, accumulated in `f64`.
/// Returns 0 when either vector is all zeros. Panics on a dimension
/// mismatch — that is a wiring bug, not a data condition.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(
        a.len(),
        b.len(),
        "cosine of mismatched dimensions ({} vs {})",
        a.len(),
        b.len()
    );
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// A text encoder. Implementations must be shareable across threads and,
/// when deterministic, return identical vectors for identical inputs.
pub trait EmbeddingProvider: Send + Sync {
    /// Provenance tag recorded in persisted graphs, e.g. `hash:seed=0:dim=256`.
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    /// One vector per input, same order, each L2-normalized or all-zero
    /// (the empty-text sentinel).
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError>;

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        Ok(self.embed_batch(&[text.to_string()])?.pop().unwrap())
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
/// Salt mixed into the seed for the sign hash so bucket and sign are
/// independent functions of the token.
const SIGN_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for b in seed.to_le_bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Deterministic feature-hashing encoder: each token lands in one of `dim`
/// signed buckets via a seeded FNV-1a hash, counts accumulate, and the
/// result is L2-normalized. Token-disjoint texts are orthogonal up to hash
/// collisions, which is enough structure for offline graph construction and
/// ranking tests.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    seed: u64,
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(0, 256)
    }
}

impl HashEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim >= 16, "hash embedder dimension must be >= 16, got {dim}");
        HashEmbedder { seed, dim }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Bucket a single token hashes to; exposed so tests can construct
    /// collision-free vocabularies.
    pub fn bucket_of(&self, token: &str) -> usize {
        (fnv1a64(self.seed, token.as_bytes()) % self.dim as u64) as usize
    }

    fn embed_one(&self, text: &str) -> Embedding {
        let mut acc = vec![0.0f64; self.dim];
        for token in tokenize(text) {
            let bucket = (fnv1a64(self.seed, token.as_bytes()) % self.dim as u64) as usize;
            let sign_bit = fnv1a64(self.seed ^ SIGN_SALT, token.as_bytes()) & 1;
            acc[bucket] += if sign_bit == 0 { 1.0 } else { -1.0 };
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return vec![0.0; self.dim];
        }
        acc.into_iter().map(|v| (v / norm) as f32).collect()
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn name(&self) -> String {
        format!("hash:seed={}:dim={}", self.seed, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Encoder backed by a hosted embeddings endpoint. Inputs are chunked into
/// batches; failures carry the input index range of the failing batch.
/// Returned vectors are re-normalized locally so the unit-norm invariant
/// holds regardless of what the server sends.
pub struct RemoteEmbedder {
    endpoint: Arc<HttpEndpoint>,
    dim: usize,
    batch_size: usize,
}

impl RemoteEmbedder {
    pub fn new(config: EndpointConfig, dim: usize) -> Result<Self, EmbedError> {
        let endpoint = HttpEndpoint::new(config).map_err(|source| EmbedError::Remote {
            start: 0,
            end: 0,
            source,
        })?;
        Ok(RemoteEmbedder {
            endpoint: Arc::new(endpoint),
            dim,
            batch_size: 64,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        assert!(batch_size > 0, "batch size must be positive");
        self.batch_size = batch_size;
        self
    }
}

fn normalize_in_place(v: &mut [f32]) {
    let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn name(&self) -> String {
        format!(
            "remote:{}:dim={}",
            self.endpoint.config().model,
            self.dim
        )
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for (chunk_idx, chunk) in texts.chunks(self.batch_size).enumerate() {
            let start = chunk_idx * self.batch_size;
            let end = start + chunk.len();
            let vectors = self
                .endpoint
                .embed_batch(chunk)
                .map_err(|source| EmbedError::Remote { start, end, source })?;
            for mut v in vectors {
                if v.len() != self.dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.dim,
                        got: v.len(),
                        start,
                        end,
                    });
                }
                normalize_in_place(&mut v);
                out.push(v);
            }
        }
        Ok(out)
    }
}
