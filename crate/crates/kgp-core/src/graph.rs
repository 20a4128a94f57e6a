//! Passage knowledge graph: build, persist, query.
//!
//! Nodes are corpus passages, edges connect each passage to its most
//! cosine-similar peers. Construction is exact brute-force kNN (parallel
//! across nodes), then the directed edge set is symmetrized by union so a
//! traversal can cross any edge in both directions. Edges are unweighted in
//! storage: downstream ranking recomputes similarity against the follow-up
//! question, so stored weights would be dead data.
//!
//! The on-disk format is binary: magic, version, a JSON header carrying
//! provenance (provider name, dimension, k_edges, passage ids), the
//! little-endian `f32` embedding matrix, and `u32` adjacency lists. Loading
//! verifies the header against the corpus so a graph can never be silently
//! paired with the wrong passages.

use crate::corpus::Corpus;
use crate::embedding::{cosine, EmbedError, Embedding, EmbeddingProvider};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

const MAGIC: &[u8; 4] = b"KGPG";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("graph construction needs at least 2 passages, got {len}")]
    CorpusTooSmall { len: usize },
    #[error("k_edges must be in 1..corpus size ({corpus}), got {k_edges}")]
    InvalidKEdges { k_edges: usize, corpus: usize },
    #[error("embedding passages failed: {0}")]
    Embed(#[from] EmbedError),
    #[error("graph io on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt graph file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("graph file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("graph does not belong to this corpus: {reason}")]
    ProvenanceMismatch { reason: String },
}

#[derive(Serialize, Deserialize)]
struct Header {
    provider: String,
    dim: usize,
    k_edges: usize,
    ids: Vec<String>,
}

/// Immutable passage graph; safe to share across traversal threads.
pub struct KnowledgeGraph {
    corpus: Arc<Corpus>,
    embeddings: Vec<Embedding>,
    adjacency: Vec<Vec<usize>>,
    k_edges: usize,
    provider_name: String,
    dim: usize,
}

impl std::fmt::Debug for KnowledgeGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeGraph")
            .field("nodes", &self.node_count())
            .field("k_edges", &self.k_edges)
            .field("provider", &self.provider_name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl KnowledgeGraph {
    /// Embeds every passage and connects each node to its `k_edges`
    /// highest-cosine peers (ties broken by ascending ordinal), then
    /// symmetrizes by union. Deterministic whenever the provider is.
    pub fn build(
        corpus: &Arc<Corpus>,
        provider: &dyn EmbeddingProvider,
        k_edges: usize,
    ) -> Result<Self, GraphError> {
        let n = corpus.len();
        if n < 2 {
            return Err(GraphError::CorpusTooSmall { len: n });
        }
        if k_edges == 0 || k_edges >= n {
            return Err(GraphError::InvalidKEdges { k_edges, corpus: n });
        }

        let texts: Vec<String> = corpus.iter().map(|p| p.text.clone()).collect();
        let embeddings = provider.embed_batch(&texts)?;

        // Exact kNN, one node per task; each row is independent so the
        // parallel result is deterministic.
        let directed: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut scored: Vec<(usize, f64)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (j, cosine(&embeddings[i], &embeddings[j])))
                    .collect();
                scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                scored.truncate(k_edges);
                scored.into_iter().map(|(j, _)| j).collect()
            })
            .collect();

        let mut neighbor_sets: Vec<std::collections::BTreeSet<usize>> =
            vec![std::collections::BTreeSet::new(); n];
        for (i, targets) in directed.iter().enumerate() {
            for &j in targets {
                neighbor_sets[i].insert(j);
                neighbor_sets[j].insert(i);
            }
        }
        let adjacency: Vec<Vec<usize>> = neighbor_sets
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();

        Ok(KnowledgeGraph {
            corpus: Arc::clone(corpus),
            embeddings,
            adjacency,
            k_edges,
            provider_name: provider.name(),
            dim: provider.dim(),
        })
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Sorted neighbor ordinals of `node`. Panics on an out-of-range
    /// ordinal — callers hold ordinals that came from this graph.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// The build-time embedding of a passage.
    pub fn embedding(&self, node: usize) -> &[f32] {
        &self.embeddings[node]
    }

    pub fn k_edges(&self) -> usize {
        self.k_edges
    }

    pub fn provider_name(&self) -> &str {
        &self.provider_name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let io_err = |source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);

        let header = Header {
            provider: self.provider_name.clone(),
            dim: self.dim,
            k_edges: self.k_edges,
            ids: self.corpus.iter().map(|p| p.id.clone()).collect(),
        };
        let header_bytes = serde_json::to_vec(&header).expect("header serializes");

        w.write_all(MAGIC).map_err(io_err)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
        w.write_all(&(header_bytes.len() as u64).to_le_bytes())
            .map_err(io_err)?;
        w.write_all(&header_bytes).map_err(io_err)?;
        for vector in &self.embeddings {
            for &x in vector {
                w.write_all(&x.to_le_bytes()).map_err(io_err)?;
            }
        }
        for list in &self.adjacency {
            w.write_all(&(list.len() as u32).to_le_bytes()).map_err(io_err)?;
            for &j in list {
                w.write_all(&(j as u32).to_le_bytes()).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)
    }

    /// Loads a graph and binds it to `corpus`, verifying that the persisted
    /// passage ids match the corpus exactly (count, order, spelling).
    pub fn load(path: &Path, corpus: &Arc<Corpus>) -> Result<Self, GraphError> {
        let io_err = |source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        };
        let corrupt = |reason: String| GraphError::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        let file = std::fs::File::open(path).map_err(io_err)?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic", path)?;
        if &magic != MAGIC {
            return Err(corrupt("bad magic bytes".into()));
        }
        let version = read_u32(&mut r, "version", path)?;
        if version != VERSION {
            return Err(GraphError::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let header_len = read_u64(&mut r, "header length", path)? as usize;
        if header_len > 64 * 1024 * 1024 {
            return Err(corrupt(format!("implausible header length {header_len}")));
        }
        let mut header_bytes = vec![0u8; header_len];
        read_exact(&mut r, &mut header_bytes, "header", path)?;
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| corrupt(format!("header json: {e}")))?;

        let n = header.ids.len();
        if n != corpus.len() {
            return Err(GraphError::ProvenanceMismatch {
                reason: format!("graph has {} passages, corpus has {}", n, corpus.len()),
            });
        }
        for (i, id) in header.ids.iter().enumerate() {
            if corpus.passage(i).id != *id {
                return Err(GraphError::ProvenanceMismatch {
                    reason: format!(
                        "passage {} is {:?} in the graph but {:?} in the corpus",
                        i,
                        id,
                        corpus.passage(i).id
                    ),
                });
            }
        }

        let mut embeddings = Vec::with_capacity(n);
        let mut buf = vec![0u8; header.dim * 4];
        for i in 0..n {
            read_exact(&mut r, &mut buf, &format!("embedding row {i}"), path)?;
            let row: Embedding = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            embeddings.push(row);
        }

        let mut adjacency = Vec::with_capacity(n);
        for i in 0..n {
            let count = read_u32(&mut r, &format!("adjacency count {i}"), path)? as usize;
            if count > n {
                return Err(corrupt(format!("node {i} claims {count} neighbors in a {n}-node graph")));
            }
            let mut list = Vec::with_capacity(count);
            for _ in 0..count {
                let j = read_u32(&mut r, &format!("adjacency entry of node {i}"), path)? as usize;
                if j >= n {
                    return Err(corrupt(format!("node {i} lists out-of-range neighbor {j}")));
                }
                list.push(j);
            }
            adjacency.push(list);
        }

        let mut trailing = [0u8; 1];
        match r.read(&mut trailing) {
            Ok(0) => {}
            Ok(_) => return Err(corrupt("trailing bytes after adjacency".into())),
            Err(source) => return Err(io_err(source)),
        }

        Ok(KnowledgeGraph {
            corpus: Arc::clone(corpus),
            embeddings,
            adjacency,
            k_edges: header.k_edges,
            provider_name: header.provider,
            dim: header.dim,
        })
    }
}

fn read_exact<R: Read>(
    r: &mut R,
    buf: &mut [u8],
    what: &str,
    path: &Path,
) -> Result<(), GraphError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            GraphError::Corrupt {
                path: path.to_path_buf(),
                reason: format!("file ends inside {what}"),
            }
        } else {
            GraphError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str, path: &Path) -> Result<u32, GraphError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what, path)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str, path: &Path) -> Result<u64, GraphError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what, path)?;
    Ok(u64::from_le_bytes(b))
}
