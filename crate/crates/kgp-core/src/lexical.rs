//! Tokenization and sparse lexical retrieval.
//!
//! TF-IDF supplies the seeding passages for graph traversal and doubles as a
//! baseline retriever; BM25 is a second baseline. Both share one tokenizer:
//! lowercase, split on any non-alphanumeric character, no stemming and no
//! stopword list, so results are deterministic and language-agnostic.
//!
//! Scoring conventions (identical for both models): every passage in the
//! corpus receives a score (zero when it shares no terms with the query),
//! rankings are descending by score with ties broken by ascending passage
//! ordinal, and a query with no known terms yields an empty result.

use crate::corpus::Corpus;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum LexicalError {
    #[error("cannot fit a retrieval model on an empty corpus")]
    EmptyCorpus,
    #[error("invalid BM25 parameters: k1={k1}, b={b} (need k1 > 0 and 0 <= b <= 1)")]
    InvalidBm25Params { k1: f64, b: f64 },
}

/// Lowercases and splits on non-alphanumeric characters, dropping empty
/// fragments. `"Arthur's Magazine (1844)"` becomes
/// `["arthur", "s", "magazine", "1844"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Term counts in first-occurrence order. The stable order keeps score
/// accumulation deterministic across runs and platforms.
fn term_counts(tokens: &[String], vocab: &HashMap<String, usize>) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = Vec::new();
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for tok in tokens {
        if let Some(&t) = vocab.get(tok) {
            let e = counts.entry(t).or_insert(0.0);
            if *e == 0.0 {
                order.push(t);
            }
            *e += 1.0;
        }
    }
    order.into_iter().map(|t| (t, counts[&t])).collect()
}

fn rank_descending(scores: Vec<f64>, k: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .take(k)
        .map(|i| (i, scores[i]))
        .collect()
}

/// TF-IDF model with smoothed idf `ln((1+N)/(1+df)) + 1` and L2-normalized
/// document vectors, so query/document scores are plain cosines.
#[derive(Debug)]
pub struct TfidfModel {
    corpus: Arc<Corpus>,
    vocab: HashMap<String, usize>,
    idf: Vec<f64>,
    /// doc ordinal -> sorted-by-first-occurrence (term, normalized weight)
    doc_vectors: Vec<Vec<(usize, f64)>>,
    /// term -> (doc ordinal, normalized weight), doc ordinals ascending
    postings: Vec<Vec<(usize, f64)>>,
}

impl TfidfModel {
    pub fn fit(corpus: &Arc<Corpus>) -> Result<Self, LexicalError> {
        if corpus.is_empty() {
            return Err(LexicalError::EmptyCorpus);
        }
        let n = corpus.len();

        // Vocabulary in first-occurrence order over the corpus.
        let mut vocab: HashMap<String, usize> = HashMap::new();
        let doc_tokens: Vec<Vec<String>> = corpus.iter().map(|p| tokenize(&p.text)).collect();
        for tokens in &doc_tokens {
            for tok in tokens {
                if !vocab.contains_key(tok) {
                    vocab.insert(tok.clone(), vocab.len());
                }
            }
        }

        let mut df = vec![0usize; vocab.len()];
        let mut raw: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for tokens in &doc_tokens {
            let counts = term_counts(tokens, &vocab);
            for &(t, _) in &counts {
                df[t] += 1;
            }
            raw.push(counts);
        }

        let idf: Vec<f64> = df
            .iter()
            .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();

        let mut doc_vectors = Vec::with_capacity(n);
        let mut postings: Vec<Vec<(usize, f64)>> = vec![Vec::new(); vocab.len()];
        for (doc, counts) in raw.into_iter().enumerate() {
            let weighted: Vec<(usize, f64)> =
                counts.into_iter().map(|(t, tf)| (t, tf * idf[t])).collect();
            let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            let vector: Vec<(usize, f64)> = if norm > 0.0 {
                weighted.into_iter().map(|(t, w)| (t, w / norm)).collect()
            } else {
                Vec::new()
            };
            for &(t, w) in &vector {
                postings[t].push((doc, w));
            }
            doc_vectors.push(vector);
        }

        Ok(TfidfModel {
            corpus: Arc::clone(corpus),
            vocab,
            idf,
            doc_vectors,
            postings,
        })
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.vocab.get(term).map(|&t| self.idf[t])
    }

    /// Normalized (term, weight) vector of a document; term ids are
    /// model-internal.
    pub fn doc_vector(&self, ordinal: usize) -> &[(usize, f64)] {
        &self.doc_vectors[ordinal]
    }

    /// Normalized query vector, or empty when no query token is in the
    /// vocabulary.
    fn query_vector(&self, query: &str) -> Vec<(usize, f64)> {
        let tokens = tokenize(query);
        let weighted: Vec<(usize, f64)> = term_counts(&tokens, &self.vocab)
            .into_iter()
            .map(|(t, tf)| (t, tf * self.idf[t]))
            .collect();
        let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            weighted.into_iter().map(|(t, w)| (t, w / norm)).collect()
        } else {
            Vec::new()
        }
    }

    /// Top-k passages by cosine against the query, ties by ascending
    /// ordinal. All passages are ranked (zero scores included), so the
    /// result length is `min(k, corpus size)`; an all-unknown query yields
    /// an empty result.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        let qv = self.query_vector(query);
        if qv.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut scores = vec![0.0f64; self.corpus.len()];
        for &(t, qw) in &qv {
            for &(doc, dw) in &self.postings[t] {
                scores[doc] += qw * dw;
            }
        }
        rank_descending(scores, k)
            .into_iter()
            .map(|(i, s)| (self.corpus.passage(i).id.clone(), s))
            .collect()
    }
}

/// Okapi BM25 with idf `ln(1 + (N - df + 0.5)/(df + 0.5))`.
#[derive(Debug)]
pub struct Bm25Model {
    corpus: Arc<Corpus>,
    vocab: HashMap<String, usize>,
    idf: Vec<f64>,
    /// term -> (doc ordinal, term frequency), doc ordinals ascending
    postings: Vec<Vec<(usize, f64)>>,
    doc_len: Vec<f64>,
    avgdl: f64,
    pub k1: f64,
    pub b: f64,
}

pub const BM25_DEFAULT_K1: f64 = 1.2;
pub const BM25_DEFAULT_B: f64 = 0.75;

impl Bm25Model {
    pub fn fit(corpus: &Arc<Corpus>) -> Result<Self, LexicalError> {
        Self::fit_with_params(corpus, BM25_DEFAULT_K1, BM25_DEFAULT_B)
    }

    pub fn fit_with_params(corpus: &Arc<Corpus>, k1: f64, b: f64) -> Result<Self, LexicalError> {
        if corpus.is_empty() {
            return Err(LexicalError::EmptyCorpus);
        }
        if !k1.is_finite() || k1 <= 0.0 || !(0.0..=1.0).contains(&b) {
            return Err(LexicalError::InvalidBm25Params { k1, b });
        }
        let n = corpus.len();

        let mut vocab: HashMap<String, usize> = HashMap::new();
        let doc_tokens: Vec<Vec<String>> = corpus.iter().map(|p| tokenize(&p.text)).collect();
        for tokens in &doc_tokens {
            for tok in tokens {
                if !vocab.contains_key(tok) {
                    vocab.insert(tok.clone(), vocab.len());
                }
            }
        }

        let mut df = vec![0usize; vocab.len()];
        let mut postings: Vec<Vec<(usize, f64)>> = vec![Vec::new(); vocab.len()];
        let mut doc_len = Vec::with_capacity(n);
        for (doc, tokens) in doc_tokens.iter().enumerate() {
            doc_len.push(tokens.len() as f64);
            for (t, tf) in term_counts(tokens, &vocab) {
                df[t] += 1;
                postings[t].push((doc, tf));
            }
        }
        let avgdl = doc_len.iter().sum::<f64>() / n as f64;

        let idf: Vec<f64> = df
            .iter()
            .map(|&d| (1.0 + (n as f64 - d as f64 + 0.5) / (d as f64 + 0.5)).ln())
            .collect();

        Ok(Bm25Model {
            corpus: Arc::clone(corpus),
            vocab,
            idf,
            postings,
            doc_len,
            avgdl,
            k1,
            b,
        })
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    /// Top-k passages by BM25 score; ordering and degenerate-query rules
    /// match [`TfidfModel::top_k`].
    pub fn top_k(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        let tokens = tokenize(query);
        let q_terms = term_counts(&tokens, &self.vocab);
        if q_terms.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut scores = vec![0.0f64; self.corpus.len()];
        for &(t, _) in &q_terms {
            let idf = self.idf[t];
            for &(doc, tf) in &self.postings[t] {
                let denom =
                    tf + self.k1 * (1.0 - self.b + self.b * self.doc_len[doc] / self.avgdl);
                scores[doc] += idf * tf * (self.k1 + 1.0) / denom;
            }
        }
        rank_descending(scores, k)
            .into_iter()
            .map(|(i, s)| (self.corpus.passage(i).id.clone(), s))
            .collect()
    }
}
