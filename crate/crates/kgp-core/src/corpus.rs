//! Passage corpora: the substrate every other module retrieves from.
//!
//! A corpus is an ordered, immutable collection of passages loaded from a
//! JSONL file (one object per line with keys `id`, optional `title`, `text`).
//! Iteration order equals load order and ordinals are stable, so golden
//! references in evaluation data stay valid across runs.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

/// The unit of retrieval: a stable id, an optional title, and a body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

/// Immutable ordered set of passages with an id -> ordinal index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    passages: Vec<Passage>,
    index: HashMap<String, usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate passage id {id:?} on line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("empty text for passage {id:?} on line {line}")]
    EmptyText { id: String, line: usize },
    #[error("unknown passage id {0:?}")]
    UnknownId(String),
}

impl Corpus {
    /// Builds a corpus from passages in order, enforcing the id/text
    /// invariants. Line numbers in errors are 1-based positions.
    pub fn from_passages(passages: Vec<Passage>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(passages.len());
        for (pos, p) in passages.iter().enumerate() {
            if p.text.trim().is_empty() {
                return Err(CorpusError::EmptyText {
                    id: p.id.clone(),
                    line: pos + 1,
                });
            }
            if index.insert(p.id.clone(), pos).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: p.id.clone(),
                    line: pos + 1,
                });
            }
        }
        Ok(Corpus { passages, index })
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    /// Passage at an ordinal position. Panics if out of range, like slice
    /// indexing.
    pub fn passage(&self, ordinal: usize) -> &Passage {
        &self.passages[ordinal]
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn iter(&self) -> impl Iterator<Item = &Passage> {
        self.passages.iter()
    }

    /// Ordinal position of an id, if present.
    pub fn ordinal_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Looks up a passage by id.
    pub fn get(&self, id: &str) -> Result<&Passage, CorpusError> {
        self.ordinal_of(id)
            .map(|pos| &self.passages[pos])
            .ok_or_else(|| CorpusError::UnknownId(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.passages.iter().map(|p| p.id.as_str())
    }
}

/// Loads a JSONL corpus. Every line must parse and carry a unique id and
/// non-empty text; the first offending line aborts the load.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Arc<Corpus>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut passages = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let passage: Passage = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        if passage.text.trim().is_empty() {
            return Err(CorpusError::EmptyText {
                id: passage.id,
                line: line_no,
            });
        }
        if index.contains_key(&passage.id) {
            return Err(CorpusError::DuplicateId {
                id: passage.id,
                line: line_no,
            });
        }
        index.insert(passage.id.clone(), passages.len());
        passages.push(passage);
    }
    Ok(Arc::new(Corpus { passages, index }))
}

/// Writes a corpus as JSONL in iteration order. `load_corpus` of the result
/// reproduces the corpus field-by-field.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for p in corpus.iter() {
        let line = serde_json::to_string(p).expect("passage serializes");
        writeln!(w, "{line}").map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    w.flush().map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn loads_valid_file_in_order() {
        let f = write_lines(&[
            r#"{"id":"a","title":"A","text":"alpha body"}"#,
            r#"{"id":"b","text":"beta body"}"#,
            r#"{"id":"c","title":"","text":"gamma body"}"#,
        ]);
        let c = load_corpus(f.path()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.passage(0).id, "a");
        assert_eq!(c.passage(1).id, "b");
        assert_eq!(c.passage(1).title, "");
        assert_eq!(c.passage(2).id, "c");
    }

    #[test]
    fn duplicate_id_names_line() {
        let f = write_lines(&[
            r#"{"id":"a","text":"one"}"#,
            r#"{"id":"a","text":"two"}"#,
        ]);
        let err = load_corpus(f.path()).unwrap_err();
        match err {
            CorpusError::DuplicateId { id, line } => {
                assert_eq!(id, "a");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_lines(&[r#"{"id":"a","text":"one"}"#, "not json"]);
        let err = load_corpus(f.path()).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }

    #[test]
    fn empty_text_rejected() {
        let f = write_lines(&[r#"{"id":"a","text":"   "}"#]);
        let err = load_corpus(f.path()).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText { line: 1, .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_corpus("/nonexistent/corpus.jsonl").unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }

    #[test]
    fn get_known_unknown_and_first_ordinal() {
        let f = write_lines(&[
            r#"{"id":"first","text":"one"}"#,
            r#"{"id":"second","text":"two"}"#,
        ]);
        let c = load_corpus(f.path()).unwrap();
        assert_eq!(c.get("second").unwrap().text, "two");
        assert!(matches!(c.get("nope"), Err(CorpusError::UnknownId(_))));
        assert_eq!(c.ordinal_of("first"), Some(0));
    }

    #[test]
    fn save_then_load_round_trips() {
        let f = write_lines(&[
            r#"{"id":"a","title":"T","text":"alpha"}"#,
            r#"{"id":"b","text":"beta"}"#,
        ]);
        let c1 = load_corpus(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_corpus(&c1, out.path()).unwrap();
        let c2 = load_corpus(out.path()).unwrap();
        assert_eq!(*c1, *c2);
    }
}
