//! Deterministic synthetic multi-hop corpora, plus the follow-up-question
//! dataset pipeline over HotpotQA-format records.
//!
//! The generator emits templated passages whose golden chains are lexically
//! linked: consecutive passages in a chain share several tokens (the bridge
//! entity plus template words), so hash-embedding kNN graphs contain the
//! golden edges at modest `k_edges`. Bridge questions name a pooled relation
//! shared by many second-hop passages, which makes the second hop hard to
//! reach with seeds alone — retrieval has to traverse. Every draw comes from
//! one seeded RNG, so equal specs produce byte-identical bundles.

use crate::agent::{parse_decision, AgentDecision, OracleKnowledge, AGENT_SYSTEM_TEMPLATE};
use crate::corpus::{Corpus, Passage};
use crate::eval::{GoldenRecord, QuestionType};
use crate::llm::{ChatClient, ChatMessage, ChatRequest};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const PROPORTION_BRIDGE: f64 = 0.595;
pub const PROPORTION_COMPARISON: f64 = 0.26;
pub const PROPORTION_SINGLE: f64 = 0.145;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("{kind} vocabulary too small: need {needed}, have {available}")]
    VocabTooSmall {
        kind: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("empty input")]
    EmptyInput,
    #[error("split ratios must be nonnegative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("io on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Shape of a generated bundle. `entity_vocab`/`attribute_vocab` bound the
/// pseudo-word pools; question passages allocate words first and distractors
/// draw from the unused remainder, so distractors never repeat a question's
/// entities, relations, or answers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub bridge: usize,
    pub comparison: usize,
    pub single: usize,
    pub distractors_per_question: usize,
    pub entity_vocab: usize,
    pub attribute_vocab: usize,
    /// Lexical-link guarantee: consecutive chain passages must share at
    /// least this many distinct tokens.
    pub min_shared_tokens: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            bridge: 2,
            comparison: 1,
            single: 1,
            distractors_per_question: 5,
            entity_vocab: 4000,
            attribute_vocab: 4000,
            min_shared_tokens: 3,
        }
    }
}

impl SynthSpec {
    /// Splits a question total by the default type proportions; realized
    /// counts stay within one question of exact per type.
    pub fn from_total(total: usize, seed: u64) -> Self {
        let bridge = (total as f64 * PROPORTION_BRIDGE).round() as usize;
        let comparison = (total as f64 * PROPORTION_COMPARISON).round() as usize;
        let comparison = comparison.min(total - bridge.min(total));
        let bridge = bridge.min(total);
        SynthSpec {
            seed,
            bridge,
            comparison,
            single: total - bridge - comparison,
            ..SynthSpec::default()
        }
    }

    pub fn question_count(&self) -> usize {
        self.bridge + self.comparison + self.single
    }

    pub fn passage_count(&self) -> usize {
        2 * self.bridge
            + 2 * self.comparison
            + self.single
            + self.distractors_per_question * self.question_count()
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.question_count() == 0 {
            return Err(SynthError::InvalidSpec(
                "at least one question is required".into(),
            ));
        }
        if self.min_shared_tokens > 4 {
            // templates guarantee 4 shared tokens on bridge hops; a larger
            // demand could never be reported as satisfied
            return Err(SynthError::InvalidSpec(format!(
                "min_shared_tokens {} exceeds what the templates provide (4)",
                self.min_shared_tokens
            )));
        }
        Ok(())
    }
}

/// Per-chain lexical-link audit: distinct-token overlap of each consecutive
/// passage pair, and whether every overlap meets the `min_shared_tokens` floor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink {
    pub question_id: String,
    pub shared_counts: Vec<usize>,
    pub linked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub min_shared_tokens: usize,
    pub chains: Vec<ChainLink>,
    pub all_linked: bool,
}

/// A generated corpus with its questions, the oracle's answer key, and the
/// lexical-link audit consumed by end-to-end guarantees.
#[derive(Debug)]
pub struct SynthBundle {
    pub corpus: Arc<Corpus>,
    pub goldens: Vec<GoldenRecord>,
    pub knowledge: OracleKnowledge,
    pub report: ConstructionReport,
}

const CONSONANTS: &[u8] = b"bcdfghjklmnpqrstvwz";
const VOWELS: &[u8] = b"aeiou";

/// Pseudo-word from consonant-vowel syllables: always lowercase letters, so
/// each word is exactly one token.
fn syllable_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    let mut w = String::with_capacity(syllables * 2);
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    w
}

fn fresh_words(rng: &mut ChaCha8Rng, n: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut words = Vec::with_capacity(n);
    let mut syllables = 3;
    let mut attempts = 0usize;
    while words.len() < n {
        let w = syllable_word(rng, syllables);
        if taken.insert(w.clone()) {
            words.push(w);
            attempts = 0;
        } else {
            attempts += 1;
            if attempts > 200 {
                // pool nearly saturated at this length; longer words keep
                // generation bounded without sacrificing determinism
                syllables += 1;
                attempts = 0;
            }
        }
    }
    words
}

fn shared_distinct_tokens(a: &str, b: &str) -> usize {
    let ta: HashSet<String> = crate::lexical::tokenize(a).into_iter().collect();
    let tb: HashSet<String> = crate::lexical::tokenize(b).into_iter().collect();
    ta.intersection(&tb).count()
}

struct Allocator {
    words: Vec<String>,
    next: usize,
    kind: &'static str,
}

impl Allocator {
    fn take(&mut self) -> Result<String, SynthError> {
        let w = self
            .words
            .get(self.next)
            .ok_or(SynthError::VocabTooSmall {
                kind: self.kind,
                needed: self.next + 1,
                available: self.words.len(),
            })?
            .clone();
        self.next += 1;
        Ok(w)
    }

    /// Words never handed out to question passages; distractors sample here.
    fn remainder(&self) -> &[String] {
        &self.words[self.next..]
    }
}

/// Builds the templated corpus: bridge chains (two passages linked by a
/// bridge entity), comparison pairs (two parallel attribute passages),
/// single-hop facts, then distractors over leftover vocabulary. Passage
/// order is fixed — question passages first, distractors last — so ordinal
/// tie-breaks in retrieval favor question passages deterministically.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthBundle, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken = HashSet::new();
    let mut entities = Allocator {
        words: fresh_words(&mut rng, spec.entity_vocab, &mut taken),
        next: 0,
        kind: "entity",
    };
    let mut attributes = Allocator {
        words: fresh_words(&mut rng, spec.attribute_vocab, &mut taken),
        next: 0,
        kind: "attribute",
    };

    // Second-hop relations are pooled across bridge questions: many second
    // passages share the relation the question names, so the true second hop
    // ties with a large cohort under seed ranking and must be reached
    // through the graph instead.
    let rel2_pool_size = (spec.bridge / 40).max(1);
    let rel2_pool: Vec<String> = (0..rel2_pool_size)
        .map(|_| attributes.take())
        .collect::<Result<_, _>>()?;

    let mut passages: Vec<Passage> = Vec::with_capacity(spec.passage_count());
    let mut goldens: Vec<GoldenRecord> = Vec::with_capacity(spec.question_count());
    let mut chains: Vec<(String, Vec<usize>)> = Vec::new(); // question_id -> passage ordinals

    let push = |passages: &mut Vec<Passage>, id: String, text: String| -> usize {
        passages.push(Passage {
            id,
            title: String::new(),
            text,
        });
        passages.len() - 1
    };

    for i in 0..spec.bridge {
        let e = entities.take()?;
        let b = entities.take()?;
        let a = entities.take()?;
        let rel1 = attributes.take()?;
        let rel2 = rel2_pool[rng.gen_range(0..rel2_pool.len())].clone();
        let qid = format!("bridge-{i:04}");
        let p1 = push(
            &mut passages,
            format!("{qid}-p1"),
            format!("The {rel1} of {e} is {b}."),
        );
        let p2 = push(
            &mut passages,
            format!("{qid}-p2"),
            format!("The {rel2} of {b} is {a}."),
        );
        goldens.push(GoldenRecord {
            question_id: qid.clone(),
            question: format!("What is the {rel2} of the {rel1} of {e}?"),
            answer: a,
            golden_ids: vec![passages[p1].id.clone(), passages[p2].id.clone()],
            question_type: QuestionType::Bridge,
        });
        chains.push((qid, vec![p1, p2]));
    }

    let mut used_values: HashSet<u32> = HashSet::new();
    for i in 0..spec.comparison {
        let x = entities.take()?;
        let y = entities.take()?;
        let crel = attributes.take()?;
        // globally unique magnitudes: pairs from different questions must not
        // share a number token, or they would rival the golden pair's overlap
        let mut draw = || loop {
            let v = rng.gen_range(10u32..100_000);
            if used_values.insert(v) {
                return v;
            }
        };
        let (vx, vy) = (draw(), draw());
        let qid = format!("comparison-{i:04}");
        let px = push(
            &mut passages,
            format!("{qid}-x"),
            format!("The {crel} of {x} is {vx} units."),
        );
        let py = push(
            &mut passages,
            format!("{qid}-y"),
            format!("The {crel} of {y} is {vy} units."),
        );
        goldens.push(GoldenRecord {
            question_id: qid.clone(),
            question: format!("Which has the larger {crel}: {x} or {y}?"),
            answer: if vx > vy { x } else { y },
            golden_ids: vec![passages[px].id.clone(), passages[py].id.clone()],
            question_type: QuestionType::Comparison,
        });
        chains.push((qid, vec![px, py]));
    }

    for i in 0..spec.single {
        let s = entities.take()?;
        let v = entities.take()?;
        let srel = attributes.take()?;
        let qid = format!("single-{i:04}");
        let ps = push(
            &mut passages,
            format!("{qid}-p"),
            format!("The {srel} of {s} is {v}."),
        );
        goldens.push(GoldenRecord {
            question_id: qid.clone(),
            question: format!("What is the {srel} of {s}?"),
            answer: v,
            golden_ids: vec![passages[ps].id.clone()],
            question_type: QuestionType::Single,
        });
        chains.push((qid, vec![ps]));
    }

    let distractor_count = spec.distractors_per_question * spec.question_count();
    if distractor_count > 0 {
        if entities.remainder().is_empty() {
            return Err(SynthError::VocabTooSmall {
                kind: "entity",
                needed: entities.next + 1,
                available: entities.words.len(),
            });
        }
        if attributes.remainder().is_empty() {
            return Err(SynthError::VocabTooSmall {
                kind: "attribute",
                needed: attributes.next + 1,
                available: attributes.words.len(),
            });
        }
        for d in 0..distractor_count {
            let drel = attributes.remainder()[rng.gen_range(0..attributes.remainder().len())]
                .clone();
            let dent = entities.remainder()[rng.gen_range(0..entities.remainder().len())].clone();
            let dval = entities.remainder()[rng.gen_range(0..entities.remainder().len())].clone();
            push(
                &mut passages,
                format!("distractor-{d:05}"),
                format!("The {drel} of {dent} is {dval}."),
            );
        }
    }

    let report_chains: Vec<ChainLink> = chains
        .iter()
        .map(|(qid, ords)| {
            let shared_counts: Vec<usize> = ords
                .windows(2)
                .map(|w| shared_distinct_tokens(&passages[w[0]].text, &passages[w[1]].text))
                .collect();
            let linked = shared_counts.iter().all(|&c| c >= spec.min_shared_tokens);
            ChainLink {
                question_id: qid.clone(),
                shared_counts,
                linked,
            }
        })
        .collect();
    let report = ConstructionReport {
        min_shared_tokens: spec.min_shared_tokens,
        all_linked: report_chains.iter().all(|c| c.linked),
        chains: report_chains,
    };

    let corpus = Arc::new(
        Corpus::from_passages(passages)
            .map_err(|e| SynthError::InvalidSpec(format!("generated corpus invalid: {e}")))?,
    );
    let knowledge = OracleKnowledge::new(
        &corpus,
        goldens
            .iter()
            .map(|g| (g.question.clone(), g.golden_ids.clone())),
    )
    .map_err(|e| SynthError::InvalidSpec(format!("generated answer key invalid: {e}")))?;

    Ok(SynthBundle {
        corpus,
        goldens,
        knowledge,
        report,
    })
}

/// One follow-up training/benchmark sample: a question, the passage the
/// asker already has, and the gold move — a follow-up question, or the
/// literal "NA" when the given passage already suffices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowUpSample {
    pub question: String,
    pub given: String,
    pub target: String,
}

/// HotpotQA-shaped input record: a question with its typed, ordered
/// supporting passages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HotpotRecord {
    pub id: String,
    pub question: String,
    #[serde(rename = "type")]
    pub question_type: String,
    pub answer: String,
    /// Supporting passages in reasoning order.
    pub supporting: Vec<SupportingPassage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportingPassage {
    pub title: String,
    pub text: String,
}

/// How follow-up targets are produced: reconstructed from the dropped
/// passage text (offline, exact) or asked of a chat model.
pub enum FollowUpMode<'a> {
    Oracle,
    Llm(&'a ChatClient),
}

#[derive(Debug, Clone, Serialize)]
pub struct FollowUpBuild {
    pub samples: Vec<FollowUpSample>,
    pub skipped_malformed: usize,
    pub skipped_client: usize,
}

fn llm_follow_up(
    client: &ChatClient,
    question: &str,
    given: &SupportingPassage,
) -> Result<Option<String>, crate::llm::LlmError> {
    let given_line = if given.title.is_empty() {
        given.text.clone()
    } else {
        format!("{}: {}", given.title, given.text)
    };
    let request = ChatRequest::for_traversal(vec![
        ChatMessage::system(AGENT_SYSTEM_TEMPLATE),
        ChatMessage::user(format!(
            "Question: {question}\nGiven: {given_line}\nFollow-up question:"
        )),
    ]);
    let response = client.complete(&request)?;
    Ok(match parse_decision(&response.text) {
        AgentDecision::FollowUp(q) => Some(q),
        AgentDecision::Stop => None,
    })
}

/// Turns HotpotQA-format records into follow-up samples: single-hop
/// questions target "NA"; bridge questions keep the first passage and ask
/// for the second; comparison questions drop one of the pair at random.
/// Records are sampled without replacement up to `budget`; malformed records
/// and client failures are skipped and counted, never fatal.
pub fn build_followupqa(
    records: &[HotpotRecord],
    mode: FollowUpMode,
    budget: usize,
    seed: u64,
) -> FollowUpBuild {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut rng);
    order.truncate(budget);

    let mut build = FollowUpBuild {
        samples: Vec::new(),
        skipped_malformed: 0,
        skipped_client: 0,
    };
    for idx in order {
        let record = &records[idx];
        let (given, dropped) = match (record.question_type.as_str(), record.supporting.len()) {
            ("single", 1) => (&record.supporting[0], None),
            ("bridge", 2) => (&record.supporting[0], Some(&record.supporting[1])),
            ("comparison", 2) => {
                let drop = rng.gen_range(0..2usize);
                (&record.supporting[1 - drop], Some(&record.supporting[drop]))
            }
            _ => {
                build.skipped_malformed += 1;
                continue;
            }
        };
        let target = match (&dropped, &mode) {
            (None, _) => "NA".to_string(),
            (Some(dropped), FollowUpMode::Oracle) => dropped.text.clone(),
            (Some(_), FollowUpMode::Llm(client)) => {
                match llm_follow_up(client, &record.question, given) {
                    Ok(Some(q)) => q,
                    // a stop here contradicts the known missing evidence, so
                    // the sample is unusable rather than an "NA" gold
                    Ok(None) | Err(_) => {
                        build.skipped_client += 1;
                        continue;
                    }
                }
            }
        };
        build.samples.push(FollowUpSample {
            question: record.question.clone(),
            given: given.text.clone(),
            target,
        });
    }
    build
}

/// Train/validation/test partition produced by [`split_dataset`].
pub type DatasetSplit<T> = (Vec<T>, Vec<T>, Vec<T>);

/// Seeded shuffle, then contiguous cuts at the rounded ratio boundaries;
/// realized sizes differ from exact ratios by less than one sample.
pub fn split_dataset<T: Clone>(
    samples: &[T],
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit<T>, SynthError> {
    if samples.is_empty() {
        return Err(SynthError::EmptyInput);
    }
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(SynthError::InvalidRatios(ratios));
    }
    let mut shuffled: Vec<T> = samples.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len();
    let cut1 = ((ratios[0] * n as f64).round() as usize).min(n);
    let cut2 = (((ratios[0] + ratios[1]) * n as f64).round() as usize).clamp(cut1, n);
    let test = shuffled.split_off(cut2);
    let val = shuffled.split_off(cut1);
    Ok((shuffled, val, test))
}

pub fn load_hotpot_records(path: &Path) -> Result<Vec<HotpotRecord>, SynthError> {
    read_jsonl(path)
}

pub fn load_samples(path: &Path) -> Result<Vec<FollowUpSample>, SynthError> {
    read_jsonl(path)
}

pub fn save_samples(samples: &[FollowUpSample], path: &Path) -> Result<(), SynthError> {
    write_jsonl(samples, path)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, SynthError> {
    let file = std::fs::File::open(path).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| SynthError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SynthError::Malformed {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), SynthError> {
    let io_err = |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| SynthError::Malformed {
            line: 0,
            reason: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
