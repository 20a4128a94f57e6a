//! Answer generation from retrieved passages, and answer judging.
//!
//! Generation renders an instruction, the retrieved passages (numbered, in
//! retrieval order), and the question, and returns the completion verbatim.
//! Two judges: an LLM judge that compares predicted and gold answers with a
//! one-word verdict, and an offline exact judge for synthetic corpora. Both
//! fail closed — anything unparseable counts as incorrect, so accuracy is
//! never inflated by judge noise.

use crate::corpus::Passage;
use crate::llm::{ChatClient, ChatMessage, ChatRequest, LlmError};
use serde::{Deserialize, Serialize};

pub const ANSWER_SYSTEM_TEMPLATE: &str = include_str!("../templates/answer_system.txt");
pub const JUDGE_SYSTEM_TEMPLATE: &str = include_str!("../templates/judge_system.txt");

/// Character budget for the rendered passage block; earliest-retrieved
/// passages are kept when the block would overflow.
pub const DEFAULT_ANSWER_CHAR_BUDGET: usize = 16_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

/// One answered question, shaped for line-delimited output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: String,
    pub question: String,
    pub retrieved: Vec<String>,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

/// Options for [`generate_answer_with`]; the defaults match
/// [`generate_answer`].
#[derive(Debug, Clone)]
pub struct AnswerOptions {
    pub system_template: String,
    pub char_budget: usize,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for AnswerOptions {
    fn default() -> Self {
        AnswerOptions {
            system_template: ANSWER_SYSTEM_TEMPLATE.to_string(),
            char_budget: DEFAULT_ANSWER_CHAR_BUDGET,
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

/// Renders the numbered passage block, keeping earliest-retrieved passages
/// and dropping from the tail once the character budget is reached.
fn render_passages(passages: &[&Passage], char_budget: usize) -> String {
    let mut block = String::new();
    for (i, p) in passages.iter().enumerate() {
        let line = if p.title.is_empty() {
            format!("{}. {}\n", i + 1, p.text)
        } else {
            format!("{}. {}: {}\n", i + 1, p.title, p.text)
        };
        if block.chars().count() + line.chars().count() > char_budget {
            break;
        }
        block.push_str(&line);
    }
    block
}

fn render_answer_user(question: &str, passages: &[&Passage], char_budget: usize) -> String {
    format!(
        "Passages:\n{}\nQuestion: {}\nAnswer:",
        render_passages(passages, char_budget),
        question
    )
}

/// Asks the model to answer `question` from `passages` (retrieval order);
/// returns the completion text verbatim.
pub fn generate_answer(
    client: &ChatClient,
    question: &str,
    passages: &[&Passage],
) -> Result<String, LlmError> {
    generate_answer_with(client, question, passages, &AnswerOptions::default())
}

pub fn generate_answer_with(
    client: &ChatClient,
    question: &str,
    passages: &[&Passage],
    options: &AnswerOptions,
) -> Result<String, LlmError> {
    assert!(!passages.is_empty(), "answer generation needs passages");
    let request = ChatRequest {
        messages: vec![
            ChatMessage::system(options.system_template.clone()),
            ChatMessage::user(render_answer_user(question, passages, options.char_budget)),
        ],
        temperature: options.temperature,
        top_p: 1.0,
        max_tokens: options.max_tokens,
    };
    Ok(client.complete(&request)?.text)
}

/// Maps a raw judge reply to a verdict: the first alphabetic word must be
/// "correct" or "yes" (case-insensitive); everything else — including
/// "incorrect", which merely contains "correct" — fails closed.
pub fn parse_verdict(raw: &str) -> Verdict {
    let first_word: String = raw
        .trim()
        .chars()
        .skip_while(|c| !c.is_alphabetic())
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    if first_word == "correct" || first_word == "yes" {
        Verdict::Correct
    } else {
        Verdict::Incorrect
    }
}

/// Asks the judge model whether `predicted` answers `question` the same way
/// `gold` does.
pub fn judge_llm(
    client: &ChatClient,
    question: &str,
    predicted: &str,
    gold: &str,
) -> Result<Verdict, LlmError> {
    let request = ChatRequest {
        messages: vec![
            ChatMessage::system(JUDGE_SYSTEM_TEMPLATE.to_string()),
            ChatMessage::user(format!(
                "Question: {question}\nGold answer: {gold}\nPredicted answer: {predicted}\nVerdict:"
            )),
        ],
        temperature: 0.0,
        top_p: 1.0,
        max_tokens: 8,
    };
    Ok(parse_verdict(&client.complete(&request)?.text))
}

/// Normalizes both strings (lowercase, punctuation stripped, whitespace
/// collapsed) and compares for equality.
pub fn judge_exact(predicted: &str, gold: &str) -> Verdict {
    if normalize(predicted) == normalize(gold) {
        Verdict::Correct
    } else {
        Verdict::Incorrect
    }
}

fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            out.extend(ch.to_lowercase());
        } else if ch.is_whitespace() {
            out.push(' ');
        }
        // punctuation vanishes: "Arthur's" == "arthurs"
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}
