//! QA corpus ingestion, filtering, splitting, labelling and the model
//! vocabulary.

mod label;
mod loader;
mod split;
pub mod synthetic;
mod vocab;

use std::io::{BufRead, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use label::{label_corpus, FeatureRecord, LabelReport};
pub use loader::{load_qa_json, parse_qa_json, QaFormat};
pub use split::{split_dataset, DatasetSplit, SplitManifest};
pub use vocab::{build_vocab, Vocab, EOS, PAD, SOS, UNK};

use crate::error::{Error, Result};
use crate::estimator::ComplexityLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAInstance {
    pub id: String,
    pub passage: String,
    pub question: String,
    pub answer_text: String,
    /// Half-open range over [`text_tokens`] of the passage.
    pub answer_span: Option<(usize, usize)>,
    #[serde(default)]
    pub gold_complexity: Option<ComplexityLabel>,
    #[serde(default)]
    pub predicted_complexity: Option<ComplexityLabel>,
}

impl QAInstance {
    pub fn new(id: impl Into<String>, passage: impl Into<String>, question: impl Into<String>, answer: impl Into<String>) -> Self {
        let passage = passage.into();
        let answer_text = answer.into();
        let answer_span = locate_answer(&passage, &answer_text).map(|r| (r.start, r.end));
        Self {
            id: id.into(),
            passage,
            question: question.into(),
            answer_text,
            answer_span,
            gold_complexity: None,
            predicted_complexity: None,
        }
    }

    pub fn passage_tokens(&self) -> Vec<String> {
        model_tokens(&self.passage)
    }

    pub fn question_tokens(&self) -> Vec<String> {
        model_tokens(&self.question)
    }

    pub fn answer_tokens(&self) -> Vec<String> {
        model_tokens(&self.answer_text)
    }

    /// The label the generator trains on: the estimator's prediction when
    /// present, otherwise the gold label.
    pub fn training_label(&self) -> Option<ComplexityLabel> {
        self.predicted_complexity.or(self.gold_complexity)
    }
}

/// Whitespace tokens with leading and trailing punctuation split off, so
/// `"track?"` becomes `["track", "?"]` while `"6.213"` stays whole.
pub fn text_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut rest = word;
        let mut trailing = Vec::new();
        while let Some(c) = rest.chars().next().filter(|c| c.is_ascii_punctuation()) {
            if rest.len() == c.len_utf8() {
                break;
            }
            out.push(&rest[..c.len_utf8()]);
            rest = &rest[c.len_utf8()..];
        }
        while let Some(c) = rest.chars().next_back().filter(|c| c.is_ascii_punctuation()) {
            if rest.len() == c.len_utf8() {
                break;
            }
            let cut = rest.len() - c.len_utf8();
            trailing.push(&rest[cut..]);
            rest = &rest[..cut];
        }
        out.push(rest);
        out.extend(trailing.into_iter().rev());
    }
    out
}

/// Lower-cased [`text_tokens`]; the generator's view of text.
pub fn model_tokens(text: &str) -> Vec<String> {
    text_tokens(text).into_iter().map(str::to_lowercase).collect()
}

/// First occurrence of the answer's tokens as a contiguous run of passage
/// tokens, compared case-insensitively.
pub fn locate_answer(passage: &str, answer: &str) -> Option<Range<usize>> {
    let p = model_tokens(passage);
    let a = model_tokens(answer);
    if a.is_empty() || a.len() > p.len() {
        return None;
    }
    (0..=p.len() - a.len()).find(|&i| p[i..i + a.len()] == a[..]).map(|i| i..i + a.len())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::json(path.display().to_string(), e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e))?);
    }
    Ok(out)
}

/// Keeps instances whose answer is a contiguous token run of the passage,
/// refreshing their spans. Returns the survivors and the number removed.
pub fn filter_answerable(instances: Vec<QAInstance>) -> (Vec<QAInstance>, usize) {
    let before = instances.len();
    let kept: Vec<QAInstance> = instances
        .into_iter()
        .filter_map(|mut inst| {
            let span = locate_answer(&inst.passage, &inst.answer_text)?;
            inst.answer_span = Some((span.start, span.end));
            Some(inst)
        })
        .collect();
    let removed = before - kept.len();
    if removed > 0 {
        log::info!("filter_answerable: removed {removed} of {before} instances");
    }
    (kept, removed)
}
