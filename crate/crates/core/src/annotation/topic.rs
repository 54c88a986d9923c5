use std::collections::{BTreeSet, HashMap};

use super::{is_stopword, AnnotatedDocument, Sentence, Token};

pub const DEFAULT_TOPIC_ALPHA: f64 = 0.01;

/// A token counts toward topics unless it is punctuation (by UPOS, or by
/// having no alphanumeric character at all) or its lemma is a stopword.
pub fn is_content_token(tok: &Token) -> bool {
    if tok.upos == "PUNCT" || !tok.form.chars().any(char::is_alphanumeric) {
        return false;
    }
    !is_stopword(&tok.lemma.to_lowercase())
}

/// Sorted, de-duplicated lower-cased content lemmas of a document.
pub fn content_vocab(doc: &AnnotatedDocument) -> Vec<String> {
    let set: BTreeSet<String> = doc.tokens().filter(|t| is_content_token(t)).map(|t| t.lemma.to_lowercase()).collect();
    set.into_iter().collect()
}

/// Additively smoothed unigram distribution of a sentence's content lemmas
/// over `vocab`. Lemmas outside `vocab` are ignored.
pub fn unigram_topic(sentence: &Sentence, vocab: &[String], alpha: f64) -> Vec<f64> {
    let v = vocab.len();
    if v == 0 {
        return Vec::new();
    }
    let position: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut counts = vec![0.0; v];
    let mut total = 0.0;
    for tok in sentence.tokens.iter().filter(|t| is_content_token(t)) {
        if let Some(&i) = position.get(tok.lemma.to_lowercase().as_str()) {
            counts[i] += 1.0;
            total += 1.0;
        }
    }
    if total == 0.0 {
        return vec![1.0 / v as f64; v];
    }
    let denom = total + alpha * v as f64;
    counts.into_iter().map(|c| (c + alpha) / denom).collect()
}
