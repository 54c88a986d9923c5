use super::{AnnotatedDocument, Sentence, Token};
use crate::error::{Error, Result};

/// Heuristic annotation for text without parser output.
///
/// Sentences end at `.`, `?` or `!` followed by whitespace (or end of text).
/// Tokens are maximal alphanumeric runs, with every other non-space
/// character standing alone. Every token gets `upos = X`, `deprel = dep`;
/// the first token is the root and all others attach to it. Runs of
/// capitalised tokens that do not start the sentence are tagged as one
/// `ENT` entity.
pub fn tokenize_fallback(raw: &str) -> Result<AnnotatedDocument> {
    tokenize_fallback_with_id("fallback", raw)
}

pub fn tokenize_fallback_with_id(doc_id: &str, raw: &str) -> Result<AnnotatedDocument> {
    if raw.trim().is_empty() {
        return Err(Error::Invalid("fallback tokenizer needs non-empty text".into()));
    }
    let mut sentences = Vec::new();
    for (start, end) in sentence_spans(raw) {
        let forms = split_tokens(&raw[start..end]);
        if forms.is_empty() {
            continue;
        }
        let mut tokens: Vec<Token> = forms
            .iter()
            .enumerate()
            .map(|(i, form)| Token {
                index: i + 1,
                form: form.to_string(),
                lemma: form.to_lowercase(),
                upos: "X".into(),
                head: if i == 0 { 0 } else { 1 },
                deprel: "dep".into(),
                entity: "O".into(),
            })
            .collect();
        tag_capitalised_runs(&mut tokens);
        sentences.push(Sentence { tokens, char_span: (start, end) });
    }
    Ok(AnnotatedDocument { doc_id: doc_id.to_string(), sentences, source_text: raw.to_string() })
}

fn sentence_spans(raw: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut iter = raw.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if start.is_none() && !c.is_whitespace() {
            start = Some(i);
        }
        let boundary = matches!(c, '.' | '?' | '!') && iter.peek().is_none_or(|(_, n)| n.is_whitespace());
        if boundary {
            if let Some(s) = start.take() {
                spans.push((s, i + c.len_utf8()));
            }
        }
    }
    if let Some(s) = start {
        let end = raw.trim_end().len();
        if end > s {
            spans.push((s, end));
        }
    }
    spans
}

/// Alphanumeric runs, with each other visible character as its own token.
fn split_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(i);
            }
            continue;
        }
        if let Some(s) = run_start.take() {
            out.push(&text[s..i]);
        }
        if !c.is_whitespace() {
            out.push(&text[i..i + c.len_utf8()]);
        }
    }
    if let Some(s) = run_start {
        out.push(&text[s..]);
    }
    out
}

fn is_capitalised(form: &str) -> bool {
    form.chars().next().is_some_and(char::is_uppercase)
}

fn tag_capitalised_runs(tokens: &mut [Token]) {
    let mut in_run = false;
    for (i, tok) in tokens.iter_mut().enumerate() {
        if i > 0 && is_capitalised(&tok.form) {
            tok.entity = if in_run { "I-ENT" } else { "B-ENT" }.into();
            in_run = true;
        } else {
            in_run = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::entity_mentions;

    #[test]
    fn two_sentences_with_final_periods() {
        let doc = tokenize_fallback("The cat sat. It slept.").unwrap();
        let lens: Vec<usize> = doc.sentences.iter().map(|s| s.len()).collect();
        assert_eq!(lens, vec![4, 3]);
        assert_eq!(doc.sentences[0].tokens[3].form, ".");
        for s in &doc.sentences {
            s.validate().unwrap();
        }
        assert_eq!(&doc.source_text[doc.sentences[1].char_span.0..doc.sentences[1].char_span.1], "It slept.");
    }

    #[test]
    fn capitalised_run_is_one_entity() {
        let doc = tokenize_fallback("He met Ada Lovelace today.").unwrap();
        let profile = entity_mentions(&doc);
        assert_eq!(profile.mentions.len(), 1);
        assert!(profile.mentions.contains_key("ada lovelace"));
        assert_eq!(profile.total_mentions, 1);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(tokenize_fallback("").is_err());
        assert!(tokenize_fallback("   \n").is_err());
    }

    #[test]
    fn decimals_do_not_end_sentences() {
        let doc = tokenize_fallback("The 6.213 km track. Done").unwrap();
        assert_eq!(doc.sentences.len(), 2);
        let forms: Vec<&str> = doc.sentences[0].tokens.iter().map(|t| t.form.as_str()).collect();
        assert_eq!(forms, ["The", "6", ".", "213", "km", "track", "."]);
    }
}
