use std::collections::HashSet;
use std::fmt::Write as _;

use super::{AnnotatedDocument, Sentence, Token};
use crate::error::{Error, Result};

const DOC_ID_PREFIX: &str = "# doc_id =";
const TEXT_PREFIX: &str = "# text =";

struct DocBuilder {
    doc_id: String,
    sentences: Vec<(Vec<Token>, Option<String>)>,
}

impl DocBuilder {
    fn finish(self) -> AnnotatedDocument {
        let mut source_text = String::new();
        let mut sentences = Vec::with_capacity(self.sentences.len());
        for (tokens, text) in self.sentences {
            let text = text.unwrap_or_else(|| tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" "));
            if !source_text.is_empty() {
                source_text.push(' ');
            }
            let start = source_text.len();
            source_text.push_str(&text);
            sentences.push(Sentence { tokens, char_span: (start, source_text.len()) });
        }
        AnnotatedDocument { doc_id: self.doc_id, sentences, source_text }
    }
}

/// Parses CoNLL-U text holding one or more documents, each introduced by a
/// `# doc_id = <id>` comment. Entities are read from `NER=<tag>` in MISC.
pub fn parse_conllu(text: &str) -> Result<Vec<AnnotatedDocument>> {
    let mut docs: Vec<AnnotatedDocument> = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<DocBuilder> = None;
    let mut tokens: Vec<Token> = Vec::new();
    let mut sent_text: Option<String> = None;
    let mut sent_start_line = 0;

    fn close_sentence(
        current: &mut Option<DocBuilder>,
        tokens: &mut Vec<Token>,
        sent_text: &mut Option<String>,
        line: usize,
    ) -> Result<()> {
        if tokens.is_empty() {
            *sent_text = None;
            return Ok(());
        }
        let sentence = Sentence { tokens: std::mem::take(tokens), char_span: (0, 0) };
        sentence.validate().map_err(|msg| Error::Parse { line, msg })?;
        let doc = current
            .as_mut()
            .ok_or_else(|| Error::Parse { line, msg: "sentence before any `# doc_id` header".into() })?;
        doc.sentences.push((sentence.tokens, sent_text.take()));
        Ok(())
    }

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            close_sentence(&mut current, &mut tokens, &mut sent_text, sent_start_line)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let comment = format!("#{rest}");
            if let Some(id) = comment.strip_prefix(DOC_ID_PREFIX) {
                close_sentence(&mut current, &mut tokens, &mut sent_text, sent_start_line)?;
                let id = id.trim().to_string();
                if id.is_empty() {
                    return Err(Error::Parse { line: lineno, msg: "empty doc_id".into() });
                }
                if !seen.insert(id.clone()) {
                    return Err(Error::Parse { line: lineno, msg: format!("duplicate doc_id `{id}`") });
                }
                if let Some(done) = current.take() {
                    docs.push(done.finish());
                }
                current = Some(DocBuilder { doc_id: id, sentences: Vec::new() });
            } else if let Some(t) = comment.strip_prefix(TEXT_PREFIX) {
                sent_text = Some(t.trim().to_string());
            }
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse { line: lineno, msg: format!("expected 10 tab-separated columns, found {}", cols.len()) });
        }
        // Multiword ranges and empty nodes are not tokens of the basic tree.
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| Error::Parse { line: lineno, msg: format!("non-integer token id `{}`", cols[0]) })?;
        if index == 0 {
            return Err(Error::Parse { line: lineno, msg: "token id must be >= 1".into() });
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::Parse { line: lineno, msg: format!("non-integer head `{}`", cols[6]) })?;
        if tokens.is_empty() {
            sent_start_line = lineno;
        }
        tokens.push(Token {
            index,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
            entity: ner_from_misc(cols[9]),
        });
    }
    close_sentence(&mut current, &mut tokens, &mut sent_text, sent_start_line)?;
    if let Some(done) = current.take() {
        docs.push(done.finish());
    }
    Ok(docs)
}

fn ner_from_misc(misc: &str) -> String {
    misc.split('|')
        .find_map(|kv| kv.strip_prefix("NER="))
        .map(str::to_string)
        .unwrap_or_else(|| "O".to_string())
}

/// Serialises documents with the same conventions `parse_conllu` reads.
/// XPOS, FEATS and DEPS are written as `_`; an `O` entity leaves MISC empty.
pub fn write_conllu(docs: &[AnnotatedDocument]) -> String {
    let mut out = String::new();
    for doc in docs {
        let _ = writeln!(out, "{DOC_ID_PREFIX} {}", doc.doc_id);
        for sent in &doc.sentences {
            if let Some(text) = doc.source_text.get(sent.char_span.0..sent.char_span.1) {
                if !text.is_empty() && !text.contains('\n') {
                    let _ = writeln!(out, "{TEXT_PREFIX} {text}");
                }
            }
            for t in &sent.tokens {
                let misc = if t.entity == "O" { "_".to_string() } else { format!("NER={}", t.entity) };
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t{}",
                    t.index, t.form, t.lemma, t.upos, t.head, t.deprel, misc
                );
            }
            out.push('\n');
        }
    }
    out
}
