use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnnotatedDocument;

/// Entity mentions grouped by canonical (lower-cased surface) string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityProfile {
    /// Canonical string -> `(sentence index, 1-based token index)` of each
    /// mention's first token.
    pub mentions: BTreeMap<String, Vec<(usize, usize)>>,
    pub total_mentions: usize,
}

impl EntityProfile {
    pub fn count(&self, entity: &str) -> usize {
        self.mentions.get(entity).map_or(0, Vec::len)
    }
}

/// Merges maximal `B-`/`I-` spans into mentions. An `I-` tag that does not
/// continue a span is ignored, so every mention starts at a `B-` tag.
pub fn entity_mentions(doc: &AnnotatedDocument) -> EntityProfile {
    let mut profile = EntityProfile::default();
    for (si, sent) in doc.sentences.iter().enumerate() {
        let mut open: Option<(usize, Vec<&str>)> = None;
        let flush = |open: &mut Option<(usize, Vec<&str>)>, profile: &mut EntityProfile| {
            if let Some((start, forms)) = open.take() {
                let key = forms.join(" ").to_lowercase();
                profile.mentions.entry(key).or_default().push((si, start));
                profile.total_mentions += 1;
            }
        };
        for tok in &sent.tokens {
            if tok.entity.starts_with("B-") || tok.entity == "B" {
                flush(&mut open, &mut profile);
                open = Some((tok.index, vec![tok.form.as_str()]));
            } else if tok.entity.starts_with("I-") || tok.entity == "I" {
                if let Some((_, forms)) = open.as_mut() {
                    forms.push(tok.form.as_str());
                }
            } else {
                flush(&mut open, &mut profile);
            }
        }
        flush(&mut open, &mut profile);
    }
    profile
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Sentence, Token};

    fn doc(sents: &[&[(&str, &str)]]) -> AnnotatedDocument {
        let sentences = sents
            .iter()
            .map(|toks| Sentence {
                tokens: toks
                    .iter()
                    .enumerate()
                    .map(|(i, (form, tag))| Token {
                        index: i + 1,
                        form: form.to_string(),
                        lemma: form.to_lowercase(),
                        upos: "PROPN".into(),
                        head: if i == 0 { 0 } else { 1 },
                        deprel: "dep".into(),
                        entity: tag.to_string(),
                    })
                    .collect(),
                char_span: (0, 0),
            })
            .collect();
        AnnotatedDocument { doc_id: "d".into(), sentences, source_text: String::new() }
    }

    #[test]
    fn counts_repeated_entities() {
        let d = doc(&[
            &[("Paris", "B-GPE"), ("is", "O"), ("in", "O"), ("France", "B-GPE")],
            &[("Paris", "B-GPE"), ("shines", "O")],
        ]);
        let p = entity_mentions(&d);
        assert_eq!(p.mentions["paris"], vec![(0, 1), (1, 1)]);
        assert_eq!(p.count("france"), 1);
        assert_eq!(p.total_mentions, 3);
    }

    #[test]
    fn entity_free_document() {
        let d = doc(&[&[("nothing", "O"), ("here", "O")]]);
        let p = entity_mentions(&d);
        assert_eq!(p.total_mentions, 0);
        assert!(p.mentions.is_empty());
    }

    #[test]
    fn bio_spans_merge() {
        let d = doc(&[&[("in", "O"), ("New", "B-LOC"), ("York", "I-LOC")]]);
        let p = entity_mentions(&d);
        assert_eq!(p.mentions.keys().collect::<Vec<_>>(), vec!["new york"]);
        assert_eq!(p.mentions["new york"], vec![(0, 2)]);
    }

    #[test]
    fn adjacent_b_tags_are_separate_mentions() {
        let d = doc(&[&[("Ada", "B-PER"), ("Bob", "B-PER"), ("x", "O"), ("Ghost", "I-PER")]]);
        let p = entity_mentions(&d);
        assert_eq!(p.total_mentions, 2);
        assert_eq!(p.count("ghost"), 0);
    }
}
