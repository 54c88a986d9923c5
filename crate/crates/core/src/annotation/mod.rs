//! Linguistically annotated text: the CoNLL-U reader/writer, a heuristic
//! fallback tokenizer, and the token-level counts the complexity features
//! are built from.

mod conllu;
mod entities;
mod fallback;
mod relations;
mod stopwords;
mod topic;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use conllu::{parse_conllu, write_conllu};
pub use entities::{entity_mentions, EntityProfile};
pub use fallback::{tokenize_fallback, tokenize_fallback_with_id};
pub use relations::{clause_count, mod_relation_count, CLAUSE_RELATIONS, MODIFIER_RELATIONS};
pub use stopwords::{is_stopword, STOPWORDS};
pub use topic::{content_vocab, is_content_token, unigram_topic, DEFAULT_TOPIC_ALPHA};

use crate::error::{Error, Result};

/// One annotated token. `index` is 1-based within its sentence and `head`
/// is 0 for the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub head: usize,
    pub deprel: String,
    /// BIO entity tag, `"O"` outside entities.
    pub entity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    /// Byte offsets `(start, end)` into the owning document's source text.
    pub char_span: (usize, usize),
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks index contiguity, head bounds, non-empty relations and the
    /// single-root rule.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.tokens.len();
        if n == 0 {
            return Err("sentence has no tokens".into());
        }
        let mut roots = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.index != i + 1 {
                return Err(format!("token index {} at position {} (expected {})", tok.index, i + 1, i + 1));
            }
            if tok.head > n {
                return Err(format!("head {} of token {} exceeds sentence length {n}", tok.head, tok.index));
            }
            if tok.deprel.is_empty() {
                return Err(format!("empty deprel on token {}", tok.index));
            }
            if tok.head == 0 {
                roots += 1;
            }
        }
        if roots != 1 {
            return Err(format!("expected exactly one root, found {roots}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
    pub source_text: String,
}

impl AnnotatedDocument {
    /// Total token count over all sentences.
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// All tokens in document order.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    /// Offset of each sentence's first token in the flattened token list.
    pub fn sentence_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.sentences
            .iter()
            .map(|s| {
                let start = acc;
                acc += s.len();
                start
            })
            .collect()
    }

    /// Flattened 0-based token position of `(sentence index, 1-based token index)`.
    pub fn flat_position(&self, sentence: usize, token_index: usize) -> usize {
        self.sentences[..sentence].iter().map(Sentence::len).sum::<usize>() + token_index - 1
    }
}

/// Annotations keyed by document id. Instance `id` maps to the documents
/// `<id>#passage` and `<id>#question`.
#[derive(Debug, Clone, Default)]
pub struct AnnotationIndex {
    docs: HashMap<String, AnnotatedDocument>,
}

impl AnnotationIndex {
    pub fn new(docs: impl IntoIterator<Item = AnnotatedDocument>) -> Result<Self> {
        let mut map = HashMap::new();
        for doc in docs {
            let id = doc.doc_id.clone();
            if map.insert(id.clone(), doc).is_some() {
                return Err(Error::Data(format!("duplicate doc_id `{id}`")));
            }
        }
        Ok(Self { docs: map })
    }

    pub fn insert(&mut self, doc: AnnotatedDocument) {
        self.docs.insert(doc.doc_id.clone(), doc);
    }

    pub fn get(&self, doc_id: &str) -> Option<&AnnotatedDocument> {
        self.docs.get(doc_id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn passage(&self, instance_id: &str) -> Result<&AnnotatedDocument> {
        let key = passage_doc_id(instance_id);
        self.docs.get(&key).ok_or_else(|| Error::Data(format!("missing annotation for document `{key}`")))
    }

    pub fn question(&self, instance_id: &str) -> Result<&AnnotatedDocument> {
        let key = question_doc_id(instance_id);
        self.docs.get(&key).ok_or_else(|| Error::Data(format!("missing annotation for document `{key}`")))
    }
}

pub fn passage_doc_id(instance_id: &str) -> String {
    format!("{instance_id}#passage")
}

pub fn question_doc_id(instance_id: &str) -> String {
    format!("{instance_id}#question")
}
