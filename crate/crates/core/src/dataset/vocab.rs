use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::QAInstance;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<sos>", "<eos>", "<unk>"];

/// Token <-> id map with the four special tokens at ids 0..4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    ids: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocab {
    pub fn from_tokens<I: IntoIterator<Item = String>>(words: I) -> Result<Self> {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut ids: HashMap<String, usize> = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        for w in words {
            if ids.contains_key(&w) {
                return Err(Error::Data(format!("duplicate vocabulary entry `{w}`")));
            }
            ids.insert(w.clone(), tokens.len());
            tokens.push(w);
        }
        Ok(Self { ids, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Hex SHA-256 of the newline-joined token list.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.tokens.join("\n").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One token per line, in id order, specials included.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.tokens.join("\n") + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 4 || lines[..4] != SPECIALS {
            return Err(Error::Data(format!("{}: vocabulary must start with the special tokens", path.display())));
        }
        Self::from_tokens(lines[4..].iter().map(|s| s.to_string()))
    }
}

/// Frequency-ranked lower-cased tokens of passages and questions, ties
/// broken lexicographically, truncated to `max_size` including specials.
pub fn build_vocab(instances: &[QAInstance], max_size: usize) -> Vocab {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for inst in instances {
        for tok in inst.passage_tokens().into_iter().chain(inst.question_tokens()) {
            if !SPECIALS.contains(&tok.as_str()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size.saturating_sub(SPECIALS.len()));
    Vocab::from_tokens(ranked.into_iter().map(|(t, _)| t)).expect("counted tokens are unique")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(passage: &str) -> QAInstance {
        QAInstance::new("i", passage, "", "")
    }

    #[test]
    fn frequency_order() {
        let v = build_vocab(&[inst("a a b")], 100);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), Some(5));
        assert_eq!(v.id("<unk>"), Some(UNK));
    }

    #[test]
    fn ties_are_lexicographic() {
        let v = build_vocab(&[inst("y x")], 100);
        assert_eq!(v.id("x"), Some(4));
        assert_eq!(v.id("y"), Some(5));
    }

    #[test]
    fn truncation_keeps_specials() {
        let v = build_vocab(&[inst("a b c d e")], 6);
        assert_eq!(v.len(), 6);
        assert_eq!(v.token(4), Some("a"));
        assert_eq!(v.token(5), Some("b"));
    }

    #[test]
    fn save_load_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let v = build_vocab(&[inst("The cat sat on the mat.")], 100);
        let path = dir.path().join("vocab.txt");
        v.save(&path).unwrap();
        let back = Vocab::load(&path).unwrap();
        assert_eq!(v, back);
        assert_eq!(v.hash(), back.hash());
        assert_eq!(v.hash().len(), 64);
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.id(t), Some(i));
        }
    }
}
