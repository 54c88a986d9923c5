use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Word vectors from a word2vec-style text file: a `count dim` header
/// line, then one `token v1 .. vdim` line per word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "empty vector file".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match fields.as_slice() {
            [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
                (Ok(c), Ok(d)) if d > 0 => (c, d),
                _ => return Err(Error::Parse { line: 1, msg: format!("header must be `count dim`, got `{header}`") }),
            },
            _ => return Err(Error::Parse { line: 1, msg: format!("header must be `count dim`, got `{header}`") }),
        };
        let mut vectors = HashMap::with_capacity(count);
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("line is not blank").to_string();
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number `{p}`") }))
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::Parse { line: i + 1, msg: format!("expected {dim} values, found {}", values.len()) });
            }
            vectors.insert(token, values);
        }
        if vectors.len() != count {
            log::warn!("vector file header announces {count} words but holds {}", vectors.len());
        }
        Ok(Self { dim, vectors })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// A resolved embedding source.
#[derive(Debug, Clone)]
pub enum Embedder {
    Internal { seed: u64 },
    File(WordVectors),
}

/// The internal table's vector for `token`: uniform in [-1, 1), drawn from
/// a stream keyed by the seed and the token text.
pub fn internal_token_vector(token: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(b"token-vector");
    hasher.update(seed.to_le_bytes());
    hasher.update(token.as_bytes());
    let mut key = [0u8; 32];
    key.copy_from_slice(&hasher.finalize());
    let mut rng = ChaCha8Rng::from_seed(key);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

impl Embedder {
    /// The `dim`-wide vector of one token. File vectors are truncated or
    /// zero-padded; unknown tokens give zeros.
    pub fn token_vector(&self, token: &str, dim: usize) -> Vec<f64> {
        match self {
            Embedder::Internal { seed } => internal_token_vector(token, dim, *seed),
            Embedder::File(wv) => {
                let mut v = vec![0.0; dim];
                if let Some(src) = wv.get(token) {
                    for (d, s) in v.iter_mut().zip(src) {
                        *d = *s;
                    }
                }
                v
            }
        }
    }

    /// Mean of the token vectors; an empty question embeds to zeros.
    pub fn embed(&self, tokens: &[String], dim: usize) -> Vec<f64> {
        let mut acc = vec![0.0; dim];
        for t in tokens {
            for (a, x) in acc.iter_mut().zip(self.token_vector(t, dim)) {
                *a += x;
            }
        }
        if !tokens.is_empty() {
            let n = tokens.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
        }
        acc
    }
}

/// One `dim`-wide bag-of-words vector per question.
pub fn embed_questions(questions: &[Vec<String>], dim: usize, embedder: &Embedder) -> Result<Vec<Vec<f64>>> {
    if questions.is_empty() {
        return Err(Error::Data("no questions to embed".into()));
    }
    Ok(questions.iter().map(|q| embedder.embed(q, dim)).collect())
}
