use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::js_divergence;
use crate::annotation::{
    clause_count, content_vocab, entity_mentions, mod_relation_count, unigram_topic, AnnotatedDocument,
    AnnotationIndex, DEFAULT_TOPIC_ALPHA,
};
use crate::dataset::QAInstance;
use crate::error::{Error, Result};

/// Floor on the mean sentence divergence before inversion.
pub const F3_FLOOR: f64 = 1e-6;

/// Raw (unnormalised) complexity features of one question.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityFeatures {
    /// Clause count of the question.
    pub f1: f64,
    /// Modifier-relation count of the question.
    pub f2: f64,
    /// Passage topic feature (see [`F3Mode`]).
    pub f3: f64,
    /// Inverse relative frequency of question entities in the passage.
    pub f4: f64,
    /// Mean token gap between question entities and the answer span.
    pub f5: f64,
}

impl ComplexityFeatures {
    pub fn to_array(&self) -> [f64; 5] {
        [self.f1, self.f2, self.f3, self.f4, self.f5]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { f1: a[0], f2: a[1], f3: a[2], f4: a[3], f5: a[4] }
    }
}

/// How the passage divergence becomes the third feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F3Mode {
    /// `1 / max(mean JS, 1e-6)`: coherent passages score high.
    #[default]
    Inverse,
    /// The mean JS divergence itself: incoherent passages score high.
    Direct,
}

impl std::str::FromStr for F3Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(F3Mode::Inverse),
            "direct" => Ok(F3Mode::Direct),
            other => Err(Error::Config(format!("f3_mode must be inverse|direct, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureOptions {
    pub alpha: f64,
    pub f3_mode: F3Mode,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { alpha: DEFAULT_TOPIC_ALPHA, f3_mode: F3Mode::Inverse }
    }
}

/// Mean pairwise JS divergence between sentence topic vectors, turned into
/// a feature according to `mode`. Passages with fewer than two sentences
/// count as maximally coherent.
pub fn feature_topic_coherence(passage: &AnnotatedDocument, alpha: f64, mode: F3Mode) -> Result<f64> {
    let n = passage.sentences.len();
    let vocab = content_vocab(passage);
    let mean_js = if n < 2 || vocab.is_empty() {
        0.0
    } else {
        let topics: Vec<Vec<f64>> = passage.sentences.iter().map(|s| unigram_topic(s, &vocab, alpha)).collect();
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += js_divergence(&topics[i], &topics[j])?;
                }
            }
        }
        sum / (n * (n - 1)) as f64
    };
    Ok(match mode {
        F3Mode::Inverse => 1.0 / mean_js.max(F3_FLOOR),
        F3Mode::Direct => mean_js,
    })
}

/// Inverse of the mean relative passage frequency of the question entities
/// that also occur in the passage.
pub fn feature_entity_frequency(question: &AnnotatedDocument, passage: &AnnotatedDocument) -> f64 {
    let q = entity_mentions(question);
    let p = entity_mentions(passage);
    let total = p.total_mentions as f64;
    if p.total_mentions == 0 {
        return 1.0;
    }
    let shared: Vec<f64> =
        q.mentions.keys().map(|e| p.count(e) as f64).filter(|&n| n > 0.0).collect();
    if shared.is_empty() {
        return total + 1.0;
    }
    let avg = shared.iter().map(|n| n / total).sum::<f64>() / shared.len() as f64;
    1.0 / avg
}

/// Mean over question entities found in the passage of the smallest token
/// gap between a mention start and the answer span. Falls back to the
/// passage length when no question entity occurs in the passage.
pub fn feature_entity_answer_distance(
    question: &AnnotatedDocument,
    passage: &AnnotatedDocument,
    answer_span: Range<usize>,
) -> Result<f64> {
    let n_tokens = passage.token_count();
    if answer_span.start >= answer_span.end || answer_span.end > n_tokens {
        return Err(Error::Invalid(format!(
            "answer span {}..{} is not a valid range over {n_tokens} passage tokens",
            answer_span.start, answer_span.end
        )));
    }
    let q = entity_mentions(question);
    let p = entity_mentions(passage);
    let offsets = passage.sentence_offsets();
    let gap = |pos: usize| -> usize {
        if answer_span.contains(&pos) {
            0
        } else if pos < answer_span.start {
            answer_span.start - pos - 1
        } else {
            pos - answer_span.end
        }
    };
    let minima: Vec<f64> = q
        .mentions
        .keys()
        .filter_map(|e| p.mentions.get(e))
        .map(|occ| occ.iter().map(|&(s, t)| gap(offsets[s] + t - 1)).min().unwrap_or(0) as f64)
        .collect();
    if minima.is_empty() {
        return Ok(n_tokens as f64);
    }
    Ok(minima.iter().sum::<f64>() / minima.len() as f64)
}

/// First passage token range whose concatenated forms equal the answer,
/// ignoring case and whitespace.
pub fn resolve_answer_span(passage: &AnnotatedDocument, answer: &str) -> Option<Range<usize>> {
    let target: String = answer.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_lowercase).collect();
    if target.is_empty() {
        return None;
    }
    let forms: Vec<String> = passage.tokens().map(|t| t.form.to_lowercase()).collect();
    for start in 0..forms.len() {
        let mut acc = String::new();
        for (end, form) in forms.iter().enumerate().skip(start) {
            acc.push_str(form);
            if acc.len() >= target.len() {
                if acc == target {
                    return Some(start..end + 1);
                }
                break;
            }
            if !target.starts_with(&acc) {
                break;
            }
        }
    }
    None
}

/// All five features from already-resolved documents.
pub fn features_from_documents(
    question: &AnnotatedDocument,
    passage: &AnnotatedDocument,
    answer_span: Range<usize>,
    opts: &FeatureOptions,
) -> Result<ComplexityFeatures> {
    let f1 = question.sentences.iter().map(clause_count).sum::<usize>().max(1) as f64;
    let f2 = question.sentences.iter().map(mod_relation_count).sum::<usize>() as f64;
    let f3 = feature_topic_coherence(passage, opts.alpha, opts.f3_mode)?;
    let f4 = feature_entity_frequency(question, passage);
    let f5 = feature_entity_answer_distance(question, passage, answer_span)?;
    Ok(ComplexityFeatures { f1, f2, f3, f4, f5 })
}

/// Features for a QA instance using its `<id>#question` / `<id>#passage`
/// annotations. The answer span is located in the annotated passage tokens.
pub fn compute_raw_features(
    instance: &QAInstance,
    annotations: &AnnotationIndex,
    opts: &FeatureOptions,
) -> Result<ComplexityFeatures> {
    let question = annotations.question(&instance.id)?;
    let passage = annotations.passage(&instance.id)?;
    let span = resolve_answer_span(passage, &instance.answer_text).ok_or_else(|| {
        Error::Data(format!("answer `{}` not found in annotated passage `{}`", instance.answer_text, passage.doc_id))
    })?;
    features_from_documents(question, passage, span, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::tokenize_fallback;

    #[test]
    fn identical_sentences_hit_the_floor() {
        let p = tokenize_fallback("Rivers carry water. Rivers carry water.").unwrap();
        assert_eq!(feature_topic_coherence(&p, 0.01, F3Mode::Inverse).unwrap(), 1e6);
        assert_eq!(feature_topic_coherence(&p, 0.01, F3Mode::Direct).unwrap(), 0.0);
    }

    #[test]
    fn single_sentence_is_maximally_coherent() {
        let p = tokenize_fallback("Rivers carry water.").unwrap();
        assert_eq!(feature_topic_coherence(&p, 0.01, F3Mode::Inverse).unwrap(), 1e6);
    }

    #[test]
    fn entity_frequency_cases() {
        // Only passage entity, mentioned three times.
        let q = tokenize_fallback("Where is Rome located ?").unwrap();
        let p = tokenize_fallback("We love Rome. We visit Rome. Many see Rome.").unwrap();
        assert_eq!(feature_entity_frequency(&q, &p), 1.0);

        // No shared entities, nine passage mentions.
        let p9 = tokenize_fallback("A saw Bo and Cy and Di and Ed and Fa and Gu and Hi and Io and Jo.").unwrap();
        assert_eq!(crate::annotation::entity_mentions(&p9).total_mentions, 9);
        assert_eq!(feature_entity_frequency(&q, &p9), 10.0);

        // No passage entities at all.
        let p0 = tokenize_fallback("nothing capitalised here.").unwrap();
        assert_eq!(feature_entity_frequency(&q, &p0), 1.0);
    }

    #[test]
    fn distance_fallback_is_passage_length() {
        let q = tokenize_fallback("who wrote it ?").unwrap();
        let p = tokenize_fallback("one two three four five six seven eight nine ten").unwrap();
        assert_eq!(feature_entity_answer_distance(&q, &p, 2..3).unwrap(), 10.0);
        assert!(feature_entity_answer_distance(&q, &p, 3..3).is_err());
        assert!(feature_entity_answer_distance(&q, &p, 9..11).is_err());
    }

    #[test]
    fn answer_resolution_ignores_tokenisation() {
        let p = tokenize_fallback("The 6.213 km long track is in Bathurst.").unwrap();
        assert_eq!(resolve_answer_span(&p, "6.213 km"), Some(1..5));
        assert_eq!(resolve_answer_span(&p, "bathurst"), Some(9..10));
        assert_eq!(resolve_answer_span(&p, "Sydney"), None);
    }
}
