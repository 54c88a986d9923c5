//! Automatic generation metrics: corpus BLEU-4, ROUGE-L, complexity
//! consistency and a pairwise diversity proxy.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::annotation::{tokenize_fallback_with_id, AnnotatedDocument};
use crate::dataset::QAInstance;
use crate::error::{Error, Result};
use crate::model::Ccqg;
use crate::estimator::{evaluate_estimator, features_from_documents, resolve_answer_span, score_features, ComplexityLabel, FeatureNormalizer, FeatureOptions};

/// Smoothing mass added to the numerator and denominator of an n-gram
/// order with no matches.
pub const BLEU_EPSILON: f64 = 1e-9;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Clipped matches and candidate n-gram count for one pair and order.
fn modified_counts(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let matched = cand.iter().map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0))).sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

/// Corpus BLEU-4 with one reference per candidate.
pub fn bleu4(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(Error::Invalid(format!("{} candidates for {} references", candidates.len(), references.len())));
    }
    if candidates.is_empty() {
        return Err(Error::Invalid("BLEU needs at least one pair".into()));
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, reference) in candidates.iter().zip(references) {
        c += cand.len();
        r += reference.len();
        for n in 1..=4 {
            let (m, d) = modified_counts(cand, reference, n);
            matched[n - 1] += m;
            total[n - 1] += d;
        }
    }
    if c == 0 {
        return Ok(if r == 0 { 1.0 } else { 0.0 });
    }
    let log_precision: f64 = (0..4)
        .map(|i| {
            let (m, d) = (matched[i] as f64, total[i] as f64);
            if matched[i] == 0 { ((m + BLEU_EPSILON) / (d + BLEU_EPSILON)).ln() } else { (m / d).ln() }
        })
        .sum::<f64>()
        / 4.0;
    let bp = (1.0 - r as f64 / c as f64).min(0.0).exp();
    Ok(bp * log_precision.exp())
}

pub fn sentence_bleu4(candidate: &[String], reference: &[String]) -> f64 {
    bleu4(&[candidate.to_vec()], &[reference.to_vec()]).expect("one pair")
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// LCS-based F-measure with beta = 1.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> Result<f64> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::Invalid("ROUGE-L needs nonempty token lists".into()));
    }
    let lcs = lcs_len(candidate, reference) as f64;
    if lcs == 0.0 {
        return Ok(0.0);
    }
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    Ok(2.0 * p * r / (p + r))
}

/// Mean pairwise ROUGE-L.
pub fn rouge_l_corpus(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    if candidates.len() != references.len() || candidates.is_empty() {
        return Err(Error::Invalid(format!("{} candidates for {} references", candidates.len(), references.len())));
    }
    let scores: Vec<f64> = candidates.par_iter().zip(references).map(|(c, r)| rouge_l(c, r)).collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Consistency {
    pub f1_simple: f64,
    pub f1_complex: f64,
    pub macro_f1: f64,
}

/// Labels every generated question with `labeler` and scores the labels
/// against the requested levels.
pub fn consistency_f1<F>(generated: &[Vec<String>], targets: &[ComplexityLabel], labeler: F) -> Result<Consistency>
where
    F: Fn(usize, &[String]) -> Result<ComplexityLabel> + Sync,
{
    if generated.len() != targets.len() {
        return Err(Error::Invalid(format!("{} questions for {} target labels", generated.len(), targets.len())));
    }
    let predicted: Vec<ComplexityLabel> = generated.par_iter().enumerate().map(|(i, q)| labeler(i, q)).collect::<Result<_>>()?;
    let eval = evaluate_estimator(&predicted, targets)?;
    Ok(Consistency { f1_simple: eval.f1_simple, f1_complex: eval.f1_complex, macro_f1: eval.macro_f1 })
}

/// Labels a generated question through the estimator: the question is
/// annotated with the fallback tokenizer and scored against the passage.
pub fn estimator_label(
    question: &[String],
    passage: &AnnotatedDocument,
    answer: &str,
    normalizer: &FeatureNormalizer,
    opts: &FeatureOptions,
) -> Result<ComplexityLabel> {
    let q = tokenize_fallback_with_id("generated#question", &question.join(" "))?;
    let span = resolve_answer_span(passage, answer)
        .ok_or_else(|| Error::Data(format!("answer `{answer}` not found in passage `{}`", passage.doc_id)))?;
    let features = features_from_documents(&q, passage, span, opts)?;
    Ok(score_features(&features, normalizer).2)
}

/// Mean of `1 - sentence BLEU-4(simple, complex)` over paired outputs.
pub fn pairwise_diversity(simple: &[Vec<String>], complex: &[Vec<String>]) -> Result<f64> {
    if simple.len() != complex.len() || simple.is_empty() {
        return Err(Error::Invalid(format!("diversity needs paired outputs, got {} and {}", simple.len(), complex.len())));
    }
    let per: Vec<f64> = simple.iter().zip(complex).map(|(s, c)| 1.0 - sentence_bleu4(s, c)).collect();
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub consistency: Option<Consistency>,
    pub diversity: Option<f64>,
    pub pairs: usize,
}

impl EvalReport {
    pub const HEADER: &'static str = "pairs\tbleu4\trouge_l\tf1_simple\tf1_complex\tf1_macro\tdiversity";

    /// One tab-separated row matching [`EvalReport::HEADER`]; absent
    /// values print as `-`.
    pub fn table_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        format!(
            "{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}",
            self.pairs,
            self.bleu4,
            self.rouge_l,
            opt(self.consistency.map(|c| c.f1_simple)),
            opt(self.consistency.map(|c| c.f1_complex)),
            opt(self.consistency.map(|c| c.macro_f1)),
            opt(self.diversity)
        )
    }
}

/// One generated question, as written to `generations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub id: String,
    pub level: ComplexityLabel,
    pub question: String,
    pub expert: usize,
}

/// Generates both levels for every distinct (passage, answer) input of
/// `instances` and scores the result.
///
/// BLEU-4 and ROUGE-L compare each instance's gold question with the
/// generation at the instance's training label. Consistency and diversity
/// run over the distinct inputs, so a passage that appears once per level
/// counts once. An empty generation scores ROUGE-L 0.
pub fn evaluate_generator<L>(model: &Ccqg, instances: &[QAInstance], labeler: L) -> Result<(EvalReport, Vec<GenerationRecord>)>
where
    L: Fn(&QAInstance, &[String]) -> Result<ComplexityLabel> + Sync,
{
    if instances.is_empty() {
        return Err(Error::Data("no instances to evaluate".into()));
    }
    let mut first_of: HashMap<(&str, &str), usize> = HashMap::new();
    let mut inputs: Vec<usize> = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        first_of.entry((inst.passage.as_str(), inst.answer_text.as_str())).or_insert_with(|| {
            inputs.push(i);
            inputs.len() - 1
        });
    }
    let generated: Vec<[(Vec<String>, usize); 2]> = inputs
        .par_iter()
        .map(|&i| {
            let inst = &instances[i];
            let run = |level| -> Result<(Vec<String>, usize)> {
                let input = model.input(&inst.passage_tokens(), &inst.answer_tokens(), level)?;
                let g = model.generate(&input)?;
                Ok((g.tokens, g.expert))
            };
            Ok([run(ComplexityLabel::Simple)?, run(ComplexityLabel::Complex)?])
        })
        .collect::<Result<_>>()?;

    let mut candidates = Vec::with_capacity(instances.len());
    let mut references = Vec::with_capacity(instances.len());
    for inst in instances {
        let level = inst
            .training_label()
            .ok_or_else(|| Error::Data(format!("instance `{}` has neither a predicted nor a gold label", inst.id)))?;
        let u = first_of[&(inst.passage.as_str(), inst.answer_text.as_str())];
        candidates.push(generated[u][level.index()].0.clone());
        references.push(inst.question_tokens());
    }
    let bleu = bleu4(&candidates, &references)?;
    let rouge: Vec<f64> = candidates
        .iter()
        .zip(&references)
        .map(|(c, r)| if c.is_empty() { Ok(0.0) } else { rouge_l(c, r) })
        .collect::<Result<_>>()?;

    let mut questions = Vec::with_capacity(2 * inputs.len());
    let mut targets = Vec::with_capacity(2 * inputs.len());
    let mut owners = Vec::with_capacity(2 * inputs.len());
    let mut records = Vec::with_capacity(2 * inputs.len());
    for (u, &i) in inputs.iter().enumerate() {
        for level in ComplexityLabel::ALL {
            let (tokens, expert) = &generated[u][level.index()];
            questions.push(tokens.clone());
            targets.push(level);
            owners.push(i);
            records.push(GenerationRecord { id: instances[i].id.clone(), level, question: tokens.join(" "), expert: *expert });
        }
    }
    let consistency = consistency_f1(&questions, &targets, |k, q| labeler(&instances[owners[k]], q))?;
    let simple: Vec<Vec<String>> = generated.iter().map(|g| g[0].0.clone()).collect();
    let complex: Vec<Vec<String>> = generated.iter().map(|g| g[1].0.clone()).collect();
    let report = EvalReport {
        bleu4: bleu,
        rouge_l: rouge.iter().sum::<f64>() / rouge.len() as f64,
        consistency: Some(consistency),
        diversity: Some(pairwise_diversity(&simple, &complex)?),
        pairs: instances.len(),
    };
    Ok((report, records))
}
