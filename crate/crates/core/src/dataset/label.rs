use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::QAInstance;
use crate::annotation::AnnotationIndex;
use crate::estimator::{compute_raw_features, score_features, ComplexityLabel, FeatureNormalizer, FeatureOptions};

/// One line of the labelled-feature dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub raw: [f64; 5],
    pub normalized: [f64; 5],
    pub score: f64,
    pub label: ComplexityLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<ComplexityLabel>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelReport {
    pub simple: usize,
    pub complex: usize,
    /// Instances whose annotations were missing or unusable, with the reason.
    pub skipped: Vec<(String, String)>,
    pub records: Vec<FeatureRecord>,
}

/// Runs the estimator over every instance and stores the result in
/// `predicted_complexity`. Instances that cannot be scored keep their
/// previous label and are listed in the report.
pub fn label_corpus(
    instances: &mut [QAInstance],
    normalizer: &FeatureNormalizer,
    annotations: &AnnotationIndex,
    opts: &FeatureOptions,
) -> LabelReport {
    let results: Vec<_> = instances
        .par_iter()
        .map(|inst| compute_raw_features(inst, annotations, opts).map(|f| (f, score_features(&f, normalizer))))
        .collect();
    let mut report = LabelReport::default();
    for (inst, result) in instances.iter_mut().zip(results) {
        match result {
            Ok((raw, (normalized, score, label))) => {
                inst.predicted_complexity = Some(label);
                match label {
                    ComplexityLabel::Simple => report.simple += 1,
                    ComplexityLabel::Complex => report.complex += 1,
                }
                report.records.push(FeatureRecord {
                    id: inst.id.clone(),
                    raw: raw.to_array(),
                    normalized,
                    score,
                    label,
                    gold: inst.gold_complexity,
                });
            }
            Err(e) => {
                log::warn!("label_corpus: skipping {}: {e}", inst.id);
                report.skipped.push((inst.id.clone(), e.to_string()));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{passage_doc_id, question_doc_id, tokenize_fallback_with_id};
    use crate::estimator::fit_normalizer;

    fn setup() -> (Vec<QAInstance>, AnnotationIndex) {
        let rows = [
            ("a", "The cat sat on the mat. It slept there.", "Where did the cat sit ?", "the mat"),
            ("b", "Ada wrote notes. Ada met Babbage in London.", "Whom did Ada meet in London ?", "Babbage"),
            ("c", "Rain fell.", "What fell ?", "Rain"),
        ];
        let mut docs = Vec::new();
        let mut insts = Vec::new();
        for (id, p, q, a) in rows {
            docs.push(tokenize_fallback_with_id(&passage_doc_id(id), p).unwrap());
            docs.push(tokenize_fallback_with_id(&question_doc_id(id), q).unwrap());
            insts.push(QAInstance::new(id, p, q, a));
        }
        (insts, AnnotationIndex::new(docs).unwrap())
    }

    #[test]
    fn all_below_threshold_are_simple() {
        let (mut insts, ann) = setup();
        let opts = FeatureOptions::default();
        let feats: Vec<_> = insts.iter().map(|i| compute_raw_features(i, &ann, &opts).unwrap()).collect();
        let norm = fit_normalizer(&feats, 1.0).unwrap();
        let report = label_corpus(&mut insts, &norm, &ann, &opts);
        assert_eq!((report.simple, report.complex), (3, 0));
        assert!(insts.iter().all(|i| i.predicted_complexity == Some(ComplexityLabel::Simple)));
    }

    #[test]
    fn relabelling_is_idempotent_and_missing_docs_are_reported() {
        let (mut insts, ann) = setup();
        insts.push(QAInstance::new("ghost", "No annotation.", "What ?", "annotation"));
        let opts = FeatureOptions::default();
        let feats: Vec<_> = insts[..3].iter().map(|i| compute_raw_features(i, &ann, &opts).unwrap()).collect();
        let norm = fit_normalizer(&feats, 0.3).unwrap();
        let first = label_corpus(&mut insts, &norm, &ann, &opts);
        let snapshot = insts.clone();
        let second = label_corpus(&mut insts, &norm, &ann, &opts);
        assert_eq!(snapshot, insts);
        assert_eq!(first, second);
        assert_eq!(first.skipped.len(), 1);
        assert_eq!(first.skipped[0].0, "ghost");
        assert_eq!(first.simple + first.complex, 3);
    }
}
