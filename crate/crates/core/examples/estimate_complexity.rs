// Score question complexity with the training-free estimator. Annotations
// come from the built-in fallback tokenizer, so no external parser is
// needed; the fallback produces no dependency relations or entities, so
// only the passage-level features vary here.

use ccqg::annotation::{passage_doc_id, question_doc_id, tokenize_fallback_with_id, AnnotationIndex};
use ccqg::dataset::QAInstance;
use ccqg::estimator::{compute_raw_features, fit_normalizer, score_features, ComplexityLabel, FeatureOptions};

pub fn run_example() -> ccqg::Result<Vec<(String, f64, ComplexityLabel)>> {
    let corpus = [
        QAInstance::new("a", "Rivers carry water. Rivers carry water.", "What do rivers carry?", "water"),
        QAInstance::new("b", "Rivers carry water. Mountains hold snow in winter.", "What do rivers carry?", "water"),
        QAInstance::new("c", "Bees make honey. Storms flood valleys. Kings wear crowns.", "What do bees make?", "honey"),
    ];
    let mut index = AnnotationIndex::default();
    for inst in &corpus {
        index.insert(tokenize_fallback_with_id(&passage_doc_id(&inst.id), &inst.passage)?);
        index.insert(tokenize_fallback_with_id(&question_doc_id(&inst.id), &inst.question)?);
    }
    // Direct mode: less coherent passages score higher.
    let opts = FeatureOptions { f3_mode: ccqg::estimator::F3Mode::Direct, ..FeatureOptions::default() };
    let raw = corpus.iter().map(|i| compute_raw_features(i, &index, &opts)).collect::<ccqg::Result<Vec<_>>>()?;
    let normalizer = fit_normalizer(&raw, 0.1)?;
    let mut out = Vec::new();
    for (inst, f) in corpus.iter().zip(&raw) {
        let (_, score, label) = score_features(f, &normalizer);
        println!("{:>2}  f3={:.4}  score={score:.3}  {label}", inst.id, f.f3);
        out.push((inst.id.clone(), score, label));
    }
    Ok(out)
}

fn main() -> ccqg::Result<()> {
    run_example().map(|_| ())
}
