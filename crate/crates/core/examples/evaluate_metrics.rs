// Corpus BLEU-4, ROUGE-L, complexity consistency and pairwise diversity on
// a handful of fixed outputs.

use ccqg::dataset::synthetic::pattern_label;
use ccqg::estimator::ComplexityLabel;
use ccqg::evaluation::{bleu4, consistency_f1, pairwise_diversity, rouge_l_corpus, EvalReport};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

pub fn run_example() -> ccqg::Result<EvalReport> {
    let simple = ["what is falcon ?", "what is river ?"].map(toks);
    let complex = ["what is the falcon that guards the bridge ?", "what is the river ?"].map(toks);
    let references = ["what is falcon ?", "what is the river that feeds the valley ?"].map(toks);

    let bleu = bleu4(&simple[..1], &references[..1])?;
    let rouge = rouge_l_corpus(&complex, &references)?;
    let generated: Vec<Vec<String>> = simple.iter().chain(&complex).cloned().collect();
    let targets = [ComplexityLabel::Simple, ComplexityLabel::Simple, ComplexityLabel::Complex, ComplexityLabel::Complex];
    let consistency = consistency_f1(&generated, &targets, |_, q| Ok(pattern_label(q)))?;
    let diversity = pairwise_diversity(&simple, &complex)?;

    let report = EvalReport { bleu4: bleu, rouge_l: rouge, consistency: Some(consistency), diversity: Some(diversity), pairs: 2 };
    println!("{}\n{}", EvalReport::HEADER, report.table_row());
    Ok(report)
}

fn main() -> ccqg::Result<()> {
    run_example().map(|_| ())
}
