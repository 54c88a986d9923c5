// Train the mixture-of-experts generator with hard-EM on a toy corpus
// whose simple and complex questions follow fixed patterns, then ask for
// both levels on each input.

use ccqg::dataset::build_vocab;
use ccqg::dataset::synthetic::{pattern_corpus, pattern_label};
use ccqg::estimator::ComplexityLabel;
use ccqg::evaluation::{evaluate_generator, EvalReport};
use ccqg::model::{Ccqg, ModelConfig};
use ccqg::training::{init_banks, train_loop, TrainConfig};

pub fn run_example() -> ccqg::Result<EvalReport> {
    let corpus = pattern_corpus(8, 1);
    let config = ModelConfig {
        n_z: 2,
        n_pi: 4,
        top_k: 2,
        level_dim: 8,
        expert_dim: 8,
        template_dim: 8,
        hidden: 32,
        word_dim: 16,
        max_decode_len: 16,
        ..ModelConfig::default()
    };
    let train = TrainConfig { lr: 0.01, max_epochs: 40, batch_size: 4, ..TrainConfig::default() };
    let mut model = Ccqg::new(config, build_vocab(&corpus, 500))?;
    init_banks(&mut model, &corpus, &train)?;
    let examples = corpus.iter().map(|i| model.example(i)).collect::<ccqg::Result<Vec<_>>>()?;
    let report = train_loop(&mut model, &examples, &[], &train)?;
    let best = &report.epochs[report.best_epoch - 1];
    println!("best epoch {} of {}: dev NLL {:.4}, selections {:?}", best.epoch, report.epochs.len(), best.dev_nll, best.selection_counts);

    let first = &corpus[0];
    for level in ComplexityLabel::ALL {
        let input = model.input(&first.passage_tokens(), &first.answer_tokens(), level)?;
        let g = model.generate(&input)?;
        println!("{level:>7}: {} (expert {})", g.tokens.join(" "), g.expert);
    }
    let (eval, _) = evaluate_generator(&model, &corpus, |_, q| Ok(pattern_label(q)))?;
    println!("{}\n{}", EvalReport::HEADER, eval.table_row());
    Ok(eval)
}

fn main() -> ccqg::Result<()> {
    run_example().map(|_| ())
}
