// Initialise the per-level template banks: embed the training questions
// of each level and keep the k-means centroids.

use ccqg::dataset::synthetic::pattern_corpus;
use ccqg::estimator::ComplexityLabel;
use ccqg::model::ModelConfig;
use ccqg::numerics::Tensor;
use ccqg::training::{embed_questions, init_template_bank, kmeans, Embedder, TrainConfig};

pub fn run_example() -> ccqg::Result<[Tensor; 2]> {
    let corpus = pattern_corpus(12, 4);
    let model = ModelConfig { n_pi: 3, template_dim: 6, ..ModelConfig::micro() };
    let train = TrainConfig::default();
    let embedder = Embedder::from_config(&train)?;

    let questions: Vec<Vec<String>> = corpus.iter().map(|i| i.question_tokens()).collect();
    let vectors = embed_questions(&questions, model.template_dim, &embedder)?;
    let all = kmeans(&vectors, model.n_pi, train.seed, train.kmeans_restarts, train.kmeans_max_iter)?;
    println!("all questions: WCSS {:.4} after {} assignment steps", all.wcss, all.history.len());

    let simple = init_template_bank(&corpus, ComplexityLabel::Simple, &model, &train, &embedder)?;
    let complex = init_template_bank(&corpus, ComplexityLabel::Complex, &model, &train, &embedder)?;
    for (level, bank) in [("simple", &simple), ("complex", &complex)] {
        println!("{level} bank {:?}, first row {:?}", bank.shape(), &bank.row_slice(0)[..3]);
    }
    Ok([simple, complex])
}

fn main() -> ccqg::Result<()> {
    run_example().map(|_| ())
}
