//! Template-bank initialisation by clustering question embeddings, and
//! hard-EM optimisation of the generator.

mod config;
mod em;
mod embed;
mod kmeans;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use config::{EmbeddingSource, TrainConfig};
pub use em::{e_step, frozen_params, hard_em_epoch, mean_mixture_nll, train_loop, train_loop_with, EpochReport, TrainReport};
pub use embed::{embed_questions, internal_token_vector, Embedder, WordVectors};
pub use kmeans::{kmeans, kmeanspp_seed, lloyd, KMeansResult};

use crate::dataset::QAInstance;
use crate::error::{Error, Result};
use crate::estimator::ComplexityLabel;
use crate::model::{Ccqg, ModelConfig};
use crate::numerics::Tensor;

/// Standard deviation of the jitter added to duplicated embeddings when a
/// level has fewer questions than template slots.
const PAD_JITTER: f64 = 1e-3;

impl Embedder {
    pub fn from_config(cfg: &TrainConfig) -> Result<Self> {
        match &cfg.embedding_source {
            EmbeddingSource::Internal => Ok(Embedder::Internal { seed: cfg.seed }),
            EmbeddingSource::File(path) if path.as_os_str().is_empty() => {
                Err(Error::MissingKey("embedding_file".into()))
            }
            EmbeddingSource::File(path) => Ok(Embedder::File(WordVectors::load(path)?)),
        }
    }
}

/// The level-`level` bank: k-means centroids (k = `n_pi`) of the embedded
/// training questions at that level.
pub fn init_template_bank(
    instances: &[QAInstance],
    level: ComplexityLabel,
    model: &ModelConfig,
    cfg: &TrainConfig,
    embedder: &Embedder,
) -> Result<Tensor> {
    let questions: Vec<Vec<String>> =
        instances.iter().filter(|i| i.training_label() == Some(level)).map(QAInstance::question_tokens).collect();
    if questions.is_empty() {
        return Err(Error::Data(format!("no {level} questions to initialise the template bank")));
    }
    let mut vectors = embed_questions(&questions, model.template_dim, embedder)?;
    let real = vectors.len();
    if real < model.n_pi {
        log::warn!("{real} {level} questions for {} template slots; padding with perturbed duplicates", model.n_pi);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (level.index() as u64 + 1));
        let jitter = Normal::new(0.0, PAD_JITTER).expect("positive deviation");
        for j in real..model.n_pi {
            let v = vectors[j % real].iter().map(|x| x + jitter.sample(&mut rng)).collect();
            vectors.push(v);
        }
    }
    let seed = cfg.seed.wrapping_add(level.index() as u64);
    let result = kmeans(&vectors, model.n_pi, seed, cfg.kmeans_restarts, cfg.kmeans_max_iter)?;
    let data = result.centroids.into_iter().flatten().collect();
    Tensor::new(model.n_pi, model.template_dim, data)
}

/// Initialises both banks of `model` from `instances`.
pub fn init_banks(model: &mut Ccqg, instances: &[QAInstance], cfg: &TrainConfig) -> Result<()> {
    let embedder = Embedder::from_config(cfg)?;
    for level in ComplexityLabel::ALL {
        let bank = init_template_bank(instances, level, model.config(), cfg, &embedder)?;
        model.set_bank(level, bank)?;
    }
    Ok(())
}
