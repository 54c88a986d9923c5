use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::estimator::ComplexityLabel;
use crate::model::{argmin, Ccqg, TrainingExample};
use crate::numerics::{adam_step, AdamState, Graph, ParamId, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean E-step NLL of the selected expert, before the update.
    pub train_nll: f64,
    /// Mean noise-free mixture NLL on the dev set after the epoch.
    pub dev_nll: f64,
    pub selection_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub converged: bool,
}

impl TrainReport {
    pub fn best_dev_nll(&self) -> f64 {
        self.epochs[self.best_epoch - 1].dev_nll
    }
}

/// Per-expert NLL with gate noise off and the argmin expert (ties to the
/// lowest index).
pub fn e_step(model: &Ccqg, ex: &TrainingExample) -> Result<(usize, Vec<f64>)> {
    let nll: Vec<f64> = model.expert_log_probs(ex)?.into_iter().map(|lp| -lp).collect();
    if let Some(bad) = nll.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("example `{}`: expert {bad} has non-finite NLL {}", ex.id, nll[bad])));
    }
    Ok((argmin(&nll), nll))
}

/// Mean noise-free mixture NLL over `examples`.
pub fn mean_mixture_nll(model: &Ccqg, examples: &[TrainingExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Data("cannot average NLL over zero examples".into()));
    }
    let per: Vec<f64> = examples.par_iter().map(|ex| model.mixture_log_prob(ex).map(|lp| -lp)).collect::<Result<_>>()?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Parameters excluded from updates under `cfg`.
pub fn frozen_params(model: &Ccqg, cfg: &TrainConfig) -> Vec<ParamId> {
    if cfg.freeze_templates {
        ComplexityLabel::ALL.iter().map(|&l| model.bank_id(l)).collect()
    } else {
        Vec::new()
    }
}

fn noise_seed(seed: u64, epoch: usize, position: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (position as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// One hard-EM pass. Each batch runs the noise-free E-step per example,
/// then one Adam update on the mean NLL of the selected experts with gate
/// noise on. Example gradients are summed in example order, so results do
/// not depend on the worker count.
pub fn hard_em_epoch(
    model: &mut Ccqg,
    examples: &[TrainingExample],
    state: &mut AdamState,
    cfg: &TrainConfig,
    frozen: &[ParamId],
    epoch: usize,
) -> Result<(f64, Vec<usize>)> {
    if examples.is_empty() {
        return Err(Error::Data("no training examples".into()));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(noise_seed(cfg.seed, epoch, usize::MAX)));
    let adam = cfg.adam();
    let mut counts = vec![0usize; model.config().n_z];
    let mut total_nll = 0.0;
    for batch in order.chunks(cfg.batch_size) {
        let scale = 1.0 / batch.len() as f64;
        let model_ref = &*model;
        let results: Vec<(usize, f64, Vec<(ParamId, Tensor)>)> = batch
            .par_iter()
            .map(|&i| {
                let ex = &examples[i];
                let (z, nll) = e_step(model_ref, ex)?;
                let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(cfg.seed, epoch, i));
                let mut g = Graph::new();
                let lp = model_ref.net().sequence_log_prob(&mut g, &ex.input, &ex.target, z, Some(&mut rng))?;
                if !g.value(lp).item().is_finite() {
                    return Err(Error::Numeric(format!("example `{}`: non-finite training loss under expert {z}", ex.id)));
                }
                let loss = g.affine(lp, -scale, 0.0);
                Ok((z, nll[z], g.backward(loss)?.into_params()))
            })
            .collect::<Result<_>>()?;
        let mut summed: Vec<(ParamId, Tensor)> = Vec::new();
        for (z, nll, grads) in results {
            counts[z] += 1;
            total_nll += nll;
            for (id, t) in grads {
                match summed.iter_mut().find(|(p, _)| *p == id) {
                    Some((_, acc)) => acc.add_assign(&t),
                    None => summed.push((id, t)),
                }
            }
        }
        if let Some((id, _)) = summed.iter().find(|(_, t)| !t.all_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient for `{}` in epoch {epoch}", model.params().name(*id))));
        }
        adam_step(model.params_mut(), &summed, state, &adam, frozen)?;
    }
    Ok((total_nll / examples.len() as f64, counts))
}

/// Hard-EM until the dev NLL moves by less than `convergence_eps` between
/// consecutive epochs or `max_epochs` is reached; the parameters of the
/// best dev epoch are restored. With an empty dev set the training
/// examples stand in.
pub fn train_loop(model: &mut Ccqg, train: &[TrainingExample], dev: &[TrainingExample], cfg: &TrainConfig) -> Result<TrainReport> {
    let frozen = frozen_params(model, cfg);
    train_loop_with(model, train, dev, cfg, &frozen)
}

pub fn train_loop_with(
    model: &mut Ccqg,
    train: &[TrainingExample],
    dev: &[TrainingExample],
    cfg: &TrainConfig,
    frozen: &[ParamId],
) -> Result<TrainReport> {
    cfg.validate()?;
    let dev = if dev.is_empty() { train } else { dev };
    let mut state = AdamState::new(model.params());
    let mut epochs: Vec<EpochReport> = Vec::new();
    let mut best: Option<(f64, usize, crate::numerics::ParamStore)> = None;
    let mut converged = false;
    for epoch in 1..=cfg.max_epochs {
        let (train_nll, selection_counts) = hard_em_epoch(model, train, &mut state, cfg, frozen, epoch)?;
        let dev_nll = mean_mixture_nll(model, dev)?;
        log::info!("epoch {epoch}: train NLL {train_nll:.6}, dev NLL {dev_nll:.6}, selections {selection_counts:?}");
        if best.as_ref().is_none_or(|(b, _, _)| dev_nll < *b) {
            best = Some((dev_nll, epoch, model.params().clone()));
        }
        let previous = epochs.last().map(|e| e.dev_nll);
        epochs.push(EpochReport { epoch, train_nll, dev_nll, selection_counts });
        if previous.is_some_and(|p| (dev_nll - p).abs() < cfg.convergence_eps) {
            converged = true;
            break;
        }
    }
    let (_, best_epoch, params) = best.expect("max_epochs >= 1");
    *model.params_mut() = params;
    Ok(TrainReport { epochs, best_epoch, converged })
}
