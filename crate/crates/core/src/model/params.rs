use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LstmIds {
    pub w: ParamId,
    pub b: ParamId,
}

/// Handles to every learnable tensor of the generator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ParamIds {
    pub word: ParamId,
    pub enc_p_fw: LstmIds,
    pub enc_p_bw: LstmIds,
    pub enc_a_fw: LstmIds,
    pub enc_a_bw: LstmIds,
    pub level: ParamId,
    pub expert: ParamId,
    pub bank: [ParamId; 2],
    pub init_h: LstmIds,
    pub init_c: LstmIds,
    pub att_ws: ParamId,
    pub att_wh: ParamId,
    pub att_v: ParamId,
    pub gate_w: ParamId,
    pub gate_noise: ParamId,
    pub dec_fc: LstmIds,
    pub dec_lstm: LstmIds,
    pub out: LstmIds,
    pub ptr_wc: ParamId,
    pub ptr_ws: ParamId,
    pub ptr_wy: ParamId,
    pub ptr_b: ParamId,
}

#[derive(Clone, Copy)]
enum Init {
    /// Uniform in +-sqrt(6 / (rows + cols)).
    Glorot,
    Zeros,
    /// Zeros except the forget-gate block, which starts at 1.
    ForgetBias,
}

/// The full parameter layout as `(name, rows, cols, init)`.
fn layout(cfg: &ModelConfig, vocab_size: usize) -> Vec<(String, usize, usize, Init)> {
    let h = cfg.hidden;
    let half = h / 2;
    let mut out = vec![("emb.word".to_string(), vocab_size, cfg.word_dim, Init::Glorot)];
    for enc in ["enc_p", "enc_a"] {
        for dir in ["fw", "bw"] {
            out.push((format!("{enc}.{dir}.w"), cfg.word_dim + half, 4 * half, Init::Glorot));
            out.push((format!("{enc}.{dir}.b"), 1, 4 * half, Init::ForgetBias));
        }
    }
    let state_in = 2 * h + cfg.level_dim + cfg.expert_dim;
    out.extend([
        ("emb.level".to_string(), 2, cfg.level_dim, Init::Glorot),
        ("emb.expert".to_string(), cfg.n_z, cfg.expert_dim, Init::Glorot),
        ("bank.simple".to_string(), cfg.n_pi, cfg.template_dim, Init::Glorot),
        ("bank.complex".to_string(), cfg.n_pi, cfg.template_dim, Init::Glorot),
        ("init.h.w".to_string(), state_in, h, Init::Glorot),
        ("init.h.b".to_string(), 1, h, Init::Zeros),
        ("init.c.w".to_string(), state_in, h, Init::Glorot),
        ("init.c.b".to_string(), 1, h, Init::Zeros),
        ("att.ws".to_string(), h, h, Init::Glorot),
        ("att.wh".to_string(), h, h, Init::Glorot),
        ("att.v".to_string(), h, 1, Init::Glorot),
        ("gate.w".to_string(), state_in, cfg.n_pi, Init::Glorot),
        ("gate.noise".to_string(), state_in, cfg.n_pi, Init::Glorot),
        ("dec.fc.w".to_string(), cfg.word_dim + h + cfg.template_dim + cfg.expert_dim, cfg.word_dim, Init::Glorot),
        ("dec.fc.b".to_string(), 1, cfg.word_dim, Init::Zeros),
        ("dec.lstm.w".to_string(), cfg.word_dim + h, 4 * h, Init::Glorot),
        ("dec.lstm.b".to_string(), 1, 4 * h, Init::ForgetBias),
        ("out.w".to_string(), 2 * h, vocab_size, Init::Glorot),
        ("out.b".to_string(), 1, vocab_size, Init::Zeros),
        ("ptr.wc".to_string(), h, 1, Init::Glorot),
        ("ptr.ws".to_string(), h, 1, Init::Glorot),
        ("ptr.wy".to_string(), cfg.word_dim, 1, Init::Glorot),
        ("ptr.b".to_string(), 1, 1, Init::Zeros),
    ]);
    out
}

/// A generator stream private to one parameter, so a tensor's initial value
/// depends only on the seed and its name (not on which other tensors exist).
fn param_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn init_tensor(rows: usize, cols: usize, init: Init, rng: &mut ChaCha8Rng) -> Tensor {
    match init {
        Init::Zeros => Tensor::zeros(rows, cols),
        Init::ForgetBias => {
            let q = cols / 4;
            let data = (0..cols).map(|c| if (q..2 * q).contains(&c) { 1.0 } else { 0.0 }).collect();
            Tensor::new(rows, cols, data).expect("bias row")
        }
        Init::Glorot => {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
            Tensor::new(rows, cols, data).expect("sized")
        }
    }
}

pub(crate) fn init_params(cfg: &ModelConfig, vocab_size: usize) -> ParamStore {
    let mut store = ParamStore::new();
    for (name, rows, cols, init) in layout(cfg, vocab_size) {
        let mut rng = param_rng(cfg.seed, &name);
        store.add(name, init_tensor(rows, cols, init, &mut rng)).expect("layout names are unique");
    }
    store
}

/// Checks that `store` has exactly the layout's names and shapes.
pub(crate) fn check_layout(store: &ParamStore, cfg: &ModelConfig, vocab_size: usize) -> Result<()> {
    let expected = layout(cfg, vocab_size);
    if expected.len() != store.len() {
        return Err(Error::Data(format!("checkpoint has {} tensors, the config needs {}", store.len(), expected.len())));
    }
    for (name, rows, cols, _) in expected {
        let t = store.by_name(&name).ok_or_else(|| Error::Data(format!("checkpoint lacks tensor `{name}`")))?;
        if t.shape() != [rows, cols] {
            return Err(Error::Data(format!("tensor `{name}` is {:?}, the config needs [{rows}, {cols}]", t.shape())));
        }
    }
    Ok(())
}

pub(crate) fn resolve_ids(store: &ParamStore) -> Result<ParamIds> {
    let id = |name: &str| store.id(name).ok_or_else(|| Error::Data(format!("missing parameter `{name}`")));
    let lstm = |prefix: &str| -> Result<LstmIds> { Ok(LstmIds { w: id(&format!("{prefix}.w"))?, b: id(&format!("{prefix}.b"))? }) };
    Ok(ParamIds {
        word: id("emb.word")?,
        enc_p_fw: lstm("enc_p.fw")?,
        enc_p_bw: lstm("enc_p.bw")?,
        enc_a_fw: lstm("enc_a.fw")?,
        enc_a_bw: lstm("enc_a.bw")?,
        level: id("emb.level")?,
        expert: id("emb.expert")?,
        bank: [id("bank.simple")?, id("bank.complex")?],
        init_h: lstm("init.h")?,
        init_c: lstm("init.c")?,
        att_ws: id("att.ws")?,
        att_wh: id("att.wh")?,
        att_v: id("att.v")?,
        gate_w: id("gate.w")?,
        gate_noise: id("gate.noise")?,
        dec_fc: lstm("dec.fc")?,
        dec_lstm: lstm("dec.lstm")?,
        out: lstm("out")?,
        ptr_wc: id("ptr.wc")?,
        ptr_ws: id("ptr.ws")?,
        ptr_wy: id("ptr.wy")?,
        ptr_b: id("ptr.b")?,
    })
}

/// Parameter-name prefixes, one per architectural group.
pub const PARAM_GROUPS: [&str; 12] =
    ["emb.word", "enc_p", "enc_a", "emb.level", "emb.expert", "bank", "init", "att", "gate", "dec", "out", "ptr"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_depends_on_name_not_neighbours() {
        let a = init_params(&ModelConfig { n_z: 1, ..ModelConfig::micro() }, 20);
        let b = init_params(&ModelConfig { n_z: 3, ..ModelConfig::micro() }, 20);
        for (_, name, t) in a.iter() {
            if name != "emb.expert" {
                assert_eq!(Some(t), b.by_name(name), "{name}");
            }
        }
        assert_eq!(b.by_name("emb.expert").unwrap().rows(), 3);
    }

    #[test]
    fn layout_check_and_ids() {
        let cfg = ModelConfig::micro();
        let s = init_params(&cfg, 20);
        check_layout(&s, &cfg, 20).unwrap();
        assert!(check_layout(&s, &cfg, 21).is_err());
        resolve_ids(&s).unwrap();
        let b = s.by_name("dec.lstm.b").unwrap();
        assert_eq!(&b.data()[8..16], &[1.0; 8]);
    }
}
