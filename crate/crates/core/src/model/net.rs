//! Graph-building forward pass. Every function here appends nodes to a
//! caller-owned [`Graph`], reading parameters from an explicit store so that
//! gradient checks can perturb a copy.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::params::{LstmIds, ParamIds};
use super::{ModelConfig, ModelInput};
use crate::dataset::{EOS, SOS, UNK};
use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamStore, Tensor, Var};

/// Encoder outputs for one input, as nodes of a graph.
#[derive(Debug, Clone, Copy)]
pub struct Encoding {
    /// Per-position passage states, `n x hidden`.
    pub states: Var,
    /// `states * W_h`, hoisted out of the decoding loop.
    projected: Var,
    /// State at the last passage position.
    pub final_state: Var,
    /// Final forward and backward answer states, concatenated.
    pub answer: Var,
    pub level: Var,
    level_index: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    pub h: Var,
    pub c: Var,
    pub context: Var,
    pub attention: Var,
    /// Sparse gate weights, absent when templates are disabled.
    pub gate: Option<Var>,
}

/// The outputs of one bidirectional pass.
#[derive(Debug, Clone, Copy)]
pub struct BiEncoding {
    pub states: Var,
    pub forward_final: Var,
    pub backward_final: Var,
}

/// Keeps the `k` largest logits (ties to the lower index), masks the rest
/// to `-inf` and softmaxes the survivors.
pub fn top_k_gate(g: &mut Graph, logits: Var, k: usize) -> Result<Var> {
    let values = g.value(logits).data().to_vec();
    if k == 0 || k > values.len() {
        return Err(Error::Invalid(format!("top-k must lie in 1..={}, got {k}", values.len())));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut keep = vec![false; values.len()];
    for &i in &order[..k] {
        keep[i] = true;
    }
    let masked = g.mask_keep(logits, &keep)?;
    Ok(g.softmax(masked))
}

/// `p_gen * pad(p_vocab) + (1 - p_gen) * scatter(attention)` over the
/// extended vocabulary of width `ext_size`.
pub fn mix_pointer(g: &mut Graph, p_vocab: Var, p_gen: Var, attention: Var, passage_ext: &[usize], ext_size: usize) -> Result<Var> {
    let padded = g.pad_cols(p_vocab, ext_size)?;
    let copy = g.scatter_cols(attention, passage_ext, ext_size)?;
    let gen = g.mul_scalar(padded, p_gen)?;
    let p_copy = g.affine(p_gen, -1.0, 1.0);
    let copied = g.mul_scalar(copy, p_copy)?;
    g.add(gen, copied)
}

pub struct Net<'a> {
    pub(crate) cfg: &'a ModelConfig,
    pub(crate) ids: &'a ParamIds,
    pub(crate) store: &'a ParamStore,
}

impl Net<'_> {
    fn zeros(&self, g: &mut Graph, cols: usize) -> Var {
        g.input(Tensor::zeros(1, cols))
    }

    pub fn vocab_size(&self) -> usize {
        self.store.get(self.ids.word).rows()
    }

    fn lstm_cell(&self, g: &mut Graph, p: LstmIds, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let n = g.shape(h)[1];
        let xh = g.concat(&[x, h])?;
        let w = g.param(self.store, p.w);
        let b = g.param(self.store, p.b);
        let z = g.matmul(xh, w)?;
        let z = g.add_row(z, b)?;
        let zi = g.col_slice(z, 0, n)?;
        let zf = g.col_slice(z, n, 2 * n)?;
        let zg = g.col_slice(z, 2 * n, 3 * n)?;
        let zo = g.col_slice(z, 3 * n, 4 * n)?;
        let (i, f, cand, o) = (g.sigmoid(zi), g.sigmoid(zf), g.tanh(zg), g.sigmoid(zo));
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        let c_next = g.add(keep, write)?;
        let squashed = g.tanh(c_next);
        let h_next = g.mul(o, squashed)?;
        Ok((h_next, c_next))
    }

    fn affine_layer(&self, g: &mut Graph, p: LstmIds, x: Var) -> Result<Var> {
        let w = g.param(self.store, p.w);
        let b = g.param(self.store, p.b);
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }

    /// Runs both directions of one encoder over `ids`.
    pub fn bilstm_encode(&self, g: &mut Graph, ids: &[usize], passage: bool) -> Result<BiEncoding> {
        if ids.is_empty() {
            return Err(Error::Invalid(format!("cannot encode an empty {}", if passage { "passage" } else { "answer" })));
        }
        let (fw, bw) = if passage { (self.ids.enc_p_fw, self.ids.enc_p_bw) } else { (self.ids.enc_a_fw, self.ids.enc_a_bw) };
        let half = self.cfg.hidden / 2;
        let table = g.param(self.store, self.ids.word);
        let emb = g.lookup(table, ids)?;
        let xs: Vec<Var> = (0..ids.len()).map(|t| g.row_slice(emb, t, t + 1)).collect::<Result<_>>()?;

        let zero = self.zeros(g, half);
        let (mut h, mut c) = (zero, zero);
        let mut fw_states = Vec::with_capacity(xs.len());
        for &x in &xs {
            (h, c) = self.lstm_cell(g, fw, x, h, c)?;
            fw_states.push(h);
        }
        let (mut h, mut c) = (zero, zero);
        let mut bw_states = vec![zero; xs.len()];
        for t in (0..xs.len()).rev() {
            (h, c) = self.lstm_cell(g, bw, xs[t], h, c)?;
            bw_states[t] = h;
        }
        let rows: Vec<Var> = fw_states.iter().zip(&bw_states).map(|(&f, &b)| g.concat(&[f, b])).collect::<Result<_>>()?;
        let states = g.stack_rows(&rows)?;
        Ok(BiEncoding { states, forward_final: *fw_states.last().expect("nonempty"), backward_final: bw_states[0] })
    }

    pub fn encode(&self, g: &mut Graph, input: &ModelInput) -> Result<Encoding> {
        let p = self.bilstm_encode(g, &input.passage, true)?;
        let a = self.bilstm_encode(g, &input.answer, false)?;
        let n = input.passage.len();
        let final_state = g.row_slice(p.states, n - 1, n)?;
        let answer = g.concat(&[a.forward_final, a.backward_final])?;
        let levels = g.param(self.store, self.ids.level);
        let level = g.lookup(levels, &[input.level.index()])?;
        let wh = g.param(self.store, self.ids.att_wh);
        let projected = g.matmul(p.states, wh)?;
        Ok(Encoding { states: p.states, projected, final_state, answer, level, level_index: input.level.index() })
    }

    /// The expert embedding, or zeros when the mixture is disabled.
    pub fn expert(&self, g: &mut Graph, z: usize) -> Result<Var> {
        if z >= self.cfg.n_z {
            return Err(Error::Invalid(format!("expert {z} out of range for n_z = {}", self.cfg.n_z)));
        }
        if !self.cfg.use_moe {
            return Ok(self.zeros(g, self.cfg.expert_dim));
        }
        let table = g.param(self.store, self.ids.expert);
        g.lookup(table, &[z])
    }

    /// `s_0` and the initial cell from `[h_n, e_a, e_d, e_z]`.
    pub fn init_state(&self, g: &mut Graph, enc: &Encoding, e_z: Var) -> Result<(Var, Var)> {
        let u = g.concat(&[enc.final_state, enc.answer, enc.level, e_z])?;
        let h = self.affine_layer(g, self.ids.init_h, u)?;
        let c = self.affine_layer(g, self.ids.init_c, u)?;
        Ok((g.tanh(h), g.tanh(c)))
    }

    /// Additive attention of the previous decoder state over the passage.
    pub fn attention_context(&self, g: &mut Graph, s_prev: Var, enc: &Encoding) -> Result<(Var, Var)> {
        let ws = g.param(self.store, self.ids.att_ws);
        let v = g.param(self.store, self.ids.att_v);
        let query = g.matmul(s_prev, ws)?;
        let pre = g.add_row(enc.projected, query)?;
        let act = g.tanh(pre);
        let scores = g.matmul(act, v)?;
        let scores = g.transpose(scores);
        let alpha = g.softmax(scores);
        let context = g.matmul(alpha, enc.states)?;
        Ok((context, alpha))
    }

    /// Noisy top-k gating over the level's template bank.
    pub fn template_context(
        &self,
        g: &mut Graph,
        context: Var,
        enc: &Encoding,
        e_z: Var,
        noise: Option<&mut ChaCha8Rng>,
    ) -> Result<(Var, Option<Var>)> {
        if !self.cfg.use_templates {
            return Ok((self.zeros(g, self.cfg.template_dim), None));
        }
        let u = g.concat(&[context, enc.answer, enc.level, e_z])?;
        let wg = g.param(self.store, self.ids.gate_w);
        let mut logits = g.matmul(u, wg)?;
        if let Some(rng) = noise {
            let wn = g.param(self.store, self.ids.gate_noise);
            let raw = g.matmul(u, wn)?;
            let scale = g.softplus(raw);
            let xi: Vec<f64> = (0..self.cfg.n_pi).map(|_| StandardNormal.sample(rng)).collect();
            let xi = g.input(Tensor::row(xi));
            let jitter = g.mul(xi, scale)?;
            logits = g.add(logits, jitter)?;
        }
        let weights = top_k_gate(g, logits, self.cfg.top_k)?;
        let bank = g.param(self.store, self.ids.bank[enc.level_index]);
        Ok((g.matmul(weights, bank)?, Some(weights)))
    }

    /// One decoder update from the embedding of the previous token.
    #[allow(clippy::too_many_arguments)]
    pub fn decoder_step(
        &self,
        g: &mut Graph,
        y_prev: Var,
        h: Var,
        c: Var,
        enc: &Encoding,
        e_z: Var,
        noise: Option<&mut ChaCha8Rng>,
    ) -> Result<StepOutput> {
        let (context, attention) = self.attention_context(g, h, enc)?;
        let (c_pi, gate) = self.template_context(g, context, enc, e_z, noise)?;
        let joined = g.concat(&[y_prev, context, c_pi, e_z])?;
        let x = self.affine_layer(g, self.ids.dec_fc, joined)?;
        let (h, c) = self.lstm_cell(g, self.ids.dec_lstm, x, h, c)?;
        Ok(StepOutput { h, c, context, attention, gate })
    }

    /// Vocabulary softmax and generation probability for one step.
    pub fn vocab_and_gate(&self, g: &mut Graph, step: &StepOutput, y_prev: Var) -> Result<(Var, Var)> {
        let features = g.concat(&[step.h, step.context])?;
        let logits = self.affine_layer(g, self.ids.out, features)?;
        let p_vocab = g.softmax(logits);
        let wc = g.param(self.store, self.ids.ptr_wc);
        let ws = g.param(self.store, self.ids.ptr_ws);
        let wy = g.param(self.store, self.ids.ptr_wy);
        let b = g.param(self.store, self.ids.ptr_b);
        let a = g.matmul(step.context, wc)?;
        let s = g.matmul(step.h, ws)?;
        let y = g.matmul(y_prev, wy)?;
        let sum = g.add(a, s)?;
        let sum = g.add(sum, y)?;
        let sum = g.add(sum, b)?;
        Ok((p_vocab, g.sigmoid(sum)))
    }

    pub fn output_distribution(&self, g: &mut Graph, step: &StepOutput, y_prev: Var, input: &ModelInput) -> Result<Var> {
        let (p_vocab, p_gen) = self.vocab_and_gate(g, step, y_prev)?;
        mix_pointer(g, p_vocab, p_gen, step.attention, &input.passage_ext, self.vocab_size() + input.oov.len())
    }

    /// `ln P(target)` without materialising the extended distribution.
    fn token_log_prob(&self, g: &mut Graph, step: &StepOutput, y_prev: Var, input: &ModelInput, target: usize) -> Result<Var> {
        let (p_vocab, p_gen) = self.vocab_and_gate(g, step, y_prev)?;
        let mut prob = None;
        if target < self.vocab_size() {
            let pv = g.pick(p_vocab, 0, target)?;
            prob = Some(g.mul(pv, p_gen)?);
        }
        if input.passage_ext.contains(&target) {
            let hits: Vec<f64> = input.passage_ext.iter().map(|&x| if x == target { 1.0 } else { 0.0 }).collect();
            let hits = g.input(Tensor::new(hits.len(), 1, hits)?);
            let mass = g.matmul(step.attention, hits)?;
            let p_copy = g.affine(p_gen, -1.0, 1.0);
            let copied = g.mul(mass, p_copy)?;
            prob = Some(match prob {
                Some(p) => g.add(p, copied)?,
                None => copied,
            });
        }
        let prob = prob.ok_or_else(|| Error::Invalid(format!("target id {target} is outside the extended vocabulary")))?;
        Ok(g.log(prob))
    }

    /// Decoder input ids for teacher forcing: `SOS` then the gold prefix,
    /// with copied out-of-vocabulary ids replaced by `UNK`.
    fn teacher_inputs(&self, target: &[usize]) -> Vec<usize> {
        let v = self.vocab_size();
        std::iter::once(SOS).chain(target[..target.len() - 1].iter().map(|&t| if t >= v { UNK } else { t })).collect()
    }

    /// `log p(Y | X, A, d, z)` under teacher forcing, decoding from an
    /// existing encoding.
    pub fn decode_log_prob(
        &self,
        g: &mut Graph,
        enc: &Encoding,
        input: &ModelInput,
        target: &[usize],
        z: usize,
        mut noise: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        if target.last() != Some(&EOS) {
            return Err(Error::Invalid("target sequences must end with EOS".into()));
        }
        let e_z = self.expert(g, z)?;
        let (mut h, mut c) = self.init_state(g, enc, e_z)?;
        let table = g.param(self.store, self.ids.word);
        let embs = g.lookup(table, &self.teacher_inputs(target))?;
        let mut total: Option<Var> = None;
        for (t, &y) in target.iter().enumerate() {
            let y_prev = g.row_slice(embs, t, t + 1)?;
            let step = self.decoder_step(g, y_prev, h, c, enc, e_z, noise.as_deref_mut())?;
            let lp = self.token_log_prob(g, &step, y_prev, input, y)?;
            total = Some(match total {
                Some(acc) => g.add(acc, lp)?,
                None => lp,
            });
            (h, c) = (step.h, step.c);
        }
        Ok(total.expect("target is nonempty"))
    }

    pub fn sequence_log_prob(&self, g: &mut Graph, input: &ModelInput, target: &[usize], z: usize, noise: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let enc = self.encode(g, input)?;
        self.decode_log_prob(g, &enc, input, target, z, noise)
    }

    /// Greedy decoding under expert `z` with noise off. Returns extended
    /// ids (without the final EOS) and the per-token log-probabilities.
    pub fn greedy(&self, input: &ModelInput, z: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        let mut g = Graph::new();
        let enc = self.encode(&mut g, input)?;
        let e_z = self.expert(&mut g, z)?;
        let (mut h, mut c) = self.init_state(&mut g, &enc, e_z)?;
        let table = g.param(self.store, self.ids.word);
        let v = self.vocab_size();
        let mut prev = SOS;
        let (mut out, mut log_probs) = (Vec::new(), Vec::new());
        for _ in 0..self.cfg.max_decode_len {
            let y_prev = g.lookup(table, &[if prev >= v { UNK } else { prev }])?;
            let step = self.decoder_step(&mut g, y_prev, h, c, &enc, e_z, None)?;
            let dist = self.output_distribution(&mut g, &step, y_prev, input)?;
            let probs = g.value(dist).data();
            let (best, p) = probs
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p > acc.1 { (i, p) } else { acc });
            log_probs.push(p.ln());
            if best == EOS {
                break;
            }
            out.push(best);
            prev = best;
            (h, c) = (step.h, step.c);
        }
        Ok((out, log_probs))
    }
}
