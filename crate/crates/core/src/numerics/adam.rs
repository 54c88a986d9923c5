use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments per parameter plus the shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols())).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// One bias-corrected Adam update. Parameters without a gradient entry are
/// left untouched (their moments do not decay), and `frozen` parameters are
/// skipped.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &[(ParamId, Tensor)],
    state: &mut AdamState,
    cfg: &AdamConfig,
    frozen: &[ParamId],
) -> Result<()> {
    if state.m.len() != store.len() {
        return Err(Error::shape("adam_step", format!("state for {} params, store has {}", state.m.len(), store.len())));
    }
    for (id, g) in grads {
        if g.shape() != store.get(*id).shape() {
            return Err(Error::shape(
                "adam_step",
                format!("gradient {:?} for `{}` {:?}", g.shape(), store.name(*id), store.get(*id).shape()),
            ));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (id, g) in grads {
        if frozen.contains(id) {
            continue;
        }
        let m = state.m[id.0].data_mut();
        let v = state.v[id.0].data_mut();
        let p = store.get_mut(*id).data_mut();
        for i in 0..p.len() {
            let gi = g.data()[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(x: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("x", Tensor::scalar(x)).unwrap();
        (s, id)
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut s, id) = one_param(1.0);
        let mut st = AdamState::new(&s);
        let cfg = AdamConfig::default();
        adam_step(&mut s, &[(id, Tensor::scalar(-3.7))], &mut st, &cfg, &[]).unwrap();
        assert!((s.get(id).item() - (1.0 + cfg.lr)).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut s, id) = one_param(2.5);
        let mut st = AdamState::new(&s);
        adam_step(&mut s, &[(id, Tensor::scalar(0.0))], &mut st, &AdamConfig::default(), &[]).unwrap();
        assert_eq!(s.get(id).item(), 2.5);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn two_steps_match_hand_trace() {
        // g = 0.5 twice, lr = 0.1, default betas.
        // step 1: m = 0.05, v = 0.00025, m_hat = 0.5, v_hat = 0.25 -> delta = 0.1 * 0.5 / (0.5 + 1e-8)
        // step 2: m = 0.095, v = 0.00049975, m_hat = 0.095/0.19 = 0.5, v_hat = 0.00049975/0.001999 = 0.25
        let (mut s, id) = one_param(0.0);
        let mut st = AdamState::new(&s);
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        for _ in 0..2 {
            adam_step(&mut s, &[(id, Tensor::scalar(0.5))], &mut st, &cfg, &[]).unwrap();
        }
        let step1 = 0.1 * 0.5 / (0.5 + 1e-8);
        let m2: f64 = 0.9 * 0.05 + 0.1 * 0.5;
        let v2: f64 = 0.999 * 0.00025 + 0.001 * 0.25;
        let step2 = 0.1 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        assert!((s.get(id).item() + step1 + step2).abs() < 1e-15);
        assert!((st.m[0].item() - m2).abs() < 1e-15);
        assert!((st.v[0].item() - v2).abs() < 1e-18);
    }

    #[test]
    fn shape_mismatch_and_frozen() {
        let (mut s, id) = one_param(1.0);
        let mut st = AdamState::new(&s);
        assert!(adam_step(&mut s, &[(id, Tensor::row(vec![1.0, 2.0]))], &mut st, &AdamConfig::default(), &[]).is_err());
        adam_step(&mut s, &[(id, Tensor::scalar(1.0))], &mut st, &AdamConfig::default(), &[id]).unwrap();
        assert_eq!(s.get(id).item(), 1.0);
    }
}
