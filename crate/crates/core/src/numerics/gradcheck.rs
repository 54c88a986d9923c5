use super::{Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares reverse-mode gradients of the scalar built by `f` against
/// central differences with step `h`, over every entry of `params`.
/// Relative error is `|a - n| / max(1e-8, |a| + |n|)`.
pub fn grad_check<F>(store: &mut ParamStore, params: &[ParamId], h: f64, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore, &mut Graph) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let mut g = Graph::new();
    let loss = f(store, &mut g)?;
    let grads = g.backward(loss)?;
    let analytic: Vec<(ParamId, Vec<f64>)> = params
        .iter()
        .map(|&id| {
            let n = store.get(id).len();
            let v = grads.params().iter().find(|(p, _)| *p == id).map_or(vec![0.0; n], |(_, t)| t.data().to_vec());
            (id, v)
        })
        .collect();

    let mut eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let l = f(store, &mut g)?;
        Ok(g.value(l).item())
    };

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, analytic: 0.0, numeric: 0.0, checked: 0 };
    for (id, a_grad) in analytic {
        for (i, &a) in a_grad.iter().enumerate() {
            let orig = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = orig + h;
            let plus = eval(store);
            store.get_mut(id).data_mut()[i] = orig - h;
            let minus = eval(store);
            store.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * h);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                if rel >= report.max_rel_error {
                    report.max_rel_error = rel;
                    report.worst = Some((store.name(id).to_string(), i));
                    report.analytic = a;
                    report.numeric = numeric;
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn quadratic() {
        let mut s = ParamStore::new();
        let x = s.add("x", Tensor::scalar(3.0)).unwrap();
        let mut g = Graph::new();
        let v = g.param(&s, x);
        let sq = g.mul(v, v).unwrap();
        let grads = g.backward(sq).unwrap();
        assert_eq!(grads.params()[0].1.item(), 6.0);
        let r = grad_check(&mut s, &[x], 1e-5, |s, g| {
            let v = g.param(s, x);
            g.mul(v, v)
        })
        .unwrap();
        assert!((r.numeric - 6.0).abs() < 1e-6);
        assert!(r.max_rel_error < 1e-9);
    }

    #[test]
    fn zero_function() {
        let mut s = ParamStore::new();
        let x = s.add("x", Tensor::row(vec![1.0, 2.0])).unwrap();
        let r = grad_check(&mut s, &[x], 1e-5, |s, g| {
            let v = g.param(s, x);
            Ok(g.affine(v, 0.0, 0.0)).map(|z| g.sum(z))
        })
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
        assert_eq!(r.checked, 2);
    }
}
