use std::collections::HashMap;

use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulScalar(Var, Var),
    Affine(Var, f64),
    Concat(Vec<Var>),
    StackRows(Vec<Var>),
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Log(Var),
    Lookup(Var, Vec<usize>),
    RowSlice(Var, usize),
    ColSlice(Var, usize),
    Transpose(Var),
    LogSumExp(Var),
    Nll(Var, Vec<usize>),
    Sum(Var),
    Pick(Var, usize, usize),
    MaskKeep(Var, Vec<bool>),
    ScatterCols(Var, Vec<usize>),
    PadCols(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A tape of tensor operations. Nodes are appended in evaluation order, so
/// reverse index order is a valid reverse topological order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Gradients of a scalar with respect to every node of a graph.
#[derive(Debug)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<(ParamId, Tensor)>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].as_ref()
    }

    /// Gradient per parameter that took part in the computation.
    pub fn params(&self) -> &[(ParamId, Tensor)] {
        &self.params
    }

    pub fn into_params(self) -> Vec<(ParamId, Tensor)> {
        self.params
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn row_logsumexp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    /// A constant: receives a gradient but has no parents.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input)
    }

    /// The parameter's current value; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn zip_with(&mut self, op_name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape(op_name, ta, tb)?;
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(ta.rows(), ta.cols(), data)?;
        Ok(self.push(out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a `1 x n` bias row to every row of an `m x n` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(Error::shape("add_row", format!("{:?} + {:?}", ta.shape(), tb.shape())));
        }
        let n = ta.cols();
        let data = ta.data().iter().enumerate().map(|(i, &x)| x + tb.data()[i % n]).collect();
        let out = Tensor::new(ta.rows(), n, data)?;
        Ok(self.push(out, Op::AddRow(a, bias)))
    }

    /// Multiplies every entry of `a` by the `1 x 1` tensor `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.shape(s) != [1, 1] {
            return Err(Error::shape("mul_scalar", format!("scalar operand is {:?}", self.shape(s))));
        }
        let k = self.value(s).item();
        let out = self.value(a).map(|x| x * k);
        Ok(self.push(out, Op::MulScalar(a, s)))
    }

    /// `scale * a + shift` with constant coefficients.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let out = self.value(a).map(|x| scale * x + shift);
        self.push(out, Op::Affine(a, scale))
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat", "no operands"));
        };
        let rows = self.shape(first)[0];
        if let Some(bad) = parts.iter().find(|&&p| self.shape(p)[0] != rows) {
            return Err(Error::shape("concat", format!("row counts {} vs {}", rows, self.shape(*bad)[0])));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::new(rows, cols, data)?;
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    /// Vertical concatenation of operands with equal column counts.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("stack_rows", "no operands"));
        };
        let cols = self.shape(first)[1];
        if let Some(bad) = parts.iter().find(|&&p| self.shape(p)[1] != cols) {
            return Err(Error::shape("stack_rows", format!("column counts {} vs {}", cols, self.shape(*bad)[1])));
        }
        let rows: usize = parts.iter().map(|&p| self.shape(p)[0]).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::new(rows, cols, data)?;
        Ok(self.push(out, Op::StackRows(parts.to_vec())))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(softplus);
        self.push(out, Op::Softplus(a))
    }

    /// Natural log, elementwise.
    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Log(a))
    }

    /// Row-wise softmax. Entries equal to `-inf` get probability 0.
    pub fn softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut data = Vec::with_capacity(t.len());
        for r in 0..t.rows() {
            let row = t.row_slice(r);
            let lse = row_logsumexp(row);
            data.extend(row.iter().map(|&x| (x - lse).exp()));
        }
        let out = Tensor::new(t.rows(), t.cols(), data).expect("same shape");
        self.push(out, Op::Softmax(a))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut data = Vec::with_capacity(t.len());
        for r in 0..t.rows() {
            let row = t.row_slice(r);
            let lse = row_logsumexp(row);
            data.extend(row.iter().map(|&x| x - lse));
        }
        let out = Tensor::new(t.rows(), t.cols(), data).expect("same shape");
        self.push(out, Op::LogSoftmax(a))
    }

    /// Row-wise log-sum-exp, giving an `m x 1` column.
    pub fn logsumexp(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data = (0..t.rows()).map(|r| row_logsumexp(t.row_slice(r))).collect();
        let out = Tensor::new(t.rows(), 1, data).expect("column");
        self.push(out, Op::LogSumExp(a))
    }

    /// Gathers rows of `table` (an embedding lookup).
    pub fn lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::shape("lookup", format!("row {bad} of a {}-row table", t.rows())));
        }
        let mut data = Vec::with_capacity(ids.len() * t.cols());
        for &i in ids {
            data.extend_from_slice(t.row_slice(i));
        }
        let out = Tensor::new(ids.len(), t.cols(), data)?;
        Ok(self.push(out, Op::Lookup(table, ids.to_vec())))
    }

    /// Rows `start..end`.
    pub fn row_slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        if start >= end || end > t.rows() {
            return Err(Error::shape("row_slice", format!("{start}..{end} of {:?}", t.shape())));
        }
        let data = t.data()[start * t.cols()..end * t.cols()].to_vec();
        let out = Tensor::new(end - start, t.cols(), data)?;
        Ok(self.push(out, Op::RowSlice(a, start)))
    }

    /// Columns `start..end`.
    pub fn col_slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        if start >= end || end > t.cols() {
            return Err(Error::shape("col_slice", format!("{start}..{end} of {:?}", t.shape())));
        }
        let mut data = Vec::with_capacity(t.rows() * (end - start));
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row_slice(r)[start..end]);
        }
        let out = Tensor::new(t.rows(), end - start, data)?;
        Ok(self.push(out, Op::ColSlice(a, start)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    /// Sum of all entries, as `1 x 1`.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(out, Op::Sum(a))
    }

    /// Entry `(r, c)` as `1 x 1`.
    pub fn pick(&mut self, a: Var, r: usize, c: usize) -> Result<Var> {
        let t = self.value(a);
        if r >= t.rows() || c >= t.cols() {
            return Err(Error::shape("pick", format!("({r}, {c}) of {:?}", t.shape())));
        }
        let out = Tensor::scalar(t.get(r, c));
        Ok(self.push(out, Op::Pick(a, r, c)))
    }

    /// Negative log-likelihood `-sum_r a[r, targets[r]]` of log-probability rows.
    pub fn nll(&mut self, log_probs: Var, targets: &[usize]) -> Result<Var> {
        let t = self.value(log_probs);
        if targets.len() != t.rows() || targets.iter().any(|&c| c >= t.cols()) {
            return Err(Error::shape("nll", format!("{} targets for {:?}", targets.len(), t.shape())));
        }
        let loss = -targets.iter().enumerate().map(|(r, &c)| t.get(r, c)).sum::<f64>();
        Ok(self.push(Tensor::scalar(loss), Op::Nll(log_probs, targets.to_vec())))
    }

    /// Replaces entries where `keep` is false with `-inf`.
    pub fn mask_keep(&mut self, a: Var, keep: &[bool]) -> Result<Var> {
        let t = self.value(a);
        if keep.len() != t.len() {
            return Err(Error::shape("mask_keep", format!("{} flags for {:?}", keep.len(), t.shape())));
        }
        let data = t.data().iter().zip(keep).map(|(&x, &k)| if k { x } else { f64::NEG_INFINITY }).collect();
        let out = Tensor::new(t.rows(), t.cols(), data)?;
        Ok(self.push(out, Op::MaskKeep(a, keep.to_vec())))
    }

    /// Sums the columns of a `1 x n` row into a `1 x width` row:
    /// `out[targets[i]] += a[i]`.
    pub fn scatter_cols(&mut self, a: Var, targets: &[usize], width: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rows() != 1 || targets.len() != t.cols() || targets.iter().any(|&c| c >= width) {
            return Err(Error::shape("scatter_cols", format!("{:?} into width {width}", t.shape())));
        }
        let mut data = vec![0.0; width];
        for (&x, &c) in t.data().iter().zip(targets) {
            data[c] += x;
        }
        Ok(self.push(Tensor::row(data), Op::ScatterCols(a, targets.to_vec())))
    }

    /// Right-pads a `1 x n` row with zeros to `1 x width`.
    pub fn pad_cols(&mut self, a: Var, width: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rows() != 1 || width < t.cols() {
            return Err(Error::shape("pad_cols", format!("{:?} to width {width}", t.shape())));
        }
        let mut data = t.data().to_vec();
        data.resize(width, 0.0);
        Ok(self.push(Tensor::row(data), Op::PadCols(a)))
    }

    /// Reverse-mode sweep from a `1 x 1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != [1, 1] {
            return Err(Error::shape("backward", format!("loss must be 1x1, got {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Input | Op::Param => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.matmul(&tb.transpose())?);
                    acc(&mut grads, *b, ta.transpose().matmul(&g)?);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.map(|x| -x));
                }
                Op::AddRow(a, bias) => {
                    let n = g.cols();
                    let mut gb = vec![0.0; n];
                    for (i, &x) in g.data().iter().enumerate() {
                        gb[i % n] += x;
                    }
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *bias, Tensor::row(gb));
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = zip(&g, tb, |gi, bi| gi * bi);
                    let gb = zip(&g, ta, |gi, ai| gi * ai);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MulScalar(a, s) => {
                    let k = self.value(*s).item();
                    let ta = self.value(*a);
                    let gs: f64 = g.data().iter().zip(ta.data()).map(|(gi, ai)| gi * ai).sum();
                    acc(&mut grads, *a, g.map(|x| x * k));
                    acc(&mut grads, *s, Tensor::scalar(gs));
                }
                Op::Affine(a, scale) => acc(&mut grads, *a, g.map(|x| x * scale)),
                Op::Concat(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.shape(p)[1];
                        let mut data = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            data.extend_from_slice(&g.row_slice(r)[offset..offset + w]);
                        }
                        acc(&mut grads, p, Tensor::new(rows, w, data)?);
                        offset += w;
                    }
                }
                Op::StackRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.shape(p)[0] * cols;
                        acc(&mut grads, p, Tensor::new(n / cols, cols, g.data()[offset..offset + n].to_vec())?);
                        offset += n;
                    }
                }
                Op::Sigmoid(a) => acc(&mut grads, *a, zip(&g, y, |gi, yi| gi * yi * (1.0 - yi))),
                Op::Tanh(a) => acc(&mut grads, *a, zip(&g, y, |gi, yi| gi * (1.0 - yi * yi))),
                Op::Softplus(a) => acc(&mut grads, *a, zip(&g, self.value(*a), |gi, xi| gi * sigmoid(xi))),
                Op::Log(a) => acc(&mut grads, *a, zip(&g, self.value(*a), |gi, xi| gi / xi)),
                Op::Softmax(a) => {
                    let mut data = Vec::with_capacity(y.len());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        data.extend(yr.iter().zip(gr).map(|(yi, gi)| yi * (gi - dot)));
                    }
                    acc(&mut grads, *a, Tensor::new(y.rows(), y.cols(), data)?);
                }
                Op::LogSoftmax(a) => {
                    let mut data = Vec::with_capacity(y.len());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                        let total: f64 = gr.iter().sum();
                        data.extend(yr.iter().zip(gr).map(|(yi, gi)| gi - yi.exp() * total));
                    }
                    acc(&mut grads, *a, Tensor::new(y.rows(), y.cols(), data)?);
                }
                Op::LogSumExp(a) => {
                    let x = self.value(*a);
                    let mut data = Vec::with_capacity(x.len());
                    for r in 0..x.rows() {
                        let (lse, gr) = (y.get(r, 0), g.get(r, 0));
                        data.extend(x.row_slice(r).iter().map(|&xi| gr * (xi - lse).exp()));
                    }
                    acc(&mut grads, *a, Tensor::new(x.rows(), x.cols(), data)?);
                }
                Op::Lookup(table, ids) => {
                    let t = self.value(*table);
                    let mut gt = Tensor::zeros(t.rows(), t.cols());
                    let c = t.cols();
                    for (r, &i) in ids.iter().enumerate() {
                        let dst = &mut gt.data_mut()[i * c..(i + 1) * c];
                        for (d, s) in dst.iter_mut().zip(g.row_slice(r)) {
                            *d += s;
                        }
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::RowSlice(a, start) => {
                    let t = self.value(*a);
                    let mut ga = Tensor::zeros(t.rows(), t.cols());
                    let c = t.cols();
                    ga.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                    acc(&mut grads, *a, ga);
                }
                Op::ColSlice(a, start) => {
                    let t = self.value(*a);
                    let mut ga = Tensor::zeros(t.rows(), t.cols());
                    let (c, w) = (t.cols(), g.cols());
                    for r in 0..t.rows() {
                        ga.data_mut()[r * c + start..r * c + start + w].copy_from_slice(g.row_slice(r));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::Sum(a) => {
                    let [r, c] = self.shape(*a);
                    acc(&mut grads, *a, Tensor::filled(r, c, g.item()));
                }
                Op::Pick(a, r, c) => {
                    let [rows, cols] = self.shape(*a);
                    let mut ga = Tensor::zeros(rows, cols);
                    ga.data_mut()[r * cols + c] = g.item();
                    acc(&mut grads, *a, ga);
                }
                Op::Nll(a, targets) => {
                    let [rows, cols] = self.shape(*a);
                    let mut ga = Tensor::zeros(rows, cols);
                    for (r, &c) in targets.iter().enumerate() {
                        ga.data_mut()[r * cols + c] = -g.item();
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::MaskKeep(a, keep) => {
                    let data = g.data().iter().zip(keep).map(|(&gi, &k)| if k { gi } else { 0.0 }).collect();
                    acc(&mut grads, *a, Tensor::new(g.rows(), g.cols(), data)?);
                }
                Op::ScatterCols(a, targets) => {
                    let data = targets.iter().map(|&c| g.data()[c]).collect();
                    acc(&mut grads, *a, Tensor::row(data));
                }
                Op::PadCols(a) => {
                    let n = self.shape(*a)[1];
                    acc(&mut grads, *a, Tensor::row(g.data()[..n].to_vec()));
                }
            }
            grads[idx] = Some(g);
        }

        let mut params: Vec<(ParamId, Tensor)> = self
            .params
            .iter()
            .filter_map(|(&id, &v)| grads[v.0].clone().map(|g| (id, g)))
            .collect();
        params.sort_by_key(|(id, _)| *id);
        Ok(Gradients { nodes: grads, params })
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.rows(), a.cols(), data).expect("operands share a shape")
}
