//! Finite-difference checks for every differentiable graph op on randomly
//! drawn small shapes, plus a few exact autodiff identities.

use ccqg::numerics::{grad_check, Graph, ParamStore, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type OpFn = fn(&mut Graph, Var, Var, &Shapes) -> ccqg::Result<Var>;

/// Shapes drawn for one trial: `a` is r x c; `b` is shaped per op.
struct Shapes {
    r: usize,
    c: usize,
    ids: Vec<usize>,
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Reduce to a scalar through fixed random weights so every output entry
/// carries a distinct gradient.
fn weighted_sum(g: &mut Graph, out: Var, seed: u64) -> ccqg::Result<Var> {
    let [r, c] = g.shape(out);
    let w = g.input(random(&mut ChaCha8Rng::seed_from_u64(seed), r, c, -1.0, 1.0));
    let prod = g.mul(out, w)?;
    Ok(g.sum(prod))
}

fn b_shape(op: &str, s: &Shapes) -> (usize, usize) {
    match op {
        "matmul" => (s.c, 3),
        "add_row" => (1, s.c),
        "mul_scalar" => (1, 1),
        "concat" => (s.r, 2),
        "stack_rows" => (2, s.c),
        _ => (s.r, s.c),
    }
}

fn ops() -> Vec<(&'static str, OpFn)> {
    vec![
        ("matmul", |g, a, b, _| g.matmul(a, b)),
        ("add", |g, a, b, _| g.add(a, b)),
        ("sub", |g, a, b, _| g.sub(a, b)),
        ("mul", |g, a, b, _| g.mul(a, b)),
        ("add_row", |g, a, b, _| g.add_row(a, b)),
        ("mul_scalar", |g, a, b, _| g.mul_scalar(a, b)),
        ("affine", |g, a, _, _| Ok(g.affine(a, -1.5, 0.25))),
        ("concat", |g, a, b, _| g.concat(&[a, b, a])),
        ("stack_rows", |g, a, b, _| g.stack_rows(&[a, b])),
        ("sigmoid", |g, a, _, _| Ok(g.sigmoid(a))),
        ("tanh", |g, a, _, _| Ok(g.tanh(a))),
        ("softplus", |g, a, _, _| Ok(g.softplus(a))),
        ("log", |g, _, b, _| Ok(g.log(b))),
        ("softmax", |g, a, _, _| Ok(g.softmax(a))),
        ("log_softmax", |g, a, _, _| Ok(g.log_softmax(a))),
        ("logsumexp", |g, a, _, _| Ok(g.logsumexp(a))),
        ("lookup", |g, a, _, s| g.lookup(a, &s.ids)),
        ("row_slice", |g, a, _, s| g.row_slice(a, s.r / 2, s.r)),
        ("col_slice", |g, a, _, s| g.col_slice(a, 0, s.c.div_ceil(2))),
        ("transpose", |g, a, _, _| Ok(g.transpose(a))),
        ("sum", |g, a, _, _| Ok(g.sum(a))),
        ("pick", |g, a, _, s| g.pick(a, s.r - 1, s.c - 1)),
        ("nll", |g, a, _, s| {
            let lp = g.log_softmax(a);
            let targets: Vec<usize> = (0..s.r).map(|i| s.ids[i % s.ids.len()] % s.c).collect();
            g.nll(lp, &targets)
        }),
        ("mask_keep", |g, a, _, s| {
            // One flag per entry; column 0 of every row stays so no row is empty.
            let keep: Vec<bool> = (0..s.r * s.c).map(|i| (i % s.c) % 2 == 0).collect();
            let m = g.mask_keep(a, &keep)?;
            Ok(g.softmax(m))
        }),
        ("scatter_cols", |g, a, _, s| {
            let row = g.row_slice(a, 0, 1)?;
            let targets: Vec<usize> = (0..s.c).map(|j| (j * 2) % (s.c + 1)).collect();
            g.scatter_cols(row, &targets, s.c + 2)
        }),
        ("pad_cols", |g, a, _, s| {
            let row = g.row_slice(a, 0, 1)?;
            g.pad_cols(row, s.c + 2)
        }),
    ]
}

#[test]
fn every_op_passes_grad_check_on_random_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (op, f) in ops() {
        for trial in 0..4 {
            let (r, c) = (rng.random_range(1..5), rng.random_range(1..6));
            let ids = (0..rng.random_range(1..5)).map(|_| rng.random_range(0..r)).collect();
            let shapes = Shapes { r, c, ids };
            let (br, bc) = b_shape(op, &shapes);
            let mut store = ParamStore::new();
            let a = store.add("a", random(&mut rng, r, c, -2.0, 2.0)).unwrap();
            // `log` reads `b`, so keep it positive.
            let b = store.add("b", random(&mut rng, br, bc, 0.5, 2.0)).unwrap();
            let report = grad_check(&mut store, &[a, b], 1e-6, |s, g| {
                let (va, vb) = (g.param(s, a), g.param(s, b));
                let out = f(g, va, vb, &shapes)?;
                weighted_sum(g, out, trial)
            })
            .unwrap_or_else(|e| panic!("{op}: {e}"));
            assert!(report.max_rel_error < 1e-4, "{op} trial {trial} ({r}x{c}): {report:?}");
        }
    }
}

#[test]
fn diamond_accumulates_both_paths() {
    // y = sum(x * x + x); dy/dx = 2x + 1.
    let mut g = Graph::new();
    let x = g.input(Tensor::row(vec![0.5, -3.0, 2.0]));
    let sq = g.mul(x, x).unwrap();
    let y = g.add(sq, x).unwrap();
    let l = g.sum(y);
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.wrt(x).unwrap().data(), &[2.0, -5.0, 5.0]);
}

#[test]
fn identity_matmul_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random(&mut rng, 3, 4, -10.0, 10.0);
    let mut eye = Tensor::zeros(3, 3);
    for i in 0..3 {
        eye.data_mut()[i * 3 + i] = 1.0;
    }
    let mut g = Graph::new();
    let (vi, va) = (g.input(eye), g.input(a.clone()));
    let p = g.matmul(vi, va).unwrap();
    assert_eq!(g.value(p), &a);
}

#[test]
fn shared_param_gradients_add_up() {
    // The same parameter read twice through `param` is one node, so its
    // gradient collects both uses: d/dw sum(w * w) = 2w.
    let mut store = ParamStore::new();
    let id = store.add("w", Tensor::row(vec![1.5, -0.5])).unwrap();
    let mut g = Graph::new();
    let (w1, w2) = (g.param(&store, id), g.param(&store, id));
    let prod = g.mul(w1, w2).unwrap();
    let l = g.sum(prod);
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.params(), &[(id, Tensor::row(vec![3.0, -1.0]))]);
}
