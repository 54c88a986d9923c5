//! Acceptance checks for the primary component. Each criterion prints one
//! `PASS` or `FAIL` line; the process exits nonzero if any criterion fails.
//!
//! Expected values are derived by hand in the comments next to them rather
//! than recomputed with library code.

use std::time::{Duration, Instant};

use ccqg::annotation::{parse_conllu, AnnotationIndex};
use ccqg::dataset::synthetic::{pattern_corpus, pattern_label};
use ccqg::dataset::{build_vocab, read_jsonl, split_dataset, QAInstance};
use ccqg::estimator::{
    calibrate_threshold, compute_raw_features, cpx_score, evaluate_estimator, fit_normalizer, js_divergence, normalize,
    ComplexityFeatures, ComplexityLabel, F3Mode, FeatureOptions,
};
use ccqg::evaluation::{bleu4, evaluate_generator, rouge_l, sentence_bleu4, EvalReport};
use ccqg::model::{micro_gradcheck, micro_instance, Ccqg, ModelConfig};
use ccqg::numerics::Tensor;
use ccqg::training::{e_step, init_banks, train_loop, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

// ---------------------------------------------------------------------------
// Generator criteria
// ---------------------------------------------------------------------------

fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let report = micro_gradcheck(7, 1e-4).map_err(|e| e.to_string())?;
    let (model, _) = micro_instance(ModelConfig::micro(), 7).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(model.vocab().len() == 20, || format!("micro vocabulary has {} entries", model.vocab().len()))?;
    check(report.checked == model.params().num_values(), || {
        format!("checked {} of {} parameter entries", report.checked, model.params().num_values())
    })?;
    check(report.max_rel_error < 1e-4, || format!("max relative error {:.3e} at {:?}", report.max_rel_error, report.worst))?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("max_rel_error={:.2e} over {} entries in {:.1?}", report.max_rel_error, report.checked, elapsed))
}

fn pattern_model_config() -> ModelConfig {
    ModelConfig {
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
    }
}

fn pattern_train_config() -> TrainConfig {
    TrainConfig { lr: 0.001, max_epochs: 200, batch_size: 4, ..TrainConfig::default() }
}

/// Trains on `corpus` (which also serves as the dev set) and scores greedy
/// generations with the pattern oracle.
fn train_and_evaluate(corpus: &[QAInstance]) -> Result<(EvalReport, usize), String> {
    let err = |e: ccqg::Error| e.to_string();
    let cfg = pattern_train_config();
    let mut model = Ccqg::new(pattern_model_config(), build_vocab(corpus, 1000)).map_err(err)?;
    init_banks(&mut model, corpus, &cfg).map_err(err)?;
    let examples: Vec<_> = corpus.iter().map(|i| model.example(i)).collect::<Result<_, _>>().map_err(err)?;
    let report = train_loop(&mut model, &examples, &[], &cfg).map_err(err)?;
    let (eval, _) = evaluate_generator(&model, corpus, |_, q| Ok(pattern_label(q))).map_err(err)?;
    Ok((eval, report.epochs.len()))
}

fn overfit_check() -> Outcome {
    let start = Instant::now();
    let corpus = pattern_corpus(16, 1);
    check(corpus.len() == 32, || format!("{} quadruples", corpus.len()))?;
    let (eval, epochs) = train_and_evaluate(&corpus)?;
    let elapsed = start.elapsed();
    check(eval.bleu4 >= 0.90, || format!("BLEU-4 {:.4} after {epochs} epochs", eval.bleu4))?;
    check(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!("BLEU-4={:.4} after {epochs} epochs in {:.1?}", eval.bleu4, elapsed))
}

fn complexity_control() -> Outcome {
    let corpus = pattern_corpus(50, 2);
    let (eval, epochs) = train_and_evaluate(&corpus)?;
    let consistency = eval.consistency.ok_or("no consistency score")?;
    let diversity = eval.diversity.ok_or("no diversity score")?;
    check(consistency.macro_f1 >= 0.90, || format!("consistency macro-F1 {:.4}", consistency.macro_f1))?;
    check(diversity >= 0.3, || format!("diversity {diversity:.4}"))?;
    Ok(format!("50 inputs, {epochs} epochs: consistency macro-F1={:.4} diversity={diversity:.4}", consistency.macro_f1))
}

fn ablation_contract() -> Outcome {
    let err = |e: ccqg::Error| e.to_string();
    let corpus = pattern_corpus(4, 3);
    let vocab = build_vocab(&corpus, 200);
    let small = ModelConfig { hidden: 8, word_dim: 6, level_dim: 3, expert_dim: 3, template_dim: 4, n_pi: 3, top_k: 2, ..ModelConfig::micro() };
    let cfg = TrainConfig { lr: 0.01, max_epochs: 3, batch_size: 2, ..TrainConfig::default() };

    // Mixture off: train with one and with three experts, then compare.
    let run = |n_z: usize| -> Result<(Vec<(Vec<String>, Vec<f64>)>, Vec<f64>), String> {
        let mut m = Ccqg::new(ModelConfig { n_z, use_moe: false, ..small.clone() }, vocab.clone()).map_err(err)?;
        init_banks(&mut m, &corpus, &cfg).map_err(err)?;
        let ex: Vec<_> = corpus.iter().map(|i| m.example(i)).collect::<Result<_, _>>().map_err(err)?;
        train_loop(&mut m, &ex, &[], &cfg).map_err(err)?;
        let mut gens = Vec::new();
        let mut nll = Vec::new();
        for e in &ex {
            let g = m.generate(&e.input).map_err(err)?;
            gens.push((g.tokens, vec![g.scores[g.expert]]));
            nll.push(m.sequence_log_prob(e, 0).map_err(err)?);
        }
        Ok((gens, nll))
    };
    let (one, three) = (run(1)?, run(3)?);
    check(one == three, || "use_moe = false: outputs differ between n_z = 1 and n_z = 3".into())?;

    // Templates off: random bank contents must not matter.
    let base = Ccqg::new(ModelConfig { use_templates: false, ..small.clone() }, vocab.clone()).map_err(err)?;
    let ex: Vec<_> = corpus.iter().map(|i| base.example(i)).collect::<Result<_, _>>().map_err(err)?;
    let outputs = |m: &Ccqg| -> Result<Vec<(Vec<String>, Vec<f64>, Vec<f64>)>, String> {
        ex.iter()
            .map(|e| {
                let g = m.generate(&e.input).map_err(err)?;
                Ok((g.tokens, g.scores, m.expert_log_probs(e).map_err(err)?))
            })
            .collect()
    };
    let reference = outputs(&base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..5 {
        let mut m = base.clone();
        for level in ComplexityLabel::ALL {
            let data = (0..small.n_pi * small.template_dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            m.set_bank(level, Tensor::new(small.n_pi, small.template_dim, data).map_err(err)?).map_err(err)?;
        }
        check(outputs(&m)? == reference, || format!("use_templates = false: outputs changed with random banks (trial {trial})"))?;
    }
    Ok("bit-identical across n_z in {1, 3} and under 5 random bank draws".into())
}

fn mixture_identities() -> Outcome {
    let err = |e: ccqg::Error| e.to_string();
    for seed in 0..100u64 {
        let (model, ex) = micro_instance(ModelConfig::micro(), seed).map_err(err)?;
        let n_z = model.config().n_z;
        // Brute force: score every expert separately, keep the first minimum.
        let nll: Vec<f64> = (0..n_z).map(|z| model.sequence_log_prob(&ex, z).map(|lp| -lp)).collect::<Result<_, _>>().map_err(err)?;
        let mut best = 0;
        for z in 1..n_z {
            if nll[z] < nll[best] {
                best = z;
            }
        }
        let max_lp = -nll[best];
        let mix = model.mixture_log_prob(&ex).map_err(err)?;
        let lower = max_lp - (n_z as f64).ln();
        check(mix >= lower - 1e-9 && mix <= max_lp + 1e-9, || {
            format!("seed {seed}: mixture {mix} outside [{lower}, {max_lp}]")
        })?;
        let (chosen, _) = e_step(&model, &ex).map_err(err)?;
        check(chosen == best, || format!("seed {seed}: E-step chose {chosen}, brute force {best}"))?;
    }
    Ok("100 micro instances: bounds hold and E-step matches brute force".into())
}

// ---------------------------------------------------------------------------
// Estimator criteria
// ---------------------------------------------------------------------------

/// Binary entropy in bits.
fn h2(p: f64) -> f64 {
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

struct OracleCase {
    id: &'static str,
    answer: &'static str,
    alpha: f64,
    mode: F3Mode,
    expected: [f64; 5],
}

fn oracle_cases() -> Vec<OracleCase> {
    use F3Mode::{Direct, Inverse};
    let a = 0.01;
    // Two one-lemma sentences over a two-lemma vocabulary with smoothing a:
    // P = (1+a, a)/(1+2a) and its mirror image. The midpoint is uniform, so
    // JS = 1 - H2((1+a)/(1+2a)).
    let swap = 1.0 - h2(1.01 / 1.02);
    // Same with a = 1: P = (2/3, 1/3), JS = 5/3 - log2(3).
    let swap_alpha_one = 5.0 / 3.0 - 3f64.log2();
    // Three one-lemma sentences over three lemmas, P = (1.01, .01, .01)/1.03
    // and permutations. Every pair shares one near-zero coordinate, so
    // JS = p log2(2p/(p+q)) + q log2(2q/(p+q)) with p = 1.01/1.03, q = .01/1.03.
    let (p, q): (f64, f64) = (1.01 / 1.03, 0.01 / 1.03);
    let three_way = p * (2.0 * p / (p + q)).log2() + q * (2.0 * q / (p + q)).log2();
    vec![
        // Hamlet: 1 of 2 passage mentions; 2 tokens after the answer.
        OracleCase { id: "fx01", answer: "Shakespeare", alpha: a, mode: Inverse, expected: [1.0, 0.0, 1e6, 2.0, 1.0] },
        // One ccomp; no entities anywhere; distance falls back to 6 tokens.
        OracleCase { id: "fx02", answer: "a bird", alpha: a, mode: Inverse, expected: [2.0, 0.0, 1e6, 1.0, 6.0] },
        // Two question sentences: (1 + relcl) + 1; one advmod; the question
        // names no passage entity, so f4 = 1 mention + 1.
        OracleCase { id: "fx03", answer: "yearly", alpha: a, mode: Inverse, expected: [3.0, 1.0, 1e6, 2.0, 5.0] },
        // Two amod and one advmod.
        OracleCase { id: "fx04", answer: "John", alpha: a, mode: Inverse, expected: [1.0, 3.0, 1e6, 2.0, 6.0] },
        // xcomp + advcl; Mary is every passage mention; nearest Mary is one
        // token from the answer on either side.
        OracleCase { id: "fx05", answer: "early", alpha: a, mode: Inverse, expected: [3.0, 1.0, 1e6, 1.0, 1.0] },
        OracleCase { id: "fx06", answer: "fern", alpha: a, mode: Inverse, expected: [1.0, 0.0, 1.0 / swap, 1.0, 8.0] },
        OracleCase { id: "fx07", answer: "fern", alpha: 1.0, mode: Inverse, expected: [1.0, 0.0, 1.0 / swap_alpha_one, 1.0, 8.0] },
        // Sentences moss, fern, moss: 4 of 6 ordered pairs differ.
        OracleCase { id: "fx08", answer: "fern", alpha: a, mode: Direct, expected: [1.0, 0.0, 4.0 / 6.0 * swap, 1.0, 12.0] },
        // A sentence without content lemmas is uniform over the one-lemma
        // vocabulary, identical to the other sentence.
        OracleCase { id: "fx09", answer: "moss", alpha: a, mode: Direct, expected: [1.0, 0.0, 0.0, 1.0, 8.0] },
        // Rome and Paris each 1 of 3 mentions; gaps 10-2-1 and 10-6-1.
        OracleCase { id: "fx10", answer: "London", alpha: a, mode: Inverse, expected: [1.0, 1.0, 1.0 / three_way, 3.0, 5.0] },
        // Two-token entity; its second mention lies inside the answer.
        OracleCase { id: "fx11", answer: "after New York opened", alpha: a, mode: Inverse, expected: [1.0, 1.0, 1e6, 1.0, 0.0] },
        // Ada 2/3, Babbage 1/3, Turing absent: mean 1/2; gaps 0 and 2.
        OracleCase { id: "fx12", answer: "1833", alpha: a, mode: Inverse, expected: [1.0, 0.0, 1e6, 2.0, 1.0] },
    ]
}

fn estimator_oracle_suite() -> Outcome {
    let text = std::fs::read_to_string(fixture("estimator_oracle.conllu")).map_err(|e| e.to_string())?;
    let index = AnnotationIndex::new(parse_conllu(&text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let cases = oracle_cases();
    for case in &cases {
        let inst = QAInstance::new(case.id, "", "", case.answer);
        let opts = FeatureOptions { alpha: case.alpha, f3_mode: case.mode };
        let got = compute_raw_features(&inst, &index, &opts).map_err(|e| format!("{}: {e}", case.id))?.to_array();
        for (k, (g, e)) in got.iter().zip(&case.expected).enumerate() {
            check((g - e).abs() <= 1e-9, || format!("{} f{}: got {g}, expected {e}", case.id, k + 1))?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut dist = |n: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() + 1e-3 }).collect();
        let s: f64 = w.iter().sum();
        if s == 0.0 {
            let mut v = vec![0.0; n];
            v[0] = 1.0;
            return v;
        }
        w.iter().map(|x| x / s).collect()
    };
    for trial in 0..1000 {
        let n = 1 + trial % 12;
        let (p, q) = (dist(n), dist(n));
        let pq = js_divergence(&p, &q).map_err(|e| e.to_string())?;
        let qp = js_divergence(&q, &p).map_err(|e| e.to_string())?;
        let pp = js_divergence(&p, &p).map_err(|e| e.to_string())?;
        check((pq - qp).abs() <= 1e-12, || format!("trial {trial}: asymmetric {pq} vs {qp}"))?;
        check((-1e-12..=1.0 + 1e-12).contains(&pq), || format!("trial {trial}: out of range {pq}"))?;
        check(pp.abs() <= 1e-12, || format!("trial {trial}: JS(p, p) = {pp}"))?;
    }
    Ok(format!("{} feature fixtures at 1e-9; 1000 JS pairs at 1e-12", cases.len()))
}

#[derive(serde::Deserialize)]
struct Planted {
    raw: [f64; 5],
    gold: ComplexityLabel,
}

fn threshold_recovery() -> Outcome {
    let rows: Vec<Planted> = read_jsonl(std::path::Path::new(&fixture("planted_features.jsonl"))).map_err(|e| e.to_string())?;
    check(rows.len() == 200, || format!("{} fixture rows", rows.len()))?;
    let feats: Vec<ComplexityFeatures> = rows.iter().map(|r| ComplexityFeatures::from_array(r.raw)).collect();
    let gold: Vec<ComplexityLabel> = rows.iter().map(|r| r.gold).collect();
    let norm = fit_normalizer(&feats, 0.5).map_err(|e| e.to_string())?;
    let scores: Vec<f64> = feats.iter().map(|f| cpx_score(&normalize(f, &norm))).collect();
    let cal = calibrate_threshold(&scores, &gold).map_err(|e| e.to_string())?;
    check((cal.lambda - 0.65).abs() <= 0.01, || format!("lambda {}", cal.lambda))?;
    check(cal.macro_f1 == 1.0, || format!("macro-F1 {}", cal.macro_f1))?;
    Ok(format!("lambda={:.2} macro-F1={}", cal.lambda, cal.macro_f1))
}

/// Label vectors realising a confusion matrix.
fn expand(ts_ps: usize, ts_pc: usize, tc_ps: usize, tc_pc: usize) -> (Vec<ComplexityLabel>, Vec<ComplexityLabel>) {
    use ComplexityLabel::{Complex as C, Simple as S};
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for (n, p, g) in [(ts_ps, S, S), (ts_pc, C, S), (tc_ps, S, C), (tc_pc, C, C)] {
        pred.extend(std::iter::repeat_n(p, n));
        gold.extend(std::iter::repeat_n(g, n));
    }
    (pred, gold)
}

fn confusion_recomputation() -> Outcome {
    let (pred, gold) = expand(5271, 155, 210, 3407);
    let in_domain = evaluate_estimator(&pred, &gold).map_err(|e| e.to_string())?;
    // F1(simple) = 2*5271 / (2*5271 + 155 + 210) = 10542/10907,
    // F1(complex) = 6814/7179; the mean is 0.95789...
    check((in_domain.macro_f1 - 0.9579).abs() <= 1e-4, || format!("in-domain macro-F1 {}", in_domain.macro_f1))?;
    check((in_domain.macro_f1 - 0.958).abs() <= 5e-4, || format!("in-domain macro-F1 {}", in_domain.macro_f1))?;
    let (pred, gold) = expand(93, 15, 12, 67);
    let out_domain = evaluate_estimator(&pred, &gold).map_err(|e| e.to_string())?;
    // (108 * 186/213 + 79 * 134/161) / 187 = 0.85591...
    check((out_domain.weighted_f1 - 0.8559).abs() <= 1e-4, || format!("out-domain weighted-F1 {}", out_domain.weighted_f1))?;
    check((out_domain.weighted_f1 - 0.856).abs() <= 5e-4, || format!("out-domain weighted-F1 {}", out_domain.weighted_f1))?;
    Ok(format!("in-domain macro-F1={:.4} out-domain weighted-F1={:.4}", in_domain.macro_f1, out_domain.weighted_f1))
}

fn metric_goldens() -> Outcome {
    let pairs: [(&str, &str, f64, f64); 5] = [
        ("the cat sat on the mat", "the cat sat on the mat", 1.0, 1.0),
        // Orders 1 to 3 match fully, order 4 has no candidate 4-gram and
        // smooths to 1; brevity penalty exp(1 - 4/3). LCS 3: F = 6/7.
        ("a b c", "a b c d", (-1.0f64 / 3.0).exp(), 6.0 / 7.0),
        // Precisions 7/8, 5/7, 3/6, 1/5 multiply to 1/16. LCS 7 of 8.
        ("the quick brown fox jumps over the dog", "the quick brown fox leaps over the dog", 0.5, 0.875),
        // All precisions 1, brevity exp(1 - 6/4). LCS 4: P 1, R 2/3, F 0.8.
        ("cat is on the", "the cat is on the mat", (-0.5f64).exp(), 0.8),
        // Clipped "the": precisions 6/7, 5/6, 4/5, 3/4 multiply to 3/7.
        // LCS 6: P 6/7, R 1, F 12/13.
        ("the the cat sat on the mat", "the cat sat on the mat", (3.0f64 / 7.0).powf(0.25), 12.0 / 13.0),
    ];
    for (c, r, bleu, rouge) in pairs {
        let (c, r) = (toks(c), toks(r));
        let b = sentence_bleu4(&c, &r);
        let l = rouge_l(&c, &r).map_err(|e| e.to_string())?;
        check((b - bleu).abs() <= 1e-6, || format!("BLEU `{}`: got {b}, expected {bleu}", c.join(" ")))?;
        check((l - rouge).abs() <= 1e-6, || format!("ROUGE-L `{}`: got {l}, expected {rouge}", c.join(" ")))?;
    }
    let corpus: Vec<Vec<String>> = pairs.iter().map(|p| toks(p.0)).collect();
    check(bleu4(&corpus, &corpus).map_err(|e| e.to_string())? == 1.0, || "corpus identity BLEU is not exactly 1".into())?;
    check(rouge_l(&corpus[2], &corpus[2]).map_err(|e| e.to_string())? == 1.0, || "identity ROUGE-L is not exactly 1".into())?;
    Ok("5 golden pairs at 1e-6; identities exactly 1.0".into())
}

fn split_arithmetic() -> Outcome {
    let corpus: Vec<QAInstance> = (0..100).map(|i| QAInstance::new(format!("i{i}"), "the sky is blue .", "what is blue ?", "sky")).collect();
    let a = split_dataset(corpus.clone(), 5).map_err(|e| e.to_string())?;
    let b = split_dataset(corpus.clone(), 5).map_err(|e| e.to_string())?;
    let c = split_dataset(corpus, 6).map_err(|e| e.to_string())?;
    check(a.sizes() == (80, 10, 10), || format!("sizes {:?}", a.sizes()))?;
    let m = a.manifest();
    let mut all: Vec<&String> = m.train.iter().chain(&m.dev).chain(&m.test).collect();
    all.sort();
    all.dedup();
    check(all.len() == 100, || format!("{} distinct ids across parts", all.len()))?;
    check(m == b.manifest(), || "same seed gave a different split".into())?;
    check(m != c.manifest(), || "different seeds gave the same split".into())?;
    Ok("(80, 10, 10), disjoint, reproducible".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient integrity", gradient_integrity),
        ("overfit check", overfit_check),
        ("complexity control", complexity_control),
        ("ablation contract", ablation_contract),
        ("mixture identities", mixture_identities),
        ("estimator oracle suite", estimator_oracle_suite),
        ("threshold recovery", threshold_recovery),
        ("published confusion recomputation", confusion_recomputation),
        ("metric goldens", metric_goldens),
        ("split arithmetic", split_arithmetic),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("PASS {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
