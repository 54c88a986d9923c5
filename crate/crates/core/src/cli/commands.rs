use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_artifact, PipelineConfig};
use crate::annotation::{parse_conllu, passage_doc_id, question_doc_id, tokenize_fallback_with_id, write_conllu, AnnotationIndex};
use crate::dataset::synthetic::pattern_label;
use crate::dataset::{
    build_vocab, filter_answerable, label_corpus, load_qa_json, model_tokens, read_jsonl, split_dataset, QAInstance, QaFormat,
};
use crate::error::{Error, Result};
use crate::estimator::{
    calibrate_threshold, compute_raw_features, cpx_score, evaluate_estimator, fit_normalizer, normalize, ComplexityFeatures,
    ComplexityLabel, FeatureNormalizer,
};
use crate::evaluation::{estimator_label, evaluate_generator, EvalReport};
use crate::model::{micro_gradcheck, Ccqg, ModelConfig};
use crate::numerics::{read_params, write_params, ParamStore};
use crate::training::{init_template_bank, train_loop, Embedder};

const DEFAULT_SPLIT_SEED: u64 = 13;
const DEFAULT_VOCAB_SIZE: usize = 20_000;
const DEFAULT_GRADCHECK_H: f64 = 1e-4;
/// Acceptance bound of the `gradcheck` subcommand.
const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn to_json<T: Serialize>(what: &str, value: &T) -> Result<Vec<u8>> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(what, e))?;
    Ok((text + "\n").into_bytes())
}

fn to_jsonl<T: Serialize>(what: &str, items: &[T]) -> Result<Vec<u8>> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).map_err(|e| Error::json(what, e))?);
        out.push('\n');
    }
    Ok(out.into_bytes())
}

/// A `.jsonl` path holds one serialised instance per line (the output of
/// `prepare`); anything else is a raw SQuAD or HotpotQA file read with the
/// `format` key.
fn load_corpus(cfg: &PipelineConfig, key: &str) -> Result<Vec<QAInstance>> {
    let path = cfg.path(key)?;
    let instances = if path.extension().is_some_and(|e| e == "jsonl") {
        read_jsonl(&path)?
    } else {
        let format: QaFormat = cfg.get("format").unwrap_or("squad").parse()?;
        load_qa_json(&path, format)?
    };
    if instances.is_empty() {
        return Err(Error::Data(format!("{}: corpus is empty", path.display())));
    }
    Ok(instances)
}

fn load_annotations(cfg: &PipelineConfig) -> Result<AnnotationIndex> {
    let path = cfg.path("annotations")?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    AnnotationIndex::new(parse_conllu(&text)?)
}

fn load_normalizer(cfg: &PipelineConfig) -> Result<FeatureNormalizer> {
    let mut n = FeatureNormalizer::load(&cfg.path("normalizer")?)?;
    if let Some(v) = cfg.get("lambda") {
        n.lambda = v.parse().map_err(|_| Error::Config(format!("`lambda` has an unparsable value `{v}`")))?;
    }
    Ok(n)
}

pub(super) fn prepare(cfg: &PipelineConfig) -> Result<String> {
    let out = cfg.output_dir()?;
    let seed = cfg.parse_or("split_seed", DEFAULT_SPLIT_SEED)?;
    let (kept, removed) = filter_answerable(load_corpus(cfg, "corpus")?);
    let split = split_dataset(kept, seed)?;
    for (name, part) in [("train.jsonl", &split.train), ("dev.jsonl", &split.dev), ("test.jsonl", &split.test)] {
        write_artifact(&out, name, &to_jsonl(name, part)?)?;
    }
    write_artifact(&out, "split_manifest.json", &to_json("split manifest", &split.manifest())?)?;
    let (a, b, c) = split.sizes();
    Ok(format!("removed={removed} train={a} dev={b} test={c}"))
}

pub(super) fn annotate_fallback(cfg: &PipelineConfig) -> Result<String> {
    let out = cfg.output_dir()?;
    let corpus = load_corpus(cfg, "corpus")?;
    let mut docs = Vec::with_capacity(2 * corpus.len());
    for inst in &corpus {
        docs.push(tokenize_fallback_with_id(&passage_doc_id(&inst.id), &inst.passage)?);
        docs.push(tokenize_fallback_with_id(&question_doc_id(&inst.id), &inst.question)?);
    }
    write_artifact(&out, "annotations.conllu", write_conllu(&docs).as_bytes())?;
    Ok(format!("documents={}", docs.len()))
}

/// One line of a calibration features file. Other fields, such as `id`,
/// are ignored.
#[derive(Debug, Deserialize)]
struct GoldFeatures {
    raw: [f64; 5],
    gold: ComplexityLabel,
}

pub(super) fn calibrate(cfg: &PipelineConfig) -> Result<String> {
    let out = cfg.output_dir()?;
    let (features, gold): (Vec<ComplexityFeatures>, Vec<ComplexityLabel>) = match cfg.get("features") {
        Some(path) => read_jsonl::<GoldFeatures>(Path::new(path))?
            .into_iter()
            .map(|r| (ComplexityFeatures::from_array(r.raw), r.gold))
            .unzip(),
        None => {
            let corpus = load_corpus(cfg, "corpus")?;
            let annotations = load_annotations(cfg)?;
            let opts = cfg.feature_options()?;
            let mut pairs = Vec::new();
            for inst in &corpus {
                let Some(g) = inst.gold_complexity else { continue };
                match compute_raw_features(inst, &annotations, &opts) {
                    Ok(f) => pairs.push((f, g)),
                    Err(e) => log::warn!("calibrate: skipping {}: {e}", inst.id),
                }
            }
            pairs.into_iter().unzip()
        }
    };
    if features.is_empty() {
        return Err(Error::Data("no gold-labelled feature vectors to calibrate on".into()));
    }
    let mut normalizer = fit_normalizer(&features, 0.5)?;
    let scores: Vec<f64> = features.iter().map(|f| cpx_score(&normalize(f, &normalizer))).collect();
    let calibration = calibrate_threshold(&scores, &gold)?;
    normalizer.lambda = calibration.lambda;
    write_artifact(&out, "normalizer.json", &to_json("normalizer", &normalizer)?)?;
    write_artifact(&out, "calibration.json", &to_json("calibration", &calibration)?)?;
    Ok(format!("items={} lambda={:.2} macro_f1={:.4}", features.len(), calibration.lambda, calibration.macro_f1))
}

pub(super) fn label(cfg: &PipelineConfig) -> Result<String> {
    let out = cfg.output_dir()?;
    let mut corpus = load_corpus(cfg, "corpus")?;
    let report = label_corpus(&mut corpus, &load_normalizer(cfg)?, &load_annotations(cfg)?, &cfg.feature_options()?);
    write_artifact(&out, "labeled.jsonl", &to_jsonl("labeled corpus", &corpus)?)?;
    write_artifact(&out, "features.jsonl", &to_jsonl("feature records", &report.records)?)?;
    Ok(format!("simple={} complex={} skipped={}", report.simple, report.complex, report.skipped.len()))
}

/// Compares predicted with gold labels. With `annotations` and
/// `normalizer` set, the corpus is labelled first.
pub(super) fn eval_estimator(cfg: &PipelineConfig) -> Result<String> {
    let out = cfg.output_dir()?;
    let mut corpus = load_corpus(cfg, "corpus")?;
    if cfg.get("annotations").is_some() {
        label_corpus(&mut corpus, &load_normalizer(cfg)?, &load_annotations(cfg)?, &cfg.feature_options()?);
    }
    let (pred, gold): (Vec<_>, Vec<_>) =
        corpus.iter().filter_map(|i| Some((i.predicted_complexity?, i.gold_complexity?))).unzip();
    if pred.is_empty() {
        return Err(Error::Data("no instance carries both a predicted and a gold label".into()));
    }
    let eval = evaluate_estimator(&pred, &gold)?;
    write_artifact(&out, "estimator_eval.json", &to_json("estimator evaluation", &eval)?)?;
    Ok(format!("pairs={} macro_f1={:.4} weighted_f1={:.4}", pred.len(), eval.macro_f1, eval.weighted_f1))
}

const BANK_FILE: &str = "banks.ckpt";

pub(super) fn cluster_templates(cfg: &PipelineConfig) -> Result<String> {
    let out = cfg.output_dir()?;
    let corpus = load_corpus(cfg, "corpus")?;
    let (model_cfg, train_cfg) = (cfg.model_config()?, cfg.train_config()?);
    let embedder = Embedder::from_config(&train_cfg)?;
    let mut banks = ParamStore::new();
    for level in ComplexityLabel::ALL {
        let bank = init_template_bank(&corpus, level, &model_cfg, &train_cfg, &embedder)?;
        banks.add(&format!("bank.{level}"), bank)?;
    }
    write_artifact(&out, BANK_FILE, write_params(&banks).as_bytes())?;
    Ok(format!("n_pi={} template_dim={}", model_cfg.n_pi, model_cfg.template_dim))
}

fn examples_of(model: &Ccqg, instances: &[QAInstance]) -> Result<Vec<crate::model::TrainingExample>> {
    instances.iter().map(|i| model.example(i)).collect()
}

pub(super) fn train(cfg: &PipelineConfig) -> Result<String> {
    let out = cfg.output_dir()?;
    let train_set = load_corpus(cfg, "corpus")?;
    let dev_set = match cfg.get("dev_corpus") {
        Some(_) => load_corpus(cfg, "dev_corpus")?,
        None => Vec::new(),
    };
    let (model_cfg, train_cfg) = (cfg.model_config()?, cfg.train_config()?);
    let vocab = build_vocab(&train_set, cfg.parse_or("vocab_size", DEFAULT_VOCAB_SIZE)?);
    let mut model = Ccqg::new(model_cfg, vocab)?;
    match cfg.get("banks") {
        Some(path) => {
            let path = PathBuf::from(path);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let banks = read_params(&text)?;
            for level in ComplexityLabel::ALL {
                let name = format!("bank.{level}");
                let t = banks.by_name(&name).ok_or_else(|| Error::Data(format!("{}: no tensor `{name}`", path.display())))?;
                model.set_bank(level, t.clone())?;
            }
        }
        None => crate::training::init_banks(&mut model, &train_set, &train_cfg)?,
    }
    let train_ex = examples_of(&model, &train_set)?;
    let dev_ex = examples_of(&model, &dev_set)?;
    let report = train_loop(&mut model, &train_ex, &dev_ex, &train_cfg)?;

    // Save into a scratch directory first so a failed save never leaves a
    // half-written checkpoint behind.
    let staging = out.join(".model.tmp");
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    model.save(&staging)?;
    let target = out.join("model");
    if target.exists() {
        std::fs::remove_dir_all(&target).map_err(|e| Error::io(&target, e))?;
    }
    std::fs::rename(&staging, &target).map_err(|e| Error::io(&target, e))?;
    write_artifact(&out, "train_report.json", &to_json("train report", &report)?)?;
    Ok(format!("epochs={} best_epoch={} dev_nll={:.6} converged={}", report.epochs.len(), report.best_epoch, report.best_dev_nll(), report.converged))
}

/// One line of a `generate` input file.
#[derive(Debug, Deserialize)]
struct GenerateInput {
    #[serde(default)]
    id: Option<String>,
    passage: String,
    answer: String,
}

#[derive(Debug, Serialize)]
struct GenerateOutput {
    id: String,
    level: ComplexityLabel,
    question: String,
    expert: usize,
    scores: Vec<f64>,
}

pub(super) fn generate(cfg: &PipelineConfig, stdout: &mut dyn Write) -> Result<String> {
    let out = cfg.output_dir()?;
    let level: ComplexityLabel = cfg.require("complexity")?.parse().map_err(|_| {
        Error::Config(format!("complexity must be simple|complex, got `{}`", cfg.get("complexity").unwrap_or_default()))
    })?;
    let model = Ccqg::load(&cfg.path("checkpoint")?)?;
    let inputs: Vec<GenerateInput> = read_jsonl(&cfg.path("input")?)?;
    let mut lines = Vec::with_capacity(inputs.len());
    for (i, item) in inputs.into_iter().enumerate() {
        let input = model.input(&model_tokens(&item.passage), &model_tokens(&item.answer), level)?;
        let g = model.generate(&input)?;
        let question = g.tokens.join(" ");
        writeln!(stdout, "{question}\t{}", g.expert).map_err(|e| Error::io("<stdout>", e))?;
        let id = item.id.unwrap_or_else(|| format!("input-{i}"));
        lines.push(GenerateOutput { id, level, question, expert: g.expert, scores: g.scores });
    }
    write_artifact(&out, "generations.jsonl", &to_jsonl("generations", &lines)?)?;
    Ok(format!("generated={} complexity={level}", lines.len()))
}

pub(super) fn eval_qg(cfg: &PipelineConfig) -> Result<String> {
    let out = cfg.output_dir()?;
    let model = Ccqg::load(&cfg.path("checkpoint")?)?;
    let corpus = load_corpus(cfg, "corpus")?;
    let labeler = cfg.get("labeler").unwrap_or("estimator");
    let (report, records) = match labeler {
        "pattern" => evaluate_generator(&model, &corpus, |_, q| Ok(pattern_label(q)))?,
        "estimator" => {
            let annotations = load_annotations(cfg)?;
            let normalizer = load_normalizer(cfg)?;
            let opts = cfg.feature_options()?;
            evaluate_generator(&model, &corpus, |inst, q| {
                estimator_label(q, annotations.passage(&inst.id)?, &inst.answer_text, &normalizer, &opts)
            })?
        }
        other => return Err(Error::Config(format!("labeler must be pattern|estimator, got `{other}`"))),
    };
    write_artifact(&out, "eval_report.json", &to_json("evaluation report", &report)?)?;
    write_artifact(&out, "eval_table.tsv", format!("{}\n{}\n", EvalReport::HEADER, report.table_row()).as_bytes())?;
    write_artifact(&out, "generations.jsonl", &to_jsonl("generations", &records)?)?;
    let c = report.consistency.map_or(f64::NAN, |c| c.macro_f1);
    Ok(format!(
        "pairs={} bleu4={:.4} rouge_l={:.4} consistency_f1={c:.4} diversity={:.4}",
        report.pairs,
        report.bleu4,
        report.rouge_l,
        report.diversity.unwrap_or(f64::NAN)
    ))
}

#[derive(Debug, Serialize)]
struct GradCheckSummary {
    seed: u64,
    h: f64,
    max_rel_error: f64,
    worst: Option<(String, usize)>,
    checked: usize,
}

/// Checks a freshly initialised micro model. `output_dir` is optional here;
/// when set, the report is written to `gradcheck.json`.
pub(super) fn gradcheck(cfg: &PipelineConfig) -> Result<String> {
    let seed = cfg.parse_or("model_seed", ModelConfig::micro().seed)?;
    let h = cfg.parse_or("gradcheck_h", DEFAULT_GRADCHECK_H)?;
    let report = micro_gradcheck(seed, h)?;
    if cfg.get("output_dir").is_some() {
        let summary =
            GradCheckSummary { seed, h, max_rel_error: report.max_rel_error, worst: report.worst.clone(), checked: report.checked };
        write_artifact(&cfg.output_dir()?, "gradcheck.json", &to_json("gradcheck report", &summary)?)?;
    }
    if !(report.max_rel_error < GRADCHECK_TOLERANCE) {
        let (name, idx) = report.worst.unwrap_or_default();
        return Err(Error::Numeric(format!(
            "max relative error {:.3e} at {name}[{idx}] is not below {GRADCHECK_TOLERANCE:e}",
            report.max_rel_error
        )));
    }
    Ok(format!("max_rel_error={:.3e} checked={}", report.max_rel_error, report.checked))
}
