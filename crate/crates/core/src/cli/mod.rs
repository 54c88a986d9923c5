//! The `ccqg` command line: one subcommand per pipeline stage, driven by a
//! flat `key = value` config file with `--key value` overrides.

mod commands;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimator::{F3Mode, FeatureOptions};
use crate::model::{parse_key_values, ModelConfig};
use crate::training::TrainConfig;

pub const COMMANDS: [&str; 10] = [
    "prepare",
    "annotate-fallback",
    "calibrate",
    "label",
    "eval-estimator",
    "cluster-templates",
    "train",
    "generate",
    "eval-qg",
    "gradcheck",
];

pub const USAGE: &str = "\
usage: ccqg <command> [--config FILE] [--threads N] [--key value ...]

commands:
  prepare            load a SQuAD/HotpotQA file, drop unanswerable items, split 80/10/10
  annotate-fallback  write CoNLL-U annotations with the built-in tokenizer
  calibrate          fit the feature normalizer and pick the threshold lambda
  label              label a corpus with the complexity estimator
  eval-estimator     score predicted labels against gold labels
  cluster-templates  initialise both template banks from question clusters
  train              train the generator with hard-EM
  generate           generate questions (--complexity simple|complex --input FILE)
  eval-qg            BLEU-4, ROUGE-L, consistency and diversity of a checkpoint
  gradcheck          finite-difference check of a micro model

Config keys are documented in docs/formats.md.";

/// Keys that are neither model nor training fields.
const PIPELINE_KEYS: [&str; 18] = [
    "corpus",
    "dev_corpus",
    "format",
    "annotations",
    "normalizer",
    "checkpoint",
    "output_dir",
    "input",
    "features",
    "banks",
    "complexity",
    "vocab_size",
    "split_seed",
    "lambda",
    "f3_mode",
    "alpha",
    "labeler",
    "gradcheck_h",
];

/// Exit status for an error: 1 usage, 2 data, 3 numeric.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::MissingKey(_) => 1,
        Error::Numeric(_) | Error::Shape { .. } => 3,
        _ => 2,
    }
}

fn is_known_key(key: &str) -> bool {
    PIPELINE_KEYS.contains(&key) || ModelConfig::KEYS.contains(&key) || TrainConfig::KEYS.contains(&key)
}

/// Resolved configuration of one invocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    values: BTreeMap<String, String>,
    pub threads: Option<usize>,
}

impl PipelineConfig {
    /// Parses everything after the subcommand. Config-file entries are
    /// applied first, then command-line overrides.
    pub fn from_args(args: &[String]) -> Result<Self> {
        let mut overrides: Vec<(String, String)> = Vec::new();
        let mut config_file: Option<PathBuf> = None;
        let mut threads = None;
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let key = flag.strip_prefix("--").ok_or_else(|| Error::Config(format!("unexpected argument `{flag}`")))?;
            let value = it.next().ok_or_else(|| Error::Config(format!("flag `{flag}` needs a value")))?;
            match key {
                "config" => config_file = Some(PathBuf::from(value)),
                "threads" => {
                    let n: usize = value.parse().map_err(|_| Error::Config(format!("--threads needs a positive integer, got `{value}`")))?;
                    if n == 0 {
                        return Err(Error::Config("--threads must be at least 1".into()));
                    }
                    threads = Some(n);
                }
                k if is_known_key(k) => overrides.push((k.to_string(), value.clone())),
                other => return Err(Error::Config(format!("unknown flag `--{other}`"))),
            }
        }
        let mut values = BTreeMap::new();
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for (k, v) in parse_key_values(&text)? {
                if !is_known_key(&k) {
                    return Err(Error::Config(format!("{}: unknown config key `{k}`", path.display())));
                }
                values.insert(k, v);
            }
        }
        values.extend(overrides);
        Ok(Self { values, threads })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, v) in pairs {
            if !is_known_key(k) {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
            values.insert(k.to_string(), v.to_string());
        }
        Ok(Self { values, threads: None })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        self.require(key).map(PathBuf::from)
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("`{key}` has an unparsable value `{v}`"))),
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::default();
        for (k, v) in &self.values {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        // `embedding_file` must win over a bare `embedding_source = file`.
        for (k, v) in self.values.iter().filter(|(k, _)| *k != "embedding_file") {
            cfg.set(k, v)?;
        }
        if let Some(v) = self.values.get("embedding_file") {
            cfg.set("embedding_file", v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn feature_options(&self) -> Result<FeatureOptions> {
        let defaults = FeatureOptions::default();
        let f3_mode: F3Mode = self.parse_or("f3_mode", defaults.f3_mode)?;
        let alpha: f64 = self.parse_or("alpha", defaults.alpha)?;
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        Ok(FeatureOptions { alpha, f3_mode })
    }

    /// The output directory, created if needed.
    pub fn output_dir(&self) -> Result<PathBuf> {
        let dir = self.path("output_dir")?;
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub(crate) fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
    Ok(target)
}

/// Runs one subcommand. Per-item output goes to `out`; the returned string
/// is the key-metrics part of the summary line.
pub fn run_command(command: &str, cfg: &PipelineConfig, out: &mut dyn Write) -> Result<String> {
    match command {
        "prepare" => commands::prepare(cfg),
        "annotate-fallback" => commands::annotate_fallback(cfg),
        "calibrate" => commands::calibrate(cfg),
        "label" => commands::label(cfg),
        "eval-estimator" => commands::eval_estimator(cfg),
        "cluster-templates" => commands::cluster_templates(cfg),
        "train" => commands::train(cfg),
        "generate" => commands::generate(cfg, out),
        "eval-qg" => commands::eval_qg(cfg),
        "gradcheck" => commands::gradcheck(cfg),
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

/// Full entry point over `argv` (without the program name). Prints the
/// summary line `<command> ok <key-metrics> <elapsed-ms>` on success and a
/// diagnostic on failure; returns the process exit status.
pub fn main_with_args(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(command) = args.first() else {
        let _ = writeln!(err, "{USAGE}");
        return 1;
    };
    if matches!(command.as_str(), "-h" | "--help" | "help") {
        let _ = writeln!(out, "{USAGE}");
        return 0;
    }
    if !COMMANDS.contains(&command.as_str()) {
        let _ = writeln!(err, "error: unknown command `{command}`\n\n{USAGE}");
        return 1;
    }
    let start = Instant::now();
    let result = PipelineConfig::from_args(&args[1..]).and_then(|cfg| {
        if let Some(n) = cfg.threads {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not resize the worker pool: {e}");
            }
        }
        run_command(command, &cfg, out)
    });
    match result {
        Ok(metrics) => {
            let _ = writeln!(out, "{command} ok {metrics} {}ms", start.elapsed().as_millis());
            0
        }
        Err(e) => {
            let code = exit_code(&e);
            let _ = writeln!(err, "{command} failed: {e}");
            if code == 1 {
                let _ = writeln!(err, "\n{USAGE}");
            }
            code
        }
    }
}
