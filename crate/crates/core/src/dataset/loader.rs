use std::path::Path;

use serde_json::Value;

use super::QAInstance;
use crate::error::{Error, Result};
use crate::estimator::ComplexityLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QaFormat {
    Squad,
    HotpotQa,
}

impl std::str::FromStr for QaFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "squad" => Ok(QaFormat::Squad),
            "hotpotqa" | "hotpot" => Ok(QaFormat::HotpotQa),
            other => Err(Error::Config(format!("format must be squad|hotpotqa, got `{other}`"))),
        }
    }
}

pub fn load_qa_json(path: &Path, format: QaFormat) -> Result<Vec<QAInstance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qa_json(&text, format)
}

pub fn parse_qa_json(text: &str, format: QaFormat) -> Result<Vec<QAInstance>> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::json("corpus", e))?;
    match format {
        QaFormat::Squad => parse_squad(&root),
        QaFormat::HotpotQa => parse_hotpot(&root),
    }
}

fn schema(path: &str, what: &str) -> Error {
    Error::Data(format!("schema mismatch at {path}: expected {what}"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "an array"))
}

fn string<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a str> {
    v.get(key).and_then(Value::as_str).ok_or_else(|| schema(&format!("{path}.{key}"), "a string"))
}

fn parse_squad(root: &Value) -> Result<Vec<QAInstance>> {
    let mut out = Vec::new();
    let data = array(root.get("data").ok_or_else(|| schema("$", "a `data` field"))?, "$.data")?;
    for (di, article) in data.iter().enumerate() {
        let apath = format!("$.data[{di}]");
        let paragraphs = array(article.get("paragraphs").unwrap_or(&Value::Null), &format!("{apath}.paragraphs"))?;
        for (pi, para) in paragraphs.iter().enumerate() {
            let ppath = format!("{apath}.paragraphs[{pi}]");
            let context = string(para, "context", &ppath)?;
            let qas = array(para.get("qas").unwrap_or(&Value::Null), &format!("{ppath}.qas"))?;
            for (qi, qa) in qas.iter().enumerate() {
                let qpath = format!("{ppath}.qas[{qi}]");
                let id = match qa.get("id") {
                    Some(Value::String(s)) => s.clone(),
                    Some(Value::Number(n)) => n.to_string(),
                    _ => return Err(schema(&format!("{qpath}.id"), "a string id")),
                };
                let question = string(qa, "question", &qpath)?;
                if question.trim().is_empty() {
                    log::warn!("skipping {qpath} (id {id}): empty question");
                    continue;
                }
                let answers = match qa.get("answers") {
                    Some(v) => array(v, &format!("{qpath}.answers"))?.as_slice(),
                    None => &[],
                };
                let answer = match answers.first() {
                    Some(a) => string(a, "text", &format!("{qpath}.answers[0]"))?.to_string(),
                    None => String::new(),
                };
                out.push(QAInstance::new(id, context, question.trim(), answer));
            }
        }
    }
    Ok(out)
}

fn parse_hotpot(root: &Value) -> Result<Vec<QAInstance>> {
    let mut out = Vec::new();
    for (ri, rec) in array(root, "$")?.iter().enumerate() {
        let rpath = format!("$[{ri}]");
        let id = rec
            .get("_id")
            .or_else(|| rec.get("id"))
            .and_then(Value::as_str)
            .ok_or_else(|| schema(&format!("{rpath}._id"), "a string id"))?;
        let question = string(rec, "question", &rpath)?;
        if question.trim().is_empty() {
            log::warn!("skipping {rpath} (id {id}): empty question");
            continue;
        }
        let answer = string(rec, "answer", &rpath)?;
        let context = array(rec.get("context").unwrap_or(&Value::Null), &format!("{rpath}.context"))?;
        let mut pieces: Vec<String> = Vec::new();
        for (ci, para) in context.iter().enumerate() {
            let cpath = format!("{rpath}.context[{ci}]");
            let pair = array(para, &cpath)?;
            if pair.len() != 2 || !pair[0].is_string() {
                return Err(schema(&cpath, "a [title, sentences] pair"));
            }
            for (si, s) in array(&pair[1], &format!("{cpath}[1]"))?.iter().enumerate() {
                let s = s.as_str().ok_or_else(|| schema(&format!("{cpath}[1][{si}]"), "a string"))?;
                if !s.trim().is_empty() {
                    pieces.push(s.trim().to_string());
                }
            }
        }
        let mut inst = QAInstance::new(id, pieces.join(" "), question.trim(), answer);
        inst.gold_complexity = match rec.get("level").and_then(Value::as_str) {
            Some("easy") => Some(ComplexityLabel::Simple),
            Some("hard") => Some(ComplexityLabel::Complex),
            _ => None,
        };
        out.push(inst);
    }
    Ok(out)
}
