//! Plain-text parameter checkpoints.
//!
//! ```text
//! ccqg-params v1
//! <parameter count>
//! <name> <rows> <cols>
//! <rows*cols values, row-major, space separated>
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip exponent formatting, so a
//! save/load cycle reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "ccqg-params v1";

pub fn write_params(store: &ParamStore) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(out, "{}", store.len());
    for (_, name, t) in store.iter() {
        let _ = writeln!(out, "{name} {} {}", t.rows(), t.cols());
        let vals: Vec<String> = t.data().iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", vals.join(" "));
    }
    out
}

pub fn read_params(text: &str) -> Result<ParamStore> {
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::Parse { line: 0, msg: format!("checkpoint truncated, expected {what}") })
    };
    let (_, magic) = next("header")?;
    if magic.trim() != CHECKPOINT_MAGIC {
        return Err(Error::Parse { line: 1, msg: format!("not a checkpoint (header `{magic}`)") });
    }
    let (ln, count) = next("parameter count")?;
    let count: usize = count.trim().parse().map_err(|_| Error::Parse { line: ln + 1, msg: "bad parameter count".into() })?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let (ln, header) = next("parameter header")?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let bad = |msg: &str| Error::Parse { line: ln + 1, msg: msg.to_string() };
        if parts.len() != 3 {
            return Err(bad("expected `<name> <rows> <cols>`"));
        }
        let rows: usize = parts[1].parse().map_err(|_| bad("bad row count"))?;
        let cols: usize = parts[2].parse().map_err(|_| bad("bad column count"))?;
        let (vln, values) = next("parameter values")?;
        let data: Vec<f64> = values
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse { line: vln + 1, msg: "bad value".into() })?;
        let t = Tensor::new(rows, cols, data).map_err(|e| Error::Parse { line: vln + 1, msg: e.to_string() })?;
        store.add(parts[0], t)?;
    }
    Ok(store)
}

pub fn save_params(store: &ParamStore, path: &Path) -> Result<()> {
    std::fs::write(path, write_params(store)).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<ParamStore> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_params(&text)
}
