//! Plain-text model checkpoints.
//!
//! ```text
//! sqrbm-checkpoint v1
//! # bit order: index 0 is the least significant bit
//! n = 9
//! m = 3
//! pool = X,Y,Z
//! beta = 1.00000000000000000e0
//! a = <n values>
//! b = <|pool|·m values, row-major (pool, hidden)>
//! w = <|pool|·n·m values, row-major (pool, visible, hidden)>
//! ```

use std::fs;
use std::path::Path;

use super::{ModelParams, OperatorPool};
use crate::error::{Error, Result};

pub const CHECKPOINT_HEADER: &str = "sqrbm-checkpoint v1";

fn fmt_values(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(" ")
}

pub fn checkpoint_string(params: &ModelParams) -> String {
    let mut out = String::new();
    out.push_str(CHECKPOINT_HEADER);
    out.push('\n');
    out.push_str("# bit order: index 0 is the least significant bit\n");
    out.push_str(&format!("n = {}\n", params.n()));
    out.push_str(&format!("m = {}\n", params.m()));
    out.push_str(&format!("pool = {}\n", params.pool()));
    out.push_str(&format!("beta = {:.17e}\n", params.beta()));
    out.push_str(&format!("a = {}\n", fmt_values(params.visible_bias())));
    out.push_str(&format!("b = {}\n", fmt_values(params.hidden_bias())));
    out.push_str(&format!("w = {}\n", fmt_values(params.couplings())));
    out
}

pub fn parse_checkpoint(text: &str) -> Result<ModelParams> {
    let ctx = "model checkpoint";
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CHECKPOINT_HEADER => {}
        other => {
            return Err(Error::parse(ctx, format!("expected header `{CHECKPOINT_HEADER}`, got {other:?}")))
        }
    }
    let (mut n, mut m, mut pool, mut beta) = (None, None, None, None);
    let (mut a, mut b, mut w) = (None, None, None);
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(ctx, format!("malformed line `{line}`")))?;
        let value = value.trim();
        let floats = |s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(ctx, format!("`{t}`: {e}"))))
                .collect()
        };
        match key.trim() {
            "n" => n = Some(value.parse::<usize>().map_err(|e| Error::parse(ctx, e.to_string()))?),
            "m" => m = Some(value.parse::<usize>().map_err(|e| Error::parse(ctx, e.to_string()))?),
            "pool" => pool = Some(OperatorPool::parse(value)?),
            "beta" => beta = Some(value.parse::<f64>().map_err(|e| Error::parse(ctx, e.to_string()))?),
            "a" => a = Some(floats(value)?),
            "b" => b = Some(floats(value)?),
            "w" => w = Some(floats(value)?),
            other => return Err(Error::parse(ctx, format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::parse(ctx, format!("missing `{k}`"));
    ModelParams::from_parts(
        n.ok_or_else(|| missing("n"))?,
        m.ok_or_else(|| missing("m"))?,
        pool.ok_or_else(|| missing("pool"))?,
        beta.ok_or_else(|| missing("beta"))?,
        a.ok_or_else(|| missing("a"))?,
        b.ok_or_else(|| missing("b"))?,
        w.ok_or_else(|| missing("w"))?,
    )
}

pub fn write_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_string(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text)
}
