//! LIBSVM sparse text format.
//!
//! One example per line: `<label> <idx>:<val> <idx>:<val> ...` with 1-based,
//! strictly increasing feature indices. Labels `+1`/`1` are positive and
//! `-1`/`0` negative. Text after `#` is ignored, as are blank lines.

use std::fmt::Write as _;
use std::path::Path;

use mblbfgs_core::{Dataset, Label, SparseExample};

use crate::error::{CliError, Result};

/// Splits a line into `(column, token)` with 1-based character columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut col = 1;
    std::iter::from_fn(move || {
        let skipped = rest.len() - rest.trim_start().len();
        col += rest[..skipped].chars().count();
        rest = &rest[skipped..];
        if rest.is_empty() {
            return None;
        }
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let (tok, tail) = rest.split_at(end);
        let at = col;
        col += tok.chars().count();
        rest = tail;
        Some((at, tok))
    })
}

fn bad(line: usize, col: usize, what: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("line {line}, column {col}: {what}"))
}

fn parse_label(tok: &str, line: usize, col: usize) -> Result<Label> {
    match tok.parse::<f64>() {
        Ok(v) if v == 1.0 => Ok(Label::Positive),
        Ok(v) if v == -1.0 || v == 0.0 => Ok(Label::Negative),
        _ => Err(bad(line, col, format!("label '{tok}' is not one of +1, 1, -1, 0"))),
    }
}

fn parse_line(body: &str, line: usize) -> Result<Option<SparseExample>> {
    let mut toks = tokens(body);
    let Some((col, label)) = toks.next() else { return Ok(None) };
    let label = parse_label(label, line, col)?;
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (col, tok) in toks {
        let Some((i, v)) = tok.split_once(':') else {
            return Err(bad(line, col, format!("expected <index>:<value>, found '{tok}'")));
        };
        let idx: u32 = match i.parse() {
            Ok(idx) if idx >= 1 => idx,
            _ => return Err(bad(line, col, format!("feature index '{i}' is not a positive integer"))),
        };
        let val: f64 = match v.parse() {
            Ok(val) if f64::is_finite(val) => val,
            _ => {
                let vcol = col + i.chars().count() + 1;
                return Err(bad(line, vcol, format!("value '{v}' is not a finite number")));
            }
        };
        if indices.last().is_some_and(|&last| idx - 1 <= last) {
            return Err(bad(line, col, format!("feature index {idx} is not greater than the previous one")));
        }
        indices.push(idx - 1);
        values.push(val);
    }
    SparseExample::new(indices, values, label)
        .map(Some)
        .map_err(|e| CliError::Data(format!("line {line}: {e}")))
}

/// Parses LIBSVM text. The dimension is one past the largest index unless
/// `dim` is given, in which case every index must fit below it.
pub fn parse_libsvm_str(text: &str, dim: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let body = raw.split_once('#').map_or(raw, |(b, _)| b);
        if let Some(ex) = parse_line(body, no + 1)? {
            rows.push(ex);
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data("no examples in input".into()));
    }
    let data = match dim {
        Some(d) => Dataset::new(rows, d),
        None => Dataset::with_inferred_dim(rows),
    };
    data.map_err(|e| match e {
        mblbfgs_core::Error::Data(m) => CliError::Data(m),
        other => other.into(),
    })
}

pub fn parse_libsvm(path: &Path, dim: Option<usize>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_libsvm_str(&text, dim).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes `data` in LIBSVM form. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn to_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for ex in data.examples() {
        out.push_str(match ex.label() {
            Label::Positive => "+1",
            Label::Negative => "-1",
        });
        for (i, v) in ex.indices().iter().zip(ex.values()) {
            let _ = write!(out, " {}:{v}", i + 1);
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(path: &Path, data: &Dataset) -> Result<()> {
    std::fs::write(path, to_libsvm(data)).map_err(|e| CliError::write(path, e))
}
