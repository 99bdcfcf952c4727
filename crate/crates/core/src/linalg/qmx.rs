//! QMX1 text format for multi-subsystem complex matrices.
//!
//! ```text
//! QMX1
//! <k>
//! <d_1> ... <d_k>
//! <re> <im>        (total² lines, row-major)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{ComplexMatrix, SubsystemShape, C64};
use crate::error::{Error, Result};

pub const MAGIC: &str = "QMX1";

pub fn to_string(m: &ComplexMatrix) -> String {
    let dims = m.shape().dims();
    let mut s = String::with_capacity(32 * m.dim() * m.dim() + 32);
    s.push_str(MAGIC);
    s.push('\n');
    let _ = writeln!(s, "{}", dims.len());
    let parts: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(s, "{}", parts.join(" "));
    for r in 0..m.dim() {
        for c in 0..m.dim() {
            let z = m.get(r, c);
            let _ = writeln!(s, "{} {}", z.re, z.im);
        }
    }
    s
}

pub fn parse(text: &str) -> Result<ComplexMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let perr = |line: usize, message: String| Error::Parse { line, message };

    let (ln, magic) = lines.next().ok_or_else(|| perr(1, "empty input".into()))?;
    if magic != MAGIC {
        return Err(perr(ln, format!("expected magic `{MAGIC}`, found `{magic}`")));
    }
    let (ln, count) = lines
        .next()
        .ok_or_else(|| perr(ln + 1, "missing subsystem count".into()))?;
    let k: usize = count
        .parse()
        .map_err(|_| perr(ln, format!("invalid subsystem count `{count}`")))?;
    let (ln, dims_line) = lines
        .next()
        .ok_or_else(|| perr(ln + 1, "missing dimension line".into()))?;
    let dims = dims_line
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| perr(ln, format!("invalid dimension `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.len() != k {
        return Err(perr(
            ln,
            format!("expected {k} dimensions, found {}", dims.len()),
        ));
    }
    let shape = SubsystemShape::new(dims).map_err(|e| perr(ln, e.to_string()))?;
    let n = shape.total();
    let mut m = ComplexMatrix::zeros(shape);
    let mut last = ln;
    for idx in 0..n * n {
        let (ln, entry) = lines
            .next()
            .ok_or_else(|| perr(last + 1, format!("expected {} entries, found {idx}", n * n)))?;
        last = ln;
        let mut it = entry.split_whitespace();
        let mut num = |what: &str| -> Result<f64> {
            let t = it
                .next()
                .ok_or_else(|| perr(ln, format!("missing {what} part")))?;
            t.parse::<f64>()
                .map_err(|_| perr(ln, format!("invalid {what} part `{t}`")))
        };
        let re = num("real")?;
        let im = num("imaginary")?;
        if it.next().is_some() {
            return Err(perr(ln, "trailing tokens".into()));
        }
        m.set(idx / n, idx % n, C64::new(re, im));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, "unexpected data after matrix entries".into()));
    }
    Ok(m)
}

pub fn read(path: impl AsRef<Path>) -> Result<ComplexMatrix> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn write(path: impl AsRef<Path>, m: &ComplexMatrix) -> Result<()> {
    std::fs::write(path, to_string(m))?;
    Ok(())
}
