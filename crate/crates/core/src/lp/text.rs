//! Plain-text problem dump, one record per line.
//!
//! ```text
//! lp 1
//! vars <n>
//! offset <c0>
//! obj <j>:<c> <j>:<c> ...
//! bound <j> <lower> <upper>
//! row <name> <= | = | >= <rhs> <j>:<a> ...
//! int <j> <j> ...
//! ```
//!
//! Bounds are written for every variable; `inf`/`-inf` mark missing bounds.
//! Floats use the shortest representation that parses back to the same value.

use super::{Bounds, LpProblem, Row, Sense};
use crate::milp::MilpProblem;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn fmt_terms(out: &mut String, terms: &[(usize, f64)]) {
    for &(j, a) in terms {
        let _ = write!(out, " {j}:{a:?}");
    }
}

/// Render a problem; `integers` are listed on a trailing `int` line.
pub fn write_text(p: &LpProblem, integers: &[usize]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "lp 1");
    let _ = writeln!(out, "vars {}", p.num_vars);
    let _ = writeln!(out, "offset {:?}", p.objective_offset);
    out.push_str("obj");
    fmt_terms(&mut out, &p.objective);
    out.push('\n');
    for (j, b) in p.bounds.iter().enumerate() {
        let _ = writeln!(out, "bound {j} {:?} {:?}", b.lower, b.upper);
    }
    for (i, row) in p.rows.iter().enumerate() {
        let name = if row.name.is_empty() {
            format!("r{i}")
        } else {
            row.name.replace(char::is_whitespace, "_")
        };
        let _ = write!(out, "row {name} {} {:?}", row.sense.symbol(), row.rhs);
        fmt_terms(&mut out, &row.coeffs);
        out.push('\n');
    }
    if !integers.is_empty() {
        out.push_str("int");
        for j in integers {
            let _ = write!(out, " {j}");
        }
        out.push('\n');
    }
    out
}

pub fn write_milp_text(m: &MilpProblem) -> String {
    write_text(&m.base, &m.integer_vars)
}

fn err(line: usize, msg: impl Into<String>) -> TextError {
    TextError::Parse { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, TextError> {
    tok.parse::<f64>().map_err(|_| err(line, format!("bad number `{tok}`")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, TextError> {
    tok.parse::<usize>().map_err(|_| err(line, format!("bad index `{tok}`")))
}

fn parse_terms<'a>(toks: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<(usize, f64)>, TextError> {
    toks.map(|t| {
        let (j, a) = t.split_once(':').ok_or_else(|| err(line, format!("bad term `{t}`")))?;
        Ok((parse_usize(j, line)?, parse_f64(a, line)?))
    })
    .collect()
}

/// Parse the format produced by [`write_text`]; returns the problem and the
/// integer variable list.
pub fn read_text(s: &str) -> Result<(LpProblem, Vec<usize>), TextError> {
    let mut p = LpProblem::new();
    let mut ints = Vec::new();
    let mut seen_header = false;
    for (k, raw) in s.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let mut toks = raw.split_whitespace();
        let head = toks.next().unwrap();
        match head {
            "lp" => {
                if toks.next() != Some("1") {
                    return Err(err(line, "unsupported version"));
                }
                seen_header = true;
            }
            "vars" => {
                let n = parse_usize(toks.next().ok_or_else(|| err(line, "missing count"))?, line)?;
                p.num_vars = n;
                p.bounds = vec![Bounds::non_negative(); n];
            }
            "offset" => {
                p.objective_offset = parse_f64(toks.next().ok_or_else(|| err(line, "missing value"))?, line)?;
            }
            "obj" => p.objective = parse_terms(toks, line)?,
            "bound" => {
                let j = parse_usize(toks.next().ok_or_else(|| err(line, "missing index"))?, line)?;
                let lo = parse_f64(toks.next().ok_or_else(|| err(line, "missing lower"))?, line)?;
                let up = parse_f64(toks.next().ok_or_else(|| err(line, "missing upper"))?, line)?;
                if j >= p.num_vars {
                    return Err(err(line, "bound index out of range"));
                }
                p.bounds[j] = Bounds::new(lo, up);
            }
            "row" => {
                let name = toks.next().ok_or_else(|| err(line, "missing name"))?.to_string();
                let sense = match toks.next() {
                    Some("<=") => Sense::Le,
                    Some("=") => Sense::Eq,
                    Some(">=") => Sense::Ge,
                    other => return Err(err(line, format!("bad sense {other:?}"))),
                };
                let rhs = parse_f64(toks.next().ok_or_else(|| err(line, "missing rhs"))?, line)?;
                let coeffs = parse_terms(toks, line)?;
                p.rows.push(Row { name, coeffs, sense, rhs });
            }
            "int" => {
                for t in toks {
                    ints.push(parse_usize(t, line)?);
                }
            }
            other => return Err(err(line, format!("unknown record `{other}`"))),
        }
    }
    if !seen_header {
        return Err(err(1, "missing `lp 1` header"));
    }
    Ok((p, ints))
}
