//! Plain-text problem export in a matrix-market-like layout.
//!
//! ```text
//! %%SpillfreeQP 1
//! % minimize 1/2 x'Hx - g'x  s.t.  A_eq x = b_eq,  lower <= A_in x <= upper
//! matrix H <rows> <cols> <nnz>
//! <row> <col> <value>          (1-based, column-major)
//! vector g <len>
//! <value>
//! ...                          (A_eq, b_eq, A_in, lower, upper follow)
//! ```
//!
//! Values are written with 17 significant digits; infinite bounds as `inf`/`-inf`.

use std::fmt::Write as _;

use super::QpProblem;
use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

const MAGIC: &str = "%%SpillfreeQP 1";

pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn write_matrix(out: &mut String, name: &str, m: &CscMatrix) {
    let _ = writeln!(out, "matrix {name} {} {} {}", m.nrows, m.ncols, m.nnz());
    for (r, c, v) in m.iter() {
        let _ = writeln!(out, "{} {} {}", r + 1, c + 1, fmt_f64(v));
    }
}

fn write_vector(out: &mut String, name: &str, v: &[f64]) {
    let _ = writeln!(out, "vector {name} {}", v.len());
    for x in v {
        let _ = writeln!(out, "{}", fmt_f64(*x));
    }
}

pub fn write_problem(p: &QpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "% minimize 1/2 x'Hx - g'x  s.t.  A_eq x = b_eq,  lower <= A_in x <= upper");
    write_matrix(&mut out, "H", &p.hessian);
    write_vector(&mut out, "g", &p.linear);
    write_matrix(&mut out, "A_eq", &p.a_eq);
    write_vector(&mut out, "b_eq", &p.b_eq);
    write_matrix(&mut out, "A_in", &p.a_in);
    write_vector(&mut out, "lower", &p.lower);
    write_vector(&mut out, "upper", &p.upper);
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('%') {
                return Ok((i + 1, t));
            }
        }
        Err(Error::Parse("unexpected end of problem file".into()))
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("line {line}: cannot parse '{tok}'")))
}

fn header<'a>(lines: &mut Lines<'a>, kind: &str, name: &str) -> Result<(usize, Vec<&'a str>)> {
    let (ln, text) = lines.next()?;
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() < 3 || toks[0] != kind || toks[1] != name {
        return Err(Error::Parse(format!("line {ln}: expected '{kind} {name} ...', got '{text}'")));
    }
    Ok((ln, toks[2..].to_vec()))
}

fn read_matrix(lines: &mut Lines, name: &str) -> Result<CscMatrix> {
    let (ln, dims) = header(lines, "matrix", name)?;
    if dims.len() != 3 {
        return Err(Error::Parse(format!("line {ln}: matrix header needs rows cols nnz")));
    }
    let nrows: usize = parse_num(dims[0], ln)?;
    let ncols: usize = parse_num(dims[1], ln)?;
    let nnz: usize = parse_num(dims[2], ln)?;
    let mut triplets = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (ln, text) = lines.next()?;
        let t: Vec<&str> = text.split_whitespace().collect();
        if t.len() != 3 {
            return Err(Error::Parse(format!("line {ln}: expected 'row col value'")));
        }
        let r: usize = parse_num(t[0], ln)?;
        let c: usize = parse_num(t[1], ln)?;
        if r == 0 || c == 0 {
            return Err(Error::Parse(format!("line {ln}: indices are 1-based")));
        }
        triplets.push((r - 1, c - 1, parse_num::<f64>(t[2], ln)?));
    }
    CscMatrix::from_triplets(nrows, ncols, &triplets)
}

fn read_vector(lines: &mut Lines, name: &str) -> Result<Vec<f64>> {
    let (ln, dims) = header(lines, "vector", name)?;
    let len: usize = parse_num(dims[0], ln)?;
    (0..len)
        .map(|_| {
            let (ln, text) = lines.next()?;
            parse_num::<f64>(text, ln)
        })
        .collect()
}

pub fn read_problem(text: &str) -> Result<QpProblem> {
    if text.lines().next().map(str::trim) != Some(MAGIC) {
        return Err(Error::Parse(format!("missing '{MAGIC}' header")));
    }
    let mut lines = Lines { inner: text.lines().enumerate() };
    let problem = QpProblem {
        hessian: read_matrix(&mut lines, "H")?,
        linear: read_vector(&mut lines, "g")?,
        a_eq: read_matrix(&mut lines, "A_eq")?,
        b_eq: read_vector(&mut lines, "b_eq")?,
        a_in: read_matrix(&mut lines, "A_in")?,
        lower: read_vector(&mut lines, "lower")?,
        upper: read_vector(&mut lines, "upper")?,
    };
    problem.validate()?;
    Ok(problem)
}
