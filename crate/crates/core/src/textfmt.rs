//! Helpers shared by the line-oriented text formats.
//!
//! Floats are written in shortest round-trip exponent form so that
//! `parse(format(x))` reproduces `x` bit for bit.

use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn join_f64(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:e}").unwrap();
    }
    out
}

pub fn parse_num<T: FromStr>(token: Option<&str>, line: usize, what: &str) -> Result<T> {
    let token = token.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what} `{token}`")))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
pub fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}
