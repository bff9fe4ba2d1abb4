//! Text rule-base format.
//!
//! ```text
//! nfc-rulebase 1
//! shape <inputs> <rules> <outputs>
//! set <dim> <id> <center> <width> <merge_count>
//! rule <j> consequent <y_1> .. <y_k>
//! term <j> <dim> set <id> mu <center> sigma <width> weight <normalized> raw <raw> active <0|1>
//! ```
//!
//! Every term names the set it uses, so sets shared between rules are
//! recorded once. The `mu`, `sigma` and `weight` fields of a term are
//! derived and checked for consistency when parsing.

use super::{FuzzySet, NeuroFuzzyController};
use crate::error::{Error, Result};
use crate::textfmt::{content_lines, fmt_f64, join_f64, parse_num};

const FORMAT_TAG: &str = "nfc-rulebase";
const FORMAT_VERSION: u32 = 1;

impl NeuroFuzzyController {
    pub fn to_text(&self) -> String {
        let (m, n, k) = (self.inputs(), self.rules(), self.outputs());
        let mut out = format!("{FORMAT_TAG} {FORMAT_VERSION}\nshape {m} {n} {k}\n");
        for i in 0..m {
            for (s, set) in self.sets_in_dim(i).iter().enumerate() {
                out.push_str(&format!(
                    "set {i} {s} {} {} {}\n",
                    fmt_f64(set.center),
                    fmt_f64(set.width),
                    set.merge_count
                ));
            }
        }
        for j in 0..n {
            out.push_str(&format!("rule {j} consequent {}\n", join_f64(self.consequent(j))));
            let norm = self.normalized_weights(j);
            for (i, w_hat) in norm.iter().enumerate() {
                let set = self.set(i, j);
                out.push_str(&format!(
                    "term {j} {i} set {} mu {} sigma {} weight {} raw {} active {}\n",
                    self.set_id(i, j),
                    fmt_f64(set.center),
                    fmt_f64(set.width),
                    fmt_f64(*w_hat),
                    fmt_f64(self.raw_weight(i, j)),
                    u8::from(self.is_active(i, j)),
                ));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text).peekable();
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, "empty file"))?;
        let mut tok = header.split_whitespace();
        if tok.next() != Some(FORMAT_TAG) {
            return Err(Error::parse(ln, "not a rule-base file"));
        }
        let version: u32 = parse_num(tok.next(), ln, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::parse(ln, format!("unsupported version {version}")));
        }
        let (ln, shape) = lines.next().ok_or_else(|| Error::parse(ln, "missing shape"))?;
        let mut tok = shape.split_whitespace();
        if tok.next() != Some("shape") {
            return Err(Error::parse(ln, "expected `shape`"));
        }
        let m: usize = parse_num(tok.next(), ln, "inputs")?;
        let n: usize = parse_num(tok.next(), ln, "rules")?;
        let k: usize = parse_num(tok.next(), ln, "outputs")?;

        let mut sets: Vec<Vec<FuzzySet>> = vec![Vec::new(); m];
        let mut set_index = vec![usize::MAX; m * n];
        let mut raw = vec![0.0; m * n];
        let mut active = vec![false; m * n];
        let mut consequents = vec![f64::NAN; n * k];
        // (line, rule, dim, center, width, normalized weight) checked at the end
        let mut derived = Vec::new();

        for (ln, line) in lines {
            let mut tok = line.split_whitespace();
            let expect = |tok: Option<&str>, word: &str| -> Result<()> {
                if tok == Some(word) {
                    Ok(())
                } else {
                    Err(Error::parse(ln, format!("expected `{word}`")))
                }
            };
            match tok.next() {
                Some("set") => {
                    let i: usize = parse_num(tok.next(), ln, "dimension")?;
                    let s: usize = parse_num(tok.next(), ln, "set id")?;
                    if i >= m || s != sets[i].len() {
                        return Err(Error::parse(ln, "sets must be listed in order"));
                    }
                    sets[i].push(FuzzySet {
                        center: parse_num(tok.next(), ln, "center")?,
                        width: parse_num(tok.next(), ln, "width")?,
                        merge_count: parse_num(tok.next(), ln, "merge count")?,
                    });
                }
                Some("rule") => {
                    let j: usize = parse_num(tok.next(), ln, "rule")?;
                    if j >= n {
                        return Err(Error::parse(ln, "rule index out of range"));
                    }
                    expect(tok.next(), "consequent")?;
                    for c in 0..k {
                        consequents[j * k + c] = parse_num(tok.next(), ln, "consequent")?;
                    }
                }
                Some("term") => {
                    let j: usize = parse_num(tok.next(), ln, "rule")?;
                    let i: usize = parse_num(tok.next(), ln, "dimension")?;
                    if j >= n || i >= m {
                        return Err(Error::parse(ln, "term index out of range"));
                    }
                    expect(tok.next(), "set")?;
                    set_index[i * n + j] = parse_num(tok.next(), ln, "set id")?;
                    expect(tok.next(), "mu")?;
                    let mu: f64 = parse_num(tok.next(), ln, "mu")?;
                    expect(tok.next(), "sigma")?;
                    let sigma: f64 = parse_num(tok.next(), ln, "sigma")?;
                    expect(tok.next(), "weight")?;
                    let w_hat: f64 = parse_num(tok.next(), ln, "weight")?;
                    expect(tok.next(), "raw")?;
                    raw[i * n + j] = parse_num(tok.next(), ln, "raw weight")?;
                    expect(tok.next(), "active")?;
                    let a: u8 = parse_num(tok.next(), ln, "active flag")?;
                    active[i * n + j] = match a {
                        0 => false,
                        1 => true,
                        _ => return Err(Error::parse(ln, "active flag must be 0 or 1")),
                    };
                    derived.push((ln, j, i, mu, sigma, w_hat));
                }
                Some(other) => return Err(Error::parse(ln, format!("unknown record `{other}`"))),
                None => unreachable!("content lines are non-empty"),
            }
        }
        if set_index.contains(&usize::MAX) {
            return Err(Error::parse(0, "missing term records"));
        }
        let ctrl = NeuroFuzzyController::from_parts((m, n, k), sets, set_index, raw, active, consequents)
            .map_err(|msg| Error::parse(0, msg))?;
        for (ln, j, i, mu, sigma, w_hat) in derived {
            let set = ctrl.set(i, j);
            if set.center.to_bits() != mu.to_bits() || set.width.to_bits() != sigma.to_bits() {
                return Err(Error::parse(ln, "term mu/sigma disagree with its set"));
            }
            if ctrl.normalized_weights(j)[i].to_bits() != w_hat.to_bits() {
                return Err(Error::parse(ln, "term weight disagrees with raw weights"));
            }
        }
        Ok(ctrl)
    }
}
