use std::fmt::Write as _;
use std::path::Path;

use super::eval::{quantile, EpisodeStats};
use crate::error::{Error, Result};
use crate::nfc::NeuroFuzzyController;
use crate::qnet::argmax;
use crate::textfmt::fmt_f64;

/// Text rendering of a rule base: one row per rule, one column per input
/// that at least one rule still uses. Each cell shows the set label
/// `A<input>_<set>`, its center and width, and the normalized importance;
/// `-` marks a pruned term. Inputs pruned from every rule are listed below
/// the table instead of getting a column.
pub fn render_rule_table(ctrl: &NeuroFuzzyController, feature_names: &[String]) -> String {
    assert_eq!(feature_names.len(), ctrl.inputs(), "one name per input");
    let dims: Vec<usize> = (0..ctrl.inputs()).filter(|&i| !ctrl.dimension_pruned(i)).collect();
    let mut header = vec!["rule".to_string()];
    header.extend(dims.iter().map(|&i| feature_names[i].clone()));
    header.push("consequent".into());
    header.push("action".into());
    let mut rows = vec![header];
    for j in 0..ctrl.rules() {
        let w = ctrl.normalized_weights(j);
        let mut row = vec![format!("R{j}")];
        for &i in &dims {
            row.push(if ctrl.is_active(i, j) {
                let s = ctrl.set(i, j);
                format!("A{i}_{} ({:.4}, {:.4}) w={:.2}", ctrl.set_id(i, j), s.center, s.width, w[i])
            } else {
                "-".into()
            });
        }
        let y = ctrl.consequent(j);
        let ys: Vec<String> = y.iter().map(|v| format!("{v:.2}")).collect();
        row.push(format!("({})", ys.join(", ")));
        row.push(argmax(y).to_string());
        rows.push(row);
    }
    let cols = rows[0].len();
    let width: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (r, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&width)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if r == 0 {
            let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("-+-"));
            out.push('\n');
        }
    }
    let pruned: Vec<&str> = (0..ctrl.inputs())
        .filter(|&i| ctrl.dimension_pruned(i))
        .map(|i| feature_names[i].as_str())
        .collect();
    if !pruned.is_empty() {
        let _ = writeln!(out, "pruned inputs: {}", pruned.join(", "));
    }
    out
}

/// Membership curves of every set still used by an active term, sampled on
/// `samples_per_set` evenly spaced points from `center - 4 width` to
/// `center + 4 width` (both endpoints exact). CSV columns: dim, set, x,
/// membership.
pub fn export_membership_curves(ctrl: &NeuroFuzzyController, samples_per_set: usize) -> String {
    assert!(samples_per_set >= 2, "need at least two samples per set");
    let mut out = String::from("dim,set,x,membership\n");
    for dim in 0..ctrl.inputs() {
        for (id, set) in ctrl.sets_in_dim(dim).iter().enumerate() {
            let used = (0..ctrl.rules()).any(|j| ctrl.is_active(dim, j) && ctrl.set_id(dim, j) == id);
            if !used {
                continue;
            }
            let lo = set.center - 4.0 * set.width;
            let hi = set.center + 4.0 * set.width;
            let last = samples_per_set - 1;
            for p in 0..samples_per_set {
                let x = match p {
                    0 => lo,
                    p if p == last => hi,
                    p => lo + 8.0 * set.width * p as f64 / last as f64,
                };
                let _ = writeln!(out, "{dim},{id},{},{}", fmt_f64(x), fmt_f64(set.membership(x)));
            }
        }
    }
    out
}

/// Columns: episode, train reward, eval median (empty when not evaluated), loss.
pub fn episodes_csv(episodes: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,reward,eval_median,loss\n");
    for e in episodes {
        let eval = e.eval_median.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", e.episode, fmt_f64(e.reward), eval, fmt_f64(e.loss_mean));
    }
    out
}

/// Median, first and third quartile across runs of the evaluation reward
/// at each episode index.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileCurve {
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
}

impl QuantileCurve {
    /// Episodes without an evaluation in some run are left out of that
    /// run's contribution; episodes evaluated by no run yield NaN.
    pub fn from_runs(runs: &[Vec<EpisodeStats>]) -> Self {
        let len = runs.iter().map(Vec::len).max().unwrap_or(0);
        let mut curve = QuantileCurve { median: vec![], q1: vec![], q3: vec![] };
        for e in 0..len {
            let mut values: Vec<f64> = runs.iter().filter_map(|r| r.get(e).and_then(|s| s.eval_median)).collect();
            values.sort_by(f64::total_cmp);
            let (m, a, b) = if values.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                (quantile(&values, 0.5), quantile(&values, 0.25), quantile(&values, 0.75))
            };
            curve.median.push(m);
            curve.q1.push(a);
            curve.q3.push(b);
        }
        curve
    }

    pub fn len(&self) -> usize {
        self.median.len()
    }

    pub fn is_empty(&self) -> bool {
        self.median.is_empty()
    }

    /// First episode index whose median reaches `threshold`.
    pub fn first_crossing(&self, threshold: f64) -> Option<usize> {
        self.median.iter().position(|&m| m >= threshold)
    }
}

/// Columns: episode, then median/q1/q3 of the distilled runs and of the
/// naive runs. Cells past the end of a curve are empty.
pub fn curves_csv(distilled: &QuantileCurve, naive: Option<&QuantileCurve>) -> String {
    let mut out = String::from("episode,distilled_median,distilled_q1,distilled_q3,naive_median,naive_q1,naive_q3\n");
    let len = distilled.len().max(naive.map_or(0, QuantileCurve::len));
    let cell = |c: Option<&QuantileCurve>, e: usize| -> [String; 3] {
        match c {
            Some(c) if e < c.len() && !c.median[e].is_nan() => [fmt_f64(c.median[e]), fmt_f64(c.q1[e]), fmt_f64(c.q3[e])],
            _ => Default::default(),
        }
    };
    for e in 0..len {
        let d = cell(Some(distilled), e);
        let n = cell(naive, e);
        let _ = writeln!(out, "{e},{},{},{},{},{},{}", d[0], d[1], d[2], n[0], n[1], n[2]);
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
