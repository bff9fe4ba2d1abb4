//! Rule-base simplification: merging of near-identical fuzzy sets by
//! Jaccard similarity, followed by pruning of low-importance antecedent
//! terms.

mod merge;
mod prune;

pub use merge::{jaccard, merge_sets, MergeEvent, JACCARD_POINTS};
pub use prune::{prune_weights, PruneEvent};

use crate::nfc::NeuroFuzzyController;

pub const DEFAULT_ALPHA: f64 = 0.95;
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimplificationLog {
    pub merges: Vec<MergeEvent>,
    pub prunes: Vec<PruneEvent>,
}

impl SimplificationLog {
    pub fn to_text(&self, feature_names: &[String]) -> String {
        let name = |i: usize| feature_names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
        let mut out = String::new();
        for m in &self.merges {
            out.push_str(&format!(
                "merge dim {} ({}) sets {} {} jaccard {:.6} -> set {} mu {:.6} sigma {:.6} count {}\n",
                m.dim,
                name(m.dim),
                m.first,
                m.second,
                m.jaccard,
                m.result_id,
                m.result.center,
                m.result.width,
                m.result.merge_count
            ));
        }
        for p in &self.prunes {
            out.push_str(&format!(
                "prune rule {} dim {} ({}) weight {:.6}\n",
                p.rule,
                p.dim,
                name(p.dim),
                p.weight
            ));
        }
        if out.is_empty() {
            out.push_str("no changes\n");
        }
        out
    }
}

/// Merge, then prune.
pub fn simplify(
    ctrl: &NeuroFuzzyController,
    alpha: f64,
    threshold: f64,
) -> (NeuroFuzzyController, SimplificationLog) {
    let (merged, merges) = merge_sets(ctrl, alpha);
    let (pruned, prunes) = prune_weights(&merged, threshold);
    (pruned, SimplificationLog { merges, prunes })
}
