use crate::nfc::{FuzzySet, NeuroFuzzyController};

/// Quadrature points used by [`jaccard`].
pub const JACCARD_POINTS: usize = 2001;

#[derive(Clone, Debug, PartialEq)]
pub struct MergeEvent {
    pub dim: usize,
    /// Set ids (within the dimension) at the time of the merge.
    pub first: usize,
    pub second: usize,
    pub jaccard: f64,
    pub result_id: usize,
    pub result: FuzzySet,
}

/// Jaccard index of two Gaussian sets: ∫min / ∫max, trapezoid rule over a
/// window reaching five widest widths past both centers.
pub fn jaccard(a: &FuzzySet, b: &FuzzySet) -> f64 {
    let spread = 5.0 * a.width.max(b.width);
    let lo = a.center.min(b.center) - spread;
    let hi = a.center.max(b.center) + spread;
    let h = (hi - lo) / (JACCARD_POINTS - 1) as f64;
    let (mut inter, mut union) = (0.0, 0.0);
    for p in 0..JACCARD_POINTS {
        let x = if p == JACCARD_POINTS - 1 { hi } else { lo + h * p as f64 };
        let (ma, mb) = (a.membership(x), b.membership(x));
        let w = if p == 0 || p == JACCARD_POINTS - 1 { 0.5 } else { 1.0 };
        inter += w * ma.min(mb);
        union += w * ma.max(mb);
    }
    if union == 0.0 {
        return 0.0;
    }
    inter / union
}

fn merged_set(a: &FuzzySet, b: &FuzzySet) -> FuzzySet {
    let (na, nb) = (a.merge_count as f64, b.merge_count as f64);
    FuzzySet {
        center: (na * a.center + nb * b.center) / (na + nb),
        width: (na * a.width + nb * b.width) / (na + nb),
        merge_count: a.merge_count + b.merge_count,
    }
}

/// Repeatedly merges the most similar pair of sets in each dimension while
/// their Jaccard index exceeds `alpha`. Rules that referenced either set
/// share the merged one afterwards.
pub fn merge_sets(ctrl: &NeuroFuzzyController, alpha: f64) -> (NeuroFuzzyController, Vec<MergeEvent>) {
    let mut out = ctrl.clone();
    let mut events = Vec::new();
    for dim in 0..out.inputs() {
        loop {
            let sets = out.sets_in_dim(dim);
            let mut best: Option<(usize, usize, f64)> = None;
            for a in 0..sets.len() {
                for b in a + 1..sets.len() {
                    let j = jaccard(&sets[a], &sets[b]);
                    if best.map_or(true, |(_, _, bj)| j > bj) {
                        best = Some((a, b, j));
                    }
                }
            }
            match best {
                Some((a, b, j)) if j > alpha => {
                    let merged = merged_set(&sets[a], &sets[b]);
                    let id = out.replace_sets(dim, a, b, merged);
                    events.push(MergeEvent { dim, first: a, second: b, jaccard: j, result_id: id, result: merged });
                }
                _ => break,
            }
        }
    }
    (out, events)
}
