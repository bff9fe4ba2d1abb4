use crate::nfc::NeuroFuzzyController;

#[derive(Clone, Debug, PartialEq)]
pub struct PruneEvent {
    pub rule: usize,
    pub dim: usize,
    /// Normalized importance weight at the time of removal.
    pub weight: f64,
}

/// Deactivates every term whose normalized importance weight is below
/// `threshold`. A rule never loses its last active term: if all of its
/// terms fall below the threshold, the largest one (lowest dimension on
/// ties) is kept.
pub fn prune_weights(ctrl: &NeuroFuzzyController, threshold: f64) -> (NeuroFuzzyController, Vec<PruneEvent>) {
    let mut out = ctrl.clone();
    let mut events = Vec::new();
    for rule in 0..out.rules() {
        let w = out.normalized_weights(rule);
        let active: Vec<usize> = (0..out.inputs()).filter(|&i| out.is_active(i, rule)).collect();
        let keep_best = active.iter().all(|&i| w[i] < threshold);
        let best = active
            .iter()
            .copied()
            .fold(None, |acc: Option<usize>, i| match acc {
                Some(b) if w[b] >= w[i] => Some(b),
                _ => Some(i),
            });
        for &i in &active {
            if w[i] < threshold && !(keep_best && Some(i) == best) {
                out.set_active(i, rule, false);
                events.push(PruneEvent { rule, dim: i, weight: w[i] });
            }
        }
    }
    (out, events)
}
