use super::super::qnet::{argmax, DifferentiableQ, QFunction};
use crate::error::{Error, Result};

/// Lower bound on set widths, in observation units.
pub const SIGMA_MIN: f64 = 1e-3;

/// Below this total activation the sample is treated as degenerate.
pub const DEGENERATE_SUM: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuzzySet {
    pub center: f64,
    pub width: f64,
    /// Number of original sets averaged into this one.
    pub merge_count: u32,
}

impl FuzzySet {
    pub fn new(center: f64, width: f64) -> Self {
        FuzzySet {
            center,
            width,
            merge_count: 1,
        }
    }

    /// `-((x - center) / width)^2`
    pub fn log_membership(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        -z * z
    }

    pub fn membership(&self, x: f64) -> f64 {
        self.log_membership(x).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NfcForward {
    pub q: Vec<f64>,
    /// Raw rule activations `R_j`.
    pub activations: Vec<f64>,
    /// `R_j / sum R`, or uniform when degenerate.
    pub normalized: Vec<f64>,
    /// Total activation underflowed; `normalized` is the uniform fallback.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuroFuzzyController {
    inputs: usize,
    rules: usize,
    outputs: usize,
    /// Distinct sets of each input dimension.
    sets: Vec<Vec<FuzzySet>>,
    /// `set_index[i * rules + j]` selects the set of dimension `i` used by rule `j`.
    set_index: Vec<usize>,
    raw_weights: Vec<f64>,
    active: Vec<bool>,
    /// `consequents[j * outputs + c]`
    consequents: Vec<f64>,
}

impl NeuroFuzzyController {
    /// Builds a controller where every term owns its set, all raw weights are
    /// 1 and every term is active. `centers` and `widths` are indexed
    /// `[i * rules + j]`, consequents `[j * outputs + c]`.
    pub fn new(
        inputs: usize,
        rules: usize,
        outputs: usize,
        centers: &[f64],
        widths: &[f64],
        consequents: &[f64],
    ) -> Self {
        assert!(inputs > 0 && rules > 0 && outputs > 0, "empty controller");
        assert_eq!(centers.len(), inputs * rules);
        assert_eq!(widths.len(), inputs * rules);
        assert_eq!(consequents.len(), rules * outputs);
        let sets = (0..inputs)
            .map(|i| {
                (0..rules)
                    .map(|j| {
                        let k = i * rules + j;
                        FuzzySet::new(centers[k], widths[k].max(SIGMA_MIN))
                    })
                    .collect()
            })
            .collect();
        NeuroFuzzyController {
            inputs,
            rules,
            outputs,
            sets,
            set_index: (0..inputs).flat_map(|_| 0..rules).collect(),
            raw_weights: vec![1.0; inputs * rules],
            active: vec![true; inputs * rules],
            consequents: consequents.to_vec(),
        }
    }

    /// Assembles a controller from its stored representation, checking consistency.
    pub(crate) fn from_parts(
        shape: (usize, usize, usize),
        sets: Vec<Vec<FuzzySet>>,
        set_index: Vec<usize>,
        raw_weights: Vec<f64>,
        active: Vec<bool>,
        consequents: Vec<f64>,
    ) -> std::result::Result<Self, String> {
        let (m, n, k) = shape;
        if m == 0 || n == 0 || k == 0 {
            return Err("empty controller".into());
        }
        if sets.len() != m
            || set_index.len() != m * n
            || raw_weights.len() != m * n
            || active.len() != m * n
            || consequents.len() != n * k
        {
            return Err("inconsistent array sizes".into());
        }
        for i in 0..m {
            for j in 0..n {
                if set_index[i * n + j] >= sets[i].len() {
                    return Err(format!("term ({j}, {i}) references a missing set"));
                }
            }
            if sets[i].iter().any(|s| !(s.width > 0.0) || s.merge_count == 0) {
                return Err(format!("invalid set in dimension {i}"));
            }
        }
        for j in 0..n {
            if !(0..m).any(|i| active[i * n + j]) {
                return Err(format!("rule {j} has no active term"));
            }
        }
        let finite = sets.iter().flatten().all(|s| s.center.is_finite() && s.width.is_finite())
            && raw_weights.iter().chain(&consequents).all(|v| v.is_finite());
        if !finite {
            return Err("non-finite parameter".into());
        }
        Ok(NeuroFuzzyController {
            inputs: m,
            rules: n,
            outputs: k,
            sets,
            set_index,
            raw_weights,
            active,
            consequents,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn rules(&self) -> usize {
        self.rules
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    fn term(&self, dim: usize, rule: usize) -> usize {
        dim * self.rules + rule
    }

    pub fn sets_in_dim(&self, dim: usize) -> &[FuzzySet] {
        &self.sets[dim]
    }

    pub fn set_id(&self, dim: usize, rule: usize) -> usize {
        self.set_index[self.term(dim, rule)]
    }

    pub fn set(&self, dim: usize, rule: usize) -> &FuzzySet {
        &self.sets[dim][self.set_id(dim, rule)]
    }

    pub fn set_mut(&mut self, dim: usize, rule: usize) -> &mut FuzzySet {
        let id = self.set_id(dim, rule);
        &mut self.sets[dim][id]
    }

    pub fn raw_weight(&self, dim: usize, rule: usize) -> f64 {
        self.raw_weights[self.term(dim, rule)]
    }

    pub fn set_raw_weight(&mut self, dim: usize, rule: usize, value: f64) {
        let t = self.term(dim, rule);
        self.raw_weights[t] = value;
    }

    /// Non-negative importance weight `max(raw, 0)`.
    pub fn weight(&self, dim: usize, rule: usize) -> f64 {
        self.raw_weight(dim, rule).max(0.0)
    }

    pub fn is_active(&self, dim: usize, rule: usize) -> bool {
        self.active[self.term(dim, rule)]
    }

    pub fn set_active(&mut self, dim: usize, rule: usize, active: bool) {
        let t = self.term(dim, rule);
        self.active[t] = active;
    }

    pub fn consequent(&self, rule: usize) -> &[f64] {
        &self.consequents[rule * self.outputs..(rule + 1) * self.outputs]
    }

    pub fn consequent_mut(&mut self, rule: usize) -> &mut [f64] {
        let k = self.outputs;
        &mut self.consequents[rule * k..(rule + 1) * k]
    }

    /// Largest active weight of a rule and its lowest index.
    fn max_weight(&self, rule: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.inputs {
            if !self.is_active(i, rule) {
                continue;
            }
            let w = self.weight(i, rule);
            if best.map_or(true, |(_, b)| w > b) {
                best = Some((i, w));
            }
        }
        best
    }

    /// Weights of a rule divided by its largest active weight; 0 for inactive
    /// terms. A rule whose active weights are all zero gets all zeros.
    pub fn normalized_weights(&self, rule: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.inputs];
        if let Some((_, max)) = self.max_weight(rule) {
            if max > 0.0 {
                for (i, o) in out.iter_mut().enumerate() {
                    if self.is_active(i, rule) {
                        *o = self.weight(i, rule) / max;
                    }
                }
            }
        }
        out
    }

    /// True when no rule uses dimension `dim`.
    pub fn dimension_pruned(&self, dim: usize) -> bool {
        (0..self.rules).all(|j| !self.is_active(dim, j))
    }

    fn log_activation(&self, rule: usize, x: &[f64], weights: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.inputs {
            if self.is_active(i, rule) && weights[i] != 0.0 {
                acc += weights[i] * self.set(i, rule).log_membership(x[i]);
            }
        }
        acc
    }

    /// Weighted product T-norm activation of one rule, computed in the log domain.
    pub fn rule_activation(&self, rule: usize, x: &[f64]) -> f64 {
        let w = self.normalized_weights(rule);
        self.log_activation(rule, x, &w).exp()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs {
            return Err(Error::DimensionMismatch {
                expected: self.inputs,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<NfcForward> {
        self.check_input(x)?;
        let activations: Vec<f64> = (0..self.rules).map(|j| self.rule_activation(j, x)).collect();
        let total: f64 = activations.iter().sum();
        let degenerate = !(total >= DEGENERATE_SUM) || !total.is_finite();
        let normalized: Vec<f64> = if degenerate {
            vec![1.0 / self.rules as f64; self.rules]
        } else {
            activations.iter().map(|r| r / total).collect()
        };
        let mut q = vec![0.0; self.outputs];
        for (j, rbar) in normalized.iter().enumerate() {
            for (qc, yc) in q.iter_mut().zip(self.consequent(j)) {
                *qc += rbar * yc;
            }
        }
        Ok(NfcForward {
            q,
            activations,
            normalized,
            degenerate,
        })
    }

    pub fn greedy_action(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?.q))
    }

    // Flat parameter layout: [(center, width) for every set of every
    // dimension] ++ raw weights [i * rules + j] ++ consequents [j * outputs + c].

    fn set_offset(&self, dim: usize) -> usize {
        self.sets[..dim].iter().map(|s| 2 * s.len()).sum()
    }

    pub fn center_index(&self, dim: usize, set: usize) -> usize {
        self.set_offset(dim) + 2 * set
    }

    pub fn width_index(&self, dim: usize, set: usize) -> usize {
        self.center_index(dim, set) + 1
    }

    pub fn weight_index(&self, dim: usize, rule: usize) -> usize {
        self.set_offset(self.inputs) + self.term(dim, rule)
    }

    pub fn consequent_index(&self, rule: usize, out: usize) -> usize {
        self.set_offset(self.inputs) + self.inputs * self.rules + rule * self.outputs + out
    }

    pub fn param_count(&self) -> usize {
        self.set_offset(self.inputs) + self.inputs * self.rules + self.rules * self.outputs
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for s in self.sets.iter().flatten() {
            p.push(s.center);
            p.push(s.width);
        }
        p.extend_from_slice(&self.raw_weights);
        p.extend_from_slice(&self.consequents);
        p
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut it = p.iter().copied();
        for s in self.sets.iter_mut().flatten() {
            s.center = it.next().unwrap();
            s.width = it.next().unwrap();
        }
        for w in self.raw_weights.iter_mut() {
            *w = it.next().unwrap();
        }
        for y in self.consequents.iter_mut() {
            *y = it.next().unwrap();
        }
    }

    /// Clamps widths to [`SIGMA_MIN`].
    pub fn clamp_widths(&mut self) {
        for s in self.sets.iter_mut().flatten() {
            if !(s.width >= SIGMA_MIN) {
                s.width = SIGMA_MIN;
            }
        }
    }

    /// Projects raw weights onto [0, inf). Weights sitting at zero keep
    /// receiving gradient, so a term can regain importance later.
    pub fn clamp_weights(&mut self) {
        for w in self.raw_weights.iter_mut() {
            if !(*w >= 0.0) {
                *w = 0.0;
            }
        }
    }

    /// Per-parameter scale in the flat layout: `input_scales[i]` for the
    /// centers and widths of dimension `i`, 1 for weights and consequents.
    pub fn parameter_scales(&self, input_scales: &[f64]) -> Vec<f64> {
        assert_eq!(input_scales.len(), self.inputs);
        let mut out = Vec::with_capacity(self.param_count());
        for (dim, sets) in self.sets.iter().enumerate() {
            out.extend(std::iter::repeat(input_scales[dim]).take(2 * sets.len()));
        }
        out.resize(self.param_count(), 1.0);
        out
    }

    /// Gradient of `q(x) . upstream` with respect to every parameter, in the
    /// flat layout.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let fwd = self.forward(x)?;
        let mut grad = vec![0.0; self.param_count()];
        self.backward_into(x, &fwd, upstream, &mut grad);
        Ok(grad)
    }

    /// Adds the gradient of `q(x) . upstream` into `grad`, given the forward pass at `x`.
    pub fn backward_into(&self, x: &[f64], fwd: &NfcForward, upstream: &[f64], grad: &mut [f64]) {
        assert_eq!(upstream.len(), self.outputs);
        for j in 0..self.rules {
            for c in 0..self.outputs {
                grad[self.consequent_index(j, c)] += fwd.normalized[j] * upstream[c];
            }
        }
        // The uniform fallback does not depend on the antecedents.
        if fwd.degenerate {
            return;
        }
        let q_dot: f64 = fwd.q.iter().zip(upstream).map(|(a, b)| a * b).sum();
        for j in 0..self.rules {
            let y_dot: f64 = self.consequent(j).iter().zip(upstream).map(|(a, b)| a * b).sum();
            let d_log_r = fwd.normalized[j] * (y_dot - q_dot);
            if d_log_r == 0.0 {
                continue;
            }
            let Some((i_max, w_max)) = self.max_weight(j) else {
                continue;
            };
            if w_max <= 0.0 {
                continue;
            }
            let mut d_wmax = 0.0;
            for i in 0..self.inputs {
                if !self.is_active(i, j) {
                    continue;
                }
                let w = self.weight(i, j);
                let w_hat = w / w_max;
                let sid = self.set_id(i, j);
                let set = &self.sets[i][sid];
                let z = (x[i] - set.center) / set.width;
                if w_hat != 0.0 {
                    grad[self.center_index(i, sid)] += d_log_r * w_hat * 2.0 * z / set.width;
                    grad[self.width_index(i, sid)] += d_log_r * w_hat * 2.0 * z * z / set.width;
                }
                if i == i_max {
                    continue;
                }
                // dL/dw_hat for this term
                let g_hat = d_log_r * (-z * z);
                if self.raw_weight(i, j) >= 0.0 {
                    grad[self.weight_index(i, j)] += g_hat / w_max;
                }
                d_wmax -= g_hat * w / (w_max * w_max);
            }
            if self.raw_weight(i_max, j) >= 0.0 {
                grad[self.weight_index(i_max, j)] += d_wmax;
            }
        }
    }

    /// Replaces sets `a` and `b` of dimension `dim` by `merged`; every term
    /// that referenced either now references the merged set. Returns its id.
    pub fn replace_sets(&mut self, dim: usize, a: usize, b: usize, merged: FuzzySet) -> usize {
        assert!(a != b);
        let (lo, hi) = (a.min(b), a.max(b));
        self.sets[dim][lo] = merged;
        self.sets[dim].remove(hi);
        for j in 0..self.rules {
            let t = self.term(dim, j);
            let id = self.set_index[t];
            self.set_index[t] = match id {
                x if x == hi => lo,
                x if x > hi => x - 1,
                x => x,
            };
        }
        lo
    }
}

impl QFunction for NeuroFuzzyController {
    fn input_dim(&self) -> usize {
        self.inputs
    }

    fn num_actions(&self) -> usize {
        self.outputs
    }

    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(state)?.q)
    }
}

impl DifferentiableQ for NeuroFuzzyController {
    fn num_params(&self) -> usize {
        self.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.flat_params()
    }

    fn set_params(&mut self, params: &[f64]) {
        self.set_flat_params(params);
    }

    /// Fails with [`Error::DegenerateActivation`] when the sample lies far
    /// from every rule.
    fn accumulate_gradient(
        &self,
        state: &[f64],
        grad: &mut [f64],
        upstream: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<Vec<f64>> {
        let fwd = self.forward(state)?;
        if fwd.degenerate {
            return Err(Error::DegenerateActivation);
        }
        let up = upstream(&fwd.q);
        self.backward_into(state, &fwd, &up, grad);
        Ok(fwd.q)
    }

    fn project(&mut self) {
        self.clamp_widths();
        self.clamp_weights();
    }
}
