use super::DistillConfig;
use crate::gmminit::DistillSample;
use crate::nfc::NeuroFuzzyController;

/// `ln softmax(z / tau)`, computed with max subtraction.
pub fn log_softmax(z: &[f64], tau: f64) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = z.iter().map(|v| (v - max) / tau).collect();
    let lse = shifted.iter().map(|v| v.exp()).sum::<f64>().ln();
    shifted.iter().map(|v| v - lse).collect()
}

pub fn temperature_softmax(z: &[f64], tau: f64) -> Vec<f64> {
    assert!(tau > 0.0, "temperature must be positive");
    log_softmax(z, tau).into_iter().map(f64::exp).collect()
}

/// `sum_i p_i ln(p_i / s_i)` with `p = softmax(q_teacher / tau)` and
/// `s = softmax(q_student)`.
pub fn kl_loss(q_teacher: &[f64], q_student: &[f64], tau: f64) -> f64 {
    assert_eq!(q_teacher.len(), q_student.len());
    let log_p = log_softmax(q_teacher, tau);
    let log_s = log_softmax(q_student, 1.0);
    log_p
        .iter()
        .zip(&log_s)
        .map(|(lp, ls)| {
            let p = lp.exp();
            if p == 0.0 {
                0.0
            } else {
                p * (lp - ls)
            }
        })
        .sum::<f64>()
        .max(0.0)
}

/// Gradient of [`kl_loss`] with respect to the student Q-values: `s - p`.
pub fn kl_loss_grad(q_teacher: &[f64], q_student: &[f64], tau: f64) -> Vec<f64> {
    let p = temperature_softmax(q_teacher, tau);
    let s = temperature_softmax(q_student, 1.0);
    s.iter().zip(&p).map(|(s, p)| s - p).collect()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Active (dimension, rule) term pairs of each dimension, over ordered rule pairs.
fn active_pairs(ctrl: &NeuroFuzzyController) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    let n = ctrl.rules();
    (0..ctrl.inputs()).flat_map(move |i| {
        (0..n).flat_map(move |k| (0..n).map(move |l| (i, k, l))).filter(move |&(i, k, l)| {
            k != l && ctrl.is_active(i, k) && ctrl.is_active(i, l)
        })
    })
}

/// `sum_i sum_k sum_l |sigma_ik - sigma_il| / (1 + |mu_ik - mu_il|)` over
/// ordered pairs of active terms.
pub fn merge_regularizer(ctrl: &NeuroFuzzyController) -> f64 {
    active_pairs(ctrl)
        .map(|(i, k, l)| {
            let (a, b) = (ctrl.set(i, k), ctrl.set(i, l));
            (a.width - b.width).abs() / (1.0 + (a.center - b.center).abs())
        })
        .sum()
}

/// Adds `scale * d merge_regularizer / d theta` into `grad` (flat layout).
pub fn merge_regularizer_grad(ctrl: &NeuroFuzzyController, scale: f64, grad: &mut [f64]) {
    for (i, k, l) in active_pairs(ctrl) {
        let (sk, sl) = (ctrl.set_id(i, k), ctrl.set_id(i, l));
        if sk == sl {
            continue;
        }
        let (a, b) = (ctrl.set(i, k), ctrl.set(i, l));
        let dsig = a.width - b.width;
        let dmu = a.center - b.center;
        let denom = 1.0 + dmu.abs();
        let g_sig = scale * sign(dsig) / denom;
        let g_mu = -scale * dsig.abs() * sign(dmu) / (denom * denom);
        grad[ctrl.width_index(i, sk)] += g_sig;
        grad[ctrl.width_index(i, sl)] -= g_sig;
        grad[ctrl.center_index(i, sk)] += g_mu;
        grad[ctrl.center_index(i, sl)] -= g_mu;
    }
}

/// Sum of per-rule max-normalized importance weights over active terms.
pub fn tnorm_regularizer(ctrl: &NeuroFuzzyController) -> f64 {
    (0..ctrl.rules()).map(|j| ctrl.normalized_weights(j).iter().sum::<f64>()).sum()
}

/// Adds `scale * d tnorm_regularizer / d raw_weights` into `grad`.
pub fn tnorm_regularizer_grad(ctrl: &NeuroFuzzyController, scale: f64, grad: &mut [f64]) {
    for j in 0..ctrl.rules() {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..ctrl.inputs() {
            if ctrl.is_active(i, j) && best.map_or(true, |(_, b)| ctrl.weight(i, j) > b) {
                best = Some((i, ctrl.weight(i, j)));
            }
        }
        let Some((i_max, w_max)) = best else { continue };
        if w_max <= 0.0 {
            continue;
        }
        let mut d_max = 0.0;
        for i in 0..ctrl.inputs() {
            if i == i_max || !ctrl.is_active(i, j) {
                continue;
            }
            if ctrl.raw_weight(i, j) >= 0.0 {
                grad[ctrl.weight_index(i, j)] += scale / w_max;
            }
            d_max -= ctrl.weight(i, j) / (w_max * w_max);
        }
        if ctrl.raw_weight(i_max, j) >= 0.0 {
            grad[ctrl.weight_index(i_max, j)] += scale * d_max;
        }
    }
}

#[derive(Clone, Debug)]
pub struct LossBreakdown {
    pub total: f64,
    pub kl: f64,
    pub merge: f64,
    pub tnorm: f64,
    /// Gradient of `total` in the controller's flat parameter layout.
    pub grad: Vec<f64>,
    /// Batch samples whose activations underflowed.
    pub degenerate: usize,
}

/// Mean KL over the batch plus the weighted regularizers, with gradient.
pub fn total_loss(ctrl: &NeuroFuzzyController, batch: &[&DistillSample], config: &DistillConfig) -> LossBreakdown {
    assert!(!batch.is_empty(), "empty batch");
    let mut grad = vec![0.0; ctrl.param_count()];
    let inv = 1.0 / batch.len() as f64;
    let mut kl = 0.0;
    let mut degenerate = 0;
    for sample in batch {
        let fwd = ctrl
            .forward(&sample.state)
            .expect("distillation sample has the controller's input dimension");
        degenerate += usize::from(fwd.degenerate);
        kl += kl_loss(&sample.teacher_q, &fwd.q, config.tau);
        let up: Vec<f64> = kl_loss_grad(&sample.teacher_q, &fwd.q, config.tau)
            .into_iter()
            .map(|g| g * inv)
            .collect();
        ctrl.backward_into(&sample.state, &fwd, &up, &mut grad);
    }
    kl *= inv;
    let merge = merge_regularizer(ctrl);
    let tnorm = tnorm_regularizer(ctrl);
    if config.lambda_merge != 0.0 {
        merge_regularizer_grad(ctrl, config.lambda_merge, &mut grad);
    }
    if config.lambda_tnorm != 0.0 {
        tnorm_regularizer_grad(ctrl, config.lambda_tnorm, &mut grad);
    }
    LossBreakdown {
        total: kl + config.lambda_merge * merge + config.lambda_tnorm * tnorm,
        kl,
        merge,
        tnorm,
        grad,
        degenerate,
    }
}
