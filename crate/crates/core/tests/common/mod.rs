//! Finite-difference oracles and the property battery, shared by the
//! integration tests and the acceptance runner.

#![allow(dead_code)]

use std::path::Path;

use fuzzy_distill::distill::{kl_loss, log_softmax, temperature_softmax, total_loss, DistillConfig};
use fuzzy_distill::envs::EnvKind;
use fuzzy_distill::gmminit::{fit_gmm, read_dataset, write_dataset, DistillSample, GmmConfig};
use fuzzy_distill::harness::RunConfig;
use fuzzy_distill::nfc::{FuzzySet, NeuroFuzzyController};
use fuzzy_distill::postproc::{jaccard, merge_sets, prune_weights};
use fuzzy_distill::qnet::{
    dqn_train_step, DifferentiableQ, InputScaling, MlpQNetwork, Optimizer, OptimizerKind, QFunction, Transition,
};
use fuzzy_distill::seed;
use rand::Rng;

pub const GRADIENT_CASES: usize = 100;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-4;
/// Components smaller than this are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

pub type Check = Result<(), String>;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Five-point central differences of `f` at `params`.
pub fn numeric_gradient(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            let mut at = |offset: f64| {
                p[i] = orig + offset;
                f(&p)
            };
            let h = FD_STEP;
            let d = 8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h));
            p[i] = orig;
            d / (12.0 * h)
        })
        .collect()
}

fn compare(what: &str, case: usize, analytic: &[f64], numeric: &[f64]) -> Check {
    if analytic.len() != numeric.len() {
        return Err(format!("{what} case {case}: gradient length {} vs {}", analytic.len(), numeric.len()));
    }
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let rel = relative_error(*a, *n);
        if !(rel <= GRADIENT_TOLERANCE) {
            return Err(format!("{what} case {case}: param {i} analytic {a} vs numeric {n} (rel {rel:e})"));
        }
    }
    Ok(())
}

/// Random controller whose raw weights are positive and, within each rule,
/// pairwise separated, and whose sets in a dimension differ clearly in
/// center and width, so every loss term is differentiable at the sample.
pub fn random_controller<R: Rng>(rng: &mut R, max_inputs: usize, max_rules: usize, max_outputs: usize) -> NeuroFuzzyController {
    let m = rng.gen_range(1..=max_inputs);
    let n = rng.gen_range(1..=max_rules);
    let k = rng.gen_range(1..=max_outputs);
    loop {
        let centers: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let widths: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let ys: Vec<f64> = (0..n * k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let raw: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let separated = |v: &[f64], idx: &dyn Fn(usize, usize) -> usize, outer: usize, inner: usize| {
            (0..outer).all(|o| {
                (0..inner).all(|a| (a + 1..inner).all(|b| (v[idx(o, a)] - v[idx(o, b)]).abs() > 0.05))
            })
        };
        // centers/widths are indexed dim-major, raw weights likewise
        let by_dim = |i: usize, j: usize| i * n + j;
        let by_rule = |j: usize, i: usize| i * n + j;
        if !separated(&centers, &by_dim, m, n) || !separated(&widths, &by_dim, m, n) || !separated(&raw, &by_rule, n, m)
        {
            continue;
        }
        let mut c = NeuroFuzzyController::new(m, n, k, &centers, &widths, &ys);
        for i in 0..m {
            for j in 0..n {
                c.set_raw_weight(i, j, raw[i * n + j]);
            }
        }
        return c;
    }
}

/// An input within two widths of some rule's centers, so activations are
/// far from underflow.
fn input_near<R: Rng>(rng: &mut R, ctrl: &NeuroFuzzyController) -> Vec<f64> {
    let j = rng.gen_range(0..ctrl.rules());
    (0..ctrl.inputs())
        .map(|i| {
            let s = ctrl.set(i, j);
            s.center + rng.gen_range(-2.0..2.0) * s.width
        })
        .collect()
}

/// Vector-Jacobian product of the controller against differences of `u . q`.
pub fn check_nfc_backward(cases: usize, seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for case in 0..cases {
        let ctrl = random_controller(&mut rng, 4, 4, 3);
        let x = input_near(&mut rng, &ctrl);
        let u: Vec<f64> = (0..ctrl.outputs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let analytic = ctrl.backward(&x, &u).map_err(|e| e.to_string())?;
        let mut probe = ctrl.clone();
        let numeric = numeric_gradient(&ctrl.flat_params(), |p| {
            probe.set_flat_params(p);
            let q = probe.forward(&x).expect("input has the right dimension").q;
            q.iter().zip(&u).map(|(a, b)| a * b).sum()
        });
        compare("nfc backward", case, &analytic, &numeric)?;
    }
    Ok(())
}

fn random_transitions<R: Rng>(rng: &mut R, inputs: usize, actions: usize, near: Option<&NeuroFuzzyController>) -> Vec<Transition> {
    let count = rng.gen_range(1..=8);
    let state = |rng: &mut R| match near {
        Some(c) => input_near(rng, c),
        None => (0..inputs).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>(),
    };
    (0..count)
        .map(|_| Transition {
            state: state(rng),
            action: rng.gen_range(0..actions),
            reward: rng.gen_range(-1.0..1.0),
            next_state: state(rng),
            done: rng.gen_bool(0.3),
        })
        .collect()
}

/// Mean squared Bellman error, from forward passes only.
fn bellman_mse<Q: QFunction>(q: &Q, batch: &[Transition], targets: &[f64]) -> f64 {
    let sum: f64 = batch
        .iter()
        .zip(targets)
        .map(|(t, y)| {
            let e = q.q_values(&t.state).expect("state has the right dimension")[t.action] - y;
            e * e
        })
        .sum();
    sum / batch.len() as f64
}

/// Runs one plain gradient-descent training step and recovers the gradient
/// it applied from the parameter change; compares that with differences of
/// the Bellman error against independently computed targets.
fn check_train_step<Q: DifferentiableQ>(what: &str, case: usize, q: &Q, target: &Q, batch: &[Transition], gamma: f64) -> Check {
    let targets: Vec<f64> = batch
        .iter()
        .map(|t| {
            if t.done {
                t.reward
            } else {
                let next = target.q_values(&t.next_state).expect("state has the right dimension");
                t.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect();
    let lr = 1e-3;
    let before = q.params();
    let mut stepped = q.clone();
    let mut opt = Optimizer::new(OptimizerKind::Sgd { momentum: 0.0 }, lr, q.num_params());
    let refs: Vec<&Transition> = batch.iter().collect();
    let (loss, skipped) =
        dqn_train_step(&mut stepped, target, &refs, gamma, &mut opt, None).map_err(|e| format!("{what}: {e}"))?;
    if skipped != 0 {
        return Err(format!("{what} case {case}: {skipped} samples skipped"));
    }
    let expected_loss = bellman_mse(q, batch, &targets);
    if relative_error(loss, expected_loss) > 1e-12 {
        return Err(format!("{what} case {case}: loss {loss} vs {expected_loss}"));
    }
    let applied: Vec<f64> = before.iter().zip(stepped.params()).map(|(b, a)| (b - a) / lr).collect();
    let mut probe = q.clone();
    let numeric = numeric_gradient(&before, |p| {
        probe.set_params(p);
        bellman_mse(&probe, batch, &targets)
    });
    compare(what, case, &applied, &numeric)
}

/// Smallest |pre-activation| of any hidden unit over the batch states. The
/// loss has a kink where one crosses zero, which differences must not span.
fn relu_margin(net: &MlpQNetwork, batch: &[Transition]) -> f64 {
    let (m, sc) = (net.input_dim(), net.scaling());
    let mut margin = f64::INFINITY;
    for t in batch {
        let x: Vec<f64> = (0..m).map(|i| (t.state[i] - sc.shift[i]) * sc.scale[i]).collect();
        for (r, b) in net.b1().iter().enumerate() {
            let z = b + net.w1()[r * m..(r + 1) * m].iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
            margin = margin.min(z.abs());
        }
    }
    margin
}

/// `dqn_train_step` on the teacher MLP and on the controller.
pub fn check_dqn_train_step(cases: usize, seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for case in 0..cases {
        let inputs = rng.gen_range(1..=4);
        let hidden = rng.gen_range(2..=8);
        let actions = rng.gen_range(2..=3);
        let scaling = InputScaling {
            shift: (0..inputs).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            scale: (0..inputs).map(|_| rng.gen_range(0.5..2.0)).collect(),
        };
        let q = MlpQNetwork::random(inputs, hidden, actions, &mut rng).with_scaling(scaling.clone());
        let target = MlpQNetwork::random(inputs, hidden, actions, &mut rng).with_scaling(scaling);
        let batch = loop {
            let b = random_transitions(&mut rng, inputs, actions, None);
            if relu_margin(&q, &b) > 1e-2 {
                break b;
            }
        };
        let gamma = rng.gen_range(0.0..0.99);
        check_train_step("dqn step (mlp)", case, &q, &target, &batch, gamma)?;
    }
    for case in 0..cases {
        let q = random_controller(&mut rng, 4, 3, 3);
        let mut target = q.clone();
        for j in 0..target.rules() {
            for y in target.consequent_mut(j) {
                *y += rng.gen_range(-0.5..0.5);
            }
        }
        let batch = random_transitions(&mut rng, q.inputs(), q.outputs(), Some(&q));
        let gamma = rng.gen_range(0.0..0.99);
        check_train_step("dqn step (nfc)", case, &q, &target, &batch, gamma)?;
    }
    Ok(())
}

/// Distillation objective (KL plus both regularizers) against differences.
pub fn check_total_loss(cases: usize, seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for case in 0..cases {
        let ctrl = random_controller(&mut rng, 4, 4, 3);
        let batch: Vec<DistillSample> = (0..rng.gen_range(1..=8))
            .map(|_| DistillSample {
                state: input_near(&mut rng, &ctrl),
                teacher_q: (0..ctrl.outputs()).map(|_| rng.gen_range(-5.0..5.0)).collect(),
            })
            .collect();
        let refs: Vec<&DistillSample> = batch.iter().collect();
        let config = DistillConfig {
            tau: rng.gen_range(0.05..1.0),
            lambda_merge: rng.gen_range(0.0..2.0),
            lambda_tnorm: rng.gen_range(0.0..2.0),
            ..Default::default()
        };
        let analytic = total_loss(&ctrl, &refs, &config).grad;
        let mut probe = ctrl.clone();
        let numeric = numeric_gradient(&ctrl.flat_params(), |p| {
            probe.set_flat_params(p);
            total_loss(&probe, &refs, &config).total
        });
        compare("total loss", case, &analytic, &numeric)?;
    }
    Ok(())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const PROPERTY_CASES: usize = 200;

pub fn softmax_properties(seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for _ in 0..PROPERTY_CASES {
        let z: Vec<f64> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let tau = rng.gen_range(0.01..5.0);
        let p = temperature_softmax(&z, tau);
        let sum: f64 = p.iter().sum();
        ensure((sum - 1.0).abs() < 1e-12, || format!("softmax sums to {sum}"))?;
        let shift = rng.gen_range(-100.0..100.0);
        let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
        let ps = temperature_softmax(&shifted, tau);
        for (a, b) in p.iter().zip(&ps) {
            ensure((a - b).abs() < 1e-12, || format!("shift changed softmax: {a} vs {b}"))?;
        }
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
        for (pi, zi) in temperature_softmax(&z, 1.0).iter().zip(&z) {
            let plain = (zi - zmax).exp() / denom;
            ensure((pi - plain).abs() < 1e-12, || format!("tau 1 softmax {pi} vs {plain}"))?;
        }
        let logs = log_softmax(&z, tau);
        for (l, pi) in logs.iter().zip(&p) {
            ensure((l.exp() - pi).abs() < 1e-12, || format!("log softmax {l} vs {pi}"))?;
        }
    }
    Ok(())
}

pub fn kl_properties(seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for _ in 0..PROPERTY_CASES {
        let k = rng.gen_range(1..6);
        let a: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let tau = rng.gen_range(0.01..2.0);
        let kl = kl_loss(&a, &b, tau);
        ensure(kl >= -1e-12, || format!("negative KL {kl}"))?;
        // the student side is read at unit temperature, so a/tau (up to a
        // shift) gives the same distribution as the teacher side
        let shift = rng.gen_range(-3.0..3.0);
        let matched: Vec<f64> = a.iter().map(|v| v / tau + shift).collect();
        let same = kl_loss(&a, &matched, tau);
        ensure(same.abs() < 1e-9, || format!("KL of equal distributions {same}"))?;
        let unit = kl_loss(&a, &a, 1.0);
        ensure(unit.abs() < 1e-12, || format!("KL of equal inputs at unit temperature {unit}"))?;
    }
    Ok(())
}

pub fn controller_properties(seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for _ in 0..PROPERTY_CASES {
        let mut ctrl = random_controller(&mut rng, 4, 4, 3);
        let x = input_near(&mut rng, &ctrl);
        let fwd = ctrl.forward(&x).map_err(|e| e.to_string())?;
        let sum: f64 = fwd.normalized.iter().sum();
        ensure((sum - 1.0).abs() < 1e-12, || format!("normalized activations sum to {sum}"))?;

        for j in 0..ctrl.rules() {
            let max = ctrl.normalized_weights(j).iter().copied().fold(0.0, f64::max);
            ensure(max == 1.0, || format!("rule {j} max normalized weight {max}"))?;
        }

        // w = 1 everywhere: the rule fires with the plain product of memberships
        let j = rng.gen_range(0..ctrl.rules());
        for i in 0..ctrl.inputs() {
            ctrl.set_raw_weight(i, j, 0.7);
        }
        let product: f64 = (0..ctrl.inputs()).map(|i| ctrl.set(i, j).membership(x[i])).product();
        let act = ctrl.rule_activation(j, &x);
        ensure((act - product).abs() <= 1e-12 * product.max(1e-300), || format!("w=1 activation {act} vs {product}"))?;

        // w = 0 on one term: that input no longer influences the rule
        if ctrl.inputs() > 1 {
            let dead = rng.gen_range(0..ctrl.inputs());
            ctrl.set_raw_weight(dead, j, 0.0);
            let mut moved = x.clone();
            moved[dead] += rng.gen_range(-5.0..5.0);
            let a = ctrl.rule_activation(j, &x);
            let b = ctrl.rule_activation(j, &moved);
            let rest: f64 = (0..ctrl.inputs())
                .filter(|&i| i != dead)
                .map(|i| ctrl.set(i, j).membership(x[i]))
                .product();
            ensure(a == b, || format!("w=0 input changed activation {a} vs {b}"))?;
            ensure((a - rest).abs() <= 1e-12 * rest.max(1e-300), || format!("w=0 activation {a} vs {rest}"))?;
        }
    }
    Ok(())
}

pub fn em_monotonicity(seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for case in 0..20 {
        let dim = rng.gen_range(1..=4);
        let modes: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let data: Vec<Vec<f64>> = (0..300)
            .map(|r| modes[r % 3].iter().map(|m| m + rng.gen_range(-1.0..1.0)).collect())
            .collect();
        for standardize in [false, true] {
            let config = GmmConfig {
                components: rng.gen_range(1..=4),
                standardize,
                ..Default::default()
            };
            let fit = fit_gmm(&data, &config, case).map_err(|e| e.to_string())?;
            for w in fit.log_likelihood.windows(2) {
                ensure(w[1] >= w[0] - 1e-9, || format!("EM log-likelihood fell from {} to {}", w[0], w[1]))?;
            }
        }
    }
    Ok(())
}

/// Three mutually similar sets in one dimension merged in sequence end up
/// at their plain mean, whatever the pairing order.
pub fn merge_mean_property(seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for _ in 0..PROPERTY_CASES {
        let base = rng.gen_range(-3.0..3.0);
        let width = rng.gen_range(0.5..2.0);
        let centers: Vec<f64> = (0..3).map(|_| base + rng.gen_range(-0.01..0.01) * width).collect();
        let widths: Vec<f64> = (0..3).map(|_| width * (1.0 + rng.gen_range(-0.01..0.01))).collect();
        let ctrl = NeuroFuzzyController::new(1, 3, 1, &centers, &widths, &[0.0; 3]);
        let (merged, events) = merge_sets(&ctrl, 0.9);
        ensure(events.len() == 2, || format!("expected two merges, got {}", events.len()))?;
        let sets = merged.sets_in_dim(0);
        ensure(sets.len() == 1 && sets[0].merge_count == 3, || "merged set should absorb all three".into())?;
        let mean_c = centers.iter().sum::<f64>() / 3.0;
        let mean_w = widths.iter().sum::<f64>() / 3.0;
        ensure((sets[0].center - mean_c).abs() < 1e-12, || format!("merged center {} vs mean {mean_c}", sets[0].center))?;
        ensure((sets[0].width - mean_w).abs() < 1e-12, || format!("merged width {} vs mean {mean_w}", sets[0].width))?;
    }
    Ok(())
}

pub fn jaccard_properties(seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for _ in 0..PROPERTY_CASES {
        let a = FuzzySet::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.05..3.0));
        let b = FuzzySet::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.05..3.0));
        let (ab, ba) = (jaccard(&a, &b), jaccard(&b, &a));
        ensure((ab - ba).abs() < 1e-12, || format!("jaccard asymmetric {ab} vs {ba}"))?;
        ensure((0.0..=1.0).contains(&ab), || format!("jaccard out of range {ab}"))?;
        let id = jaccard(&a, &a);
        ensure((id - 1.0).abs() < 1e-12, || format!("self jaccard {id}"))?;
    }
    Ok(())
}

pub fn prune_idempotence(seed_value: u64) -> Check {
    let mut rng = seed::rng(seed_value);
    for _ in 0..PROPERTY_CASES {
        let mut ctrl = random_controller(&mut rng, 4, 4, 2);
        for i in 0..ctrl.inputs() {
            for j in 0..ctrl.rules() {
                if rng.gen_bool(0.4) {
                    ctrl.set_raw_weight(i, j, rng.gen_range(0.0..0.05));
                }
            }
        }
        let threshold = rng.gen_range(0.0..0.5);
        let (once, _) = prune_weights(&ctrl, threshold);
        let (twice, events) = prune_weights(&once, threshold);
        ensure(twice == once && events.is_empty(), || "second prune changed the controller".into())?;
    }
    Ok(())
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Every file format reproduces its input exactly.
pub fn serialization_round_trips(seed_value: u64, dir: &Path) -> Check {
    let mut rng = seed::rng(seed_value);
    for case in 0..50 {
        let mut ctrl = random_controller(&mut rng, 4, 4, 3);
        if ctrl.inputs() > 1 {
            ctrl.set_active(0, 0, false);
        }
        let (ctrl, _) = merge_sets(&ctrl, 0.0);
        let back = NeuroFuzzyController::from_text(&ctrl.to_text()).map_err(|e| e.to_string())?;
        ensure(back == ctrl && bits(&back.flat_params()) == bits(&ctrl.flat_params()), || {
            format!("rule base case {case} changed in round trip")
        })?;

        let inputs = rng.gen_range(1..=4);
        let net = MlpQNetwork::random(inputs, rng.gen_range(1..=8), 2, &mut rng).with_scaling(InputScaling {
            shift: (0..inputs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            scale: (0..inputs).map(|_| rng.gen_range(0.1..3.0)).collect(),
        });
        let back = MlpQNetwork::from_text(&net.to_text()).map_err(|e| e.to_string())?;
        ensure(back == net && bits(&back.params()) == bits(&net.params()), || {
            format!("weights case {case} changed in round trip")
        })?;

        let samples: Vec<DistillSample> = (0..20)
            .map(|_| DistillSample {
                state: (0..4).map(|_| rng.gen::<f64>() * 10f64.powi(rng.gen_range(-300..300))).collect(),
                teacher_q: (0..2).map(|_| rng.gen_range(-1e6..1e6)).collect(),
            })
            .collect();
        let path = dir.join(format!("dataset-{case}.csv"));
        write_dataset(&path, &samples, &EnvKind::CartPole.feature_names()).map_err(|e| e.to_string())?;
        let back = read_dataset(&path).map_err(|e| e.to_string())?;
        ensure(back == samples, || format!("dataset case {case} changed in round trip"))?;
    }
    for env in [EnvKind::CartPole, EnvKind::MountainCar] {
        let mut config = RunConfig::new(env);
        config.seeds = vec![rng.gen_range(0..1000), rng.gen_range(0..1000)];
        config.distill.learning_rate = rng.gen::<f64>() * 1e-2;
        config.distill.tau = rng.gen::<f64>();
        let back = RunConfig::from_text(&config.to_text()).map_err(|e| e.to_string())?;
        ensure(back == config, || format!("{env} configuration changed in round trip"))?;
    }
    Ok(())
}

/// Every property check, labelled.
pub fn property_battery(seed_value: u64, dir: &Path) -> Vec<(&'static str, Check)> {
    vec![
        ("softmax", softmax_properties(seed_value)),
        ("kl", kl_properties(seed_value)),
        ("controller", controller_properties(seed_value)),
        ("em monotonicity", em_monotonicity(seed_value)),
        ("merge mean", merge_mean_property(seed_value)),
        ("jaccard", jaccard_properties(seed_value)),
        ("prune idempotence", prune_idempotence(seed_value)),
        ("serialization", serialization_round_trips(seed_value, dir)),
    ]
}
