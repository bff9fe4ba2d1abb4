use std::time::Instant;

use super::loss::total_loss;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::gmminit::DistillSample;
use crate::harness::{evaluate, EpisodeStats};
use crate::nfc::NeuroFuzzyController;
use crate::qnet::{epsilon_greedy, DifferentiableQ, InputScaling, Optimizer, OptimizerKind, QFunction, ReplayBuffer};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct DistillConfig {
    /// Teacher softmax temperature.
    pub tau: f64,
    /// Exploration rate of the student policy, constant over the run.
    pub epsilon: f64,
    pub lambda_merge: f64,
    pub lambda_tnorm: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub episodes: usize,
    /// Greedy evaluation every this many episodes.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Optimize centers and widths in units of each input's typical range
    /// instead of raw observation units.
    pub range_scaled: bool,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            tau: 0.1,
            epsilon: 0.05,
            lambda_merge: 1.0,
            lambda_tnorm: 0.5,
            batch_size: 64,
            buffer_capacity: 10_000,
            learning_rate: 5e-3,
            optimizer: OptimizerKind::adam(),
            episodes: 20,
            eval_interval: 1,
            eval_episodes: 5,
            range_scaled: true,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.lambda_merge < 0.0 || self.lambda_tnorm < 0.0 {
            return bad("regularizer weights must be non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || !(self.learning_rate > 0.0) {
            return bad("batch size, buffer capacity and learning rate must be positive");
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad("evaluation interval and episodes must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DistillOutcome {
    pub student: NeuroFuzzyController,
    pub episodes: Vec<EpisodeStats>,
    /// Batch samples that hit the degenerate-activation fallback.
    pub degenerate_samples: u64,
}

pub fn distill<T: QFunction + ?Sized>(
    teacher: &T,
    student: NeuroFuzzyController,
    kind: EnvKind,
    config: &DistillConfig,
    seed: u64,
) -> Result<DistillOutcome> {
    distill_with_observer(teacher, student, kind, config, seed, &mut |_, _| Ok(()))
}

/// Distillation loop; `observer` sees every finished episode together with
/// the current student (used for checkpointing).
pub fn distill_with_observer<T: QFunction + ?Sized>(
    teacher: &T,
    mut student: NeuroFuzzyController,
    kind: EnvKind,
    config: &DistillConfig,
    seed: u64,
    observer: &mut dyn FnMut(&EpisodeStats, &NeuroFuzzyController) -> Result<()>,
) -> Result<DistillOutcome> {
    config.validate()?;
    if student.inputs() != kind.obs_dim() || student.outputs() != kind.num_actions() {
        return Err(Error::DimensionMismatch {
            expected: kind.obs_dim(),
            got: student.inputs(),
        });
    }
    if teacher.num_actions() != student.outputs() {
        return Err(Error::DimensionMismatch {
            expected: student.outputs(),
            got: teacher.num_actions(),
        });
    }
    let env_seed = seed::derive(seed, seed::stream::DISTILL_ENV);
    let eval_seed = seed::derive(seed, seed::stream::EVAL);
    let mut replay_rng = seed::rng(seed::derive(seed, seed::stream::DISTILL_REPLAY));
    let mut explore_rng = seed::rng(seed::derive(seed, seed::stream::DISTILL_EXPLORE));

    let mut memory: ReplayBuffer<DistillSample> = ReplayBuffer::new(config.buffer_capacity);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, student.param_count());
    // Centers and widths are optimized in units of each input's operating
    // range so one learning rate suits inputs of very different magnitude.
    let input_scales: Vec<f64> = if config.range_scaled {
        InputScaling::for_env(kind).scale.iter().map(|s| 1.0 / s).collect()
    } else {
        vec![1.0; kind.obs_dim()]
    };
    let scales = student.parameter_scales(&input_scales);

    let mut env = kind.make();
    let mut episodes = Vec::with_capacity(config.episodes);
    let mut degenerate_samples = 0u64;
    let mut step = 0u64;

    for episode in 0..config.episodes {
        let started = Instant::now();
        let mut state = env.reset(seed::derive(env_seed, episode as u64)).observation;
        let mut total_reward = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        loop {
            let q_student = student.forward(&state)?.q;
            let action = epsilon_greedy(&q_student, config.epsilon, &mut explore_rng);
            let result = env.step(action)?;
            total_reward += result.reward;
            let teacher_q = teacher.q_values(&state)?;
            memory.push(DistillSample {
                state,
                teacher_q,
            });
            state = result.next_observation;
            step += 1;

            let batch = memory.sample(config.batch_size, &mut replay_rng);
            let loss = total_loss(&student, &batch, config);
            if !loss.total.is_finite() || loss.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { step });
            }
            degenerate_samples += loss.degenerate as u64;
            loss_sum += loss.total;
            loss_count += 1;
            let mut params: Vec<f64> = student.flat_params().iter().zip(&scales).map(|(p, s)| p / s).collect();
            let grad: Vec<f64> = loss.grad.iter().zip(&scales).map(|(g, s)| g * s).collect();
            optimizer.step(&mut params, &grad);
            params.iter_mut().zip(&scales).for_each(|(p, s)| *p *= s);
            student.set_flat_params(&params);
            student.project();

            if result.done {
                break;
            }
        }

        let eval_median = if (episode + 1) % config.eval_interval == 0 {
            Some(evaluate(&student, kind, config.eval_episodes, eval_seed)?.median)
        } else {
            None
        };
        let stats = EpisodeStats {
            episode,
            reward: total_reward,
            loss_mean: loss_sum / loss_count.max(1) as f64,
            eval_median,
            wall_time: started.elapsed().as_secs_f64(),
        };
        observer(&stats, &student)?;
        episodes.push(stats);
    }
    Ok(DistillOutcome {
        student,
        episodes,
        degenerate_samples,
    })
}
