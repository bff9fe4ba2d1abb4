use std::time::Instant;

use rand::Rng;

use super::optim::clip_norm;
use super::{argmax, DifferentiableQ, InputScaling, MlpQNetwork, Optimizer, OptimizerKind, QFunction, ReplayBuffer};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::harness::{evaluate, EpisodeStats};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for genuine terminal states; time-limit truncation is not terminal.
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DqnConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Hard copy of the online network into the target network every this many steps.
    pub target_sync_interval: u64,
    /// Environment steps collected before the first gradient step.
    pub learning_starts: usize,
    pub train_every: u64,
    pub max_grad_norm: Option<f64>,
    pub max_episodes: usize,
    pub hidden_dim: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Stop early once a greedy evaluation reaches this median reward.
    pub stop_reward: Option<f64>,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::adam(),
            batch_size: 64,
            buffer_capacity: 50_000,
            target_sync_interval: 500,
            learning_starts: 1_000,
            train_every: 1,
            max_grad_norm: Some(10.0),
            max_episodes: 300,
            hidden_dim: 64,
            eval_interval: 10,
            eval_episodes: 10,
            stop_reward: None,
        }
    }
}

impl DqnConfig {
    /// Teacher-training preset for an environment.
    pub fn for_env(kind: EnvKind) -> Self {
        match kind {
            EnvKind::CartPole => DqnConfig {
                max_episodes: 400,
                stop_reward: Some(500.0),
                ..Default::default()
            },
            // Returns vary a lot between start states, so snapshot selection
            // uses a larger evaluation sample.
            EnvKind::MountainCar => DqnConfig {
                max_episodes: 800,
                eval_episodes: 20,
                ..Default::default()
            },
        }
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        if step >= self.epsilon_decay_steps || self.epsilon_decay_steps == 0 {
            return self.epsilon_end;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon values must lie in [0, 1]");
        }
        if self.learning_rate <= 0.0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("learning rate, batch size and buffer capacity must be positive");
        }
        if self.target_sync_interval == 0 || self.train_every == 0 || self.hidden_dim == 0 {
            return bad("target sync interval, train_every and hidden_dim must be positive");
        }
        if self.eval_episodes == 0 || self.eval_interval == 0 {
            return bad("evaluation interval and episodes must be positive");
        }
        Ok(())
    }
}

/// With probability `epsilon` a uniformly random action, otherwise the greedy one.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// `r` for terminal transitions, `r + gamma * max_a' Q_target(s', a')` otherwise.
pub fn bellman_targets<Q: QFunction + ?Sized>(
    batch: &[&Transition],
    target: &Q,
    gamma: f64,
) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                Ok(t.reward)
            } else {
                let next = target.q_values(&t.next_state)?;
                let best = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(t.reward + gamma * best)
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BatchLoss {
    /// Mean squared Bellman error over the samples that were used.
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Samples dropped because the model could not produce a gradient for them.
    pub skipped: usize,
}

/// Mean squared error between `Q(s, a)` and fixed `targets`, with its gradient.
pub fn bellman_loss_and_gradient<Q: DifferentiableQ>(
    q: &Q,
    batch: &[&Transition],
    targets: &[f64],
) -> Result<BatchLoss> {
    let mut sum_grad = vec![0.0; q.num_params()];
    let mut sample_grad = vec![0.0; q.num_params()];
    let mut sq_sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (t, &y) in batch.iter().zip(targets) {
        if t.action >= q.num_actions() {
            return Err(Error::InvalidAction {
                action: t.action,
                num_actions: q.num_actions(),
            });
        }
        sample_grad.iter_mut().for_each(|g| *g = 0.0);
        let mut err = 0.0;
        let res = q.accumulate_gradient(&t.state, &mut sample_grad, &mut |qv| {
            err = qv[t.action] - y;
            let mut up = vec![0.0; qv.len()];
            up[t.action] = 2.0 * err;
            up
        });
        match res {
            Ok(_) => {
                sq_sum += err * err;
                used += 1;
                sum_grad.iter_mut().zip(&sample_grad).for_each(|(s, g)| *s += g);
            }
            Err(Error::DegenerateActivation) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Ok(BatchLoss {
            loss: 0.0,
            grad: sum_grad,
            skipped,
        });
    }
    let inv = 1.0 / used as f64;
    sum_grad.iter_mut().for_each(|g| *g *= inv);
    Ok(BatchLoss {
        loss: sq_sum * inv,
        grad: sum_grad,
        skipped,
    })
}

/// One optimizer step on the mean squared Bellman error. Returns the
/// pre-step loss and the number of skipped samples.
pub fn dqn_train_step<Q: DifferentiableQ>(
    q: &mut Q,
    target: &Q,
    batch: &[&Transition],
    gamma: f64,
    optimizer: &mut Optimizer,
    max_grad_norm: Option<f64>,
) -> Result<(f64, usize)> {
    let targets = bellman_targets(batch, target, gamma)?;
    let BatchLoss {
        loss,
        mut grad,
        skipped,
    } = bellman_loss_and_gradient(q, batch, &targets)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss { step: 0 });
    }
    if let Some(max) = max_grad_norm {
        clip_norm(&mut grad, max);
    }
    let mut params = q.params();
    optimizer.step(&mut params, &grad);
    q.set_params(&params);
    q.project();
    Ok((loss, skipped))
}

#[derive(Clone, Debug)]
pub struct DqnOutcome<Q> {
    /// Snapshot with the best greedy evaluation seen during training.
    pub best: Q,
    pub best_eval: Option<f64>,
    /// Network at the end of training.
    pub last: Q,
    pub episodes: Vec<EpisodeStats>,
    pub skipped_samples: u64,
    pub env_steps: u64,
}

/// Generic DQN loop: epsilon-greedy acting, uniform replay, one train step
/// per `train_every` environment steps and a hard-synced target network.
pub fn run_dqn<Q: DifferentiableQ>(
    init: Q,
    kind: EnvKind,
    config: &DqnConfig,
    seed: u64,
) -> Result<DqnOutcome<Q>> {
    config.validate()?;
    if init.input_dim() != kind.obs_dim() {
        return Err(Error::DimensionMismatch {
            expected: kind.obs_dim(),
            got: init.input_dim(),
        });
    }
    let mut explore_rng = seed::rng(seed::derive(seed, seed::stream::DISTILL_EXPLORE));
    let mut replay_rng = seed::rng(seed::derive(seed, seed::stream::DISTILL_REPLAY));
    let env_seed = seed::derive(seed, seed::stream::DISTILL_ENV);
    let eval_seed = seed::derive(seed, seed::stream::EVAL);

    let mut q = init;
    let mut target = q.clone();
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, q.num_params());
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut best = q.clone();
    let mut best_eval: Option<f64> = None;
    let mut episodes = Vec::with_capacity(config.max_episodes);
    let mut steps: u64 = 0;
    let mut skipped_total: u64 = 0;
    let mut env = kind.make();

    for episode in 0..config.max_episodes {
        let started = Instant::now();
        let mut state = env.reset(seed::derive(env_seed, episode as u64)).observation;
        let mut total_reward = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        loop {
            let epsilon = config.epsilon_at(steps);
            let action = epsilon_greedy(&q.q_values(&state)?, epsilon, &mut explore_rng);
            let result = env.step(action)?;
            total_reward += result.reward;
            let done = result.done;
            buffer.push(Transition {
                state: std::mem::take(&mut state),
                action,
                reward: result.reward,
                next_state: result.next_observation.clone(),
                done: result.terminal(),
            });
            state = result.next_observation;
            steps += 1;

            if buffer.len() >= config.learning_starts.max(1) && steps % config.train_every == 0 {
                let batch = buffer.sample(config.batch_size, &mut replay_rng);
                let (loss, skipped) = dqn_train_step(
                    &mut q,
                    &target,
                    &batch,
                    config.gamma,
                    &mut optimizer,
                    config.max_grad_norm,
                )
                .map_err(|e| match e {
                    Error::NonFiniteLoss { .. } => Error::NonFiniteLoss { step: steps },
                    e => e,
                })?;
                loss_sum += loss;
                loss_count += 1;
                skipped_total += skipped as u64;
            }
            if steps % config.target_sync_interval == 0 {
                target = q.clone();
            }
            if done {
                break;
            }
        }

        let last_episode = episode + 1 == config.max_episodes;
        let mut eval_median = None;
        if (episode + 1) % config.eval_interval == 0 || last_episode {
            let summary = evaluate(&q, kind, config.eval_episodes, eval_seed)?;
            eval_median = Some(summary.median);
            if best_eval.map_or(true, |b| summary.median > b) {
                best_eval = Some(summary.median);
                best = q.clone();
            }
        }
        episodes.push(EpisodeStats {
            episode,
            reward: total_reward,
            loss_mean: if loss_count > 0 {
                loss_sum / loss_count as f64
            } else {
                0.0
            },
            eval_median,
            wall_time: started.elapsed().as_secs_f64(),
        });
        if let (Some(stop), Some(m)) = (config.stop_reward, eval_median) {
            if m >= stop {
                break;
            }
        }
    }

    if best_eval.is_none() {
        best = q.clone();
    }
    Ok(DqnOutcome {
        best,
        best_eval,
        last: q,
        episodes,
        skipped_samples: skipped_total,
        env_steps: steps,
    })
}

/// Trains an MLP teacher and returns the best-evaluating snapshot.
pub fn train_teacher(
    kind: EnvKind,
    config: &DqnConfig,
    seed: u64,
) -> Result<(MlpQNetwork, Vec<EpisodeStats>)> {
    let mut rng = seed::rng(seed::derive(seed, seed::stream::TEACHER));
    let net = MlpQNetwork::random(kind.obs_dim(), config.hidden_dim, kind.num_actions(), &mut rng)
        .with_scaling(InputScaling::for_env(kind));
    let outcome = run_dqn(net, kind, config, seed)?;
    Ok((outcome.best, outcome.episodes))
}
