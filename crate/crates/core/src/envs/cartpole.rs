use rand::Rng;

use super::{check_step, EnvKind, EnvState, Environment, StepResult};
use crate::error::Result;
use crate::seed;

pub(super) const MAX_STEPS: usize = 500;

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
/// Half the pole length.
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const FORCE: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;

/// Pole balancing on a cart, observation `[x, x_dot, theta, theta_dot]`.
///
/// Reward is 1 for every step taken, including the one that ends the episode.
#[derive(Clone, Debug)]
pub struct CartPole {
    state: EnvState,
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl CartPole {
    pub fn new() -> Self {
        CartPole {
            state: EnvState {
                observation: vec![0.0; 4],
                step_count: 0,
                done: false,
            },
        }
    }

    /// One semi-implicit Euler step of the cart-pole dynamics.
    pub fn dynamics(obs: &[f64], action: usize) -> [f64; 4] {
        let (x, x_dot, theta, theta_dot) = (obs[0], obs[1], obs[2], obs[3]);
        let force = if action == 1 { FORCE } else { -FORCE };
        let total_mass = CART_MASS + POLE_MASS;
        let pole_mass_length = POLE_MASS * POLE_HALF_LENGTH;
        let (sin, cos) = theta.sin_cos();

        let temp = (force + pole_mass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

        let x_dot = x_dot + TAU * x_acc;
        let x = x + TAU * x_dot;
        let theta_dot = theta_dot + TAU * theta_acc;
        let theta = theta + TAU * theta_dot;
        [x, x_dot, theta, theta_dot]
    }
}

impl Environment for CartPole {
    fn kind(&self) -> EnvKind {
        EnvKind::CartPole
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = seed::rng(seed);
        let observation = (0..4).map(|_| rng.gen_range(-0.05..=0.05)).collect();
        self.state = EnvState {
            observation,
            step_count: 0,
            done: false,
        };
        self.state.clone()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_step(&self.state, action, 2)?;
        let next = Self::dynamics(&self.state.observation, action);
        let step_count = self.state.step_count + 1;
        let out_of_bounds = next[0].abs() > X_THRESHOLD || next[2].abs() > THETA_THRESHOLD;
        let capped = step_count >= MAX_STEPS;
        let done = out_of_bounds || capped;

        self.state = EnvState {
            observation: next.to_vec(),
            step_count,
            done,
        };
        Ok(StepResult {
            next_observation: next.to_vec(),
            reward: 1.0,
            done,
            truncated: capped && !out_of_bounds,
        })
    }

    fn state(&self) -> &EnvState {
        &self.state
    }

    fn set_state(&mut self, state: EnvState) {
        self.state = state;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn reset_range_and_determinism() {
        let mut env = CartPole::new();
        for seed in 0..50 {
            let s = env.reset(seed);
            assert!(s.observation.iter().all(|v| v.abs() <= 0.05));
            assert_eq!(s.observation.len(), 4);
            assert_eq!(env.reset(seed), s);
        }
    }

    #[test]
    fn single_step_from_rest_matches_hand_evaluation() {
        // Oracle: constants substituted by hand at theta = 0 (sin = 0, cos = 1).
        // temp = 10 / 1.1, theta_acc = -temp / (0.5 * (4/3 - 0.1/1.1)),
        // x_acc = temp - 0.05 * theta_acc / 1.1, then velocity-first Euler.
        let temp: f64 = 10.0 / 1.1;
        let theta_acc = -temp / (0.5 * (4.0 / 3.0 - 0.1 / 1.1));
        let x_acc = temp - 0.05 * theta_acc / 1.1;
        let expected = [
            0.02 * (0.02 * x_acc),
            0.02 * x_acc,
            0.02 * (0.02 * theta_acc),
            0.02 * theta_acc,
        ];
        let mut env = CartPole::new();
        env.set_state(EnvState {
            observation: vec![0.0; 4],
            step_count: 0,
            done: false,
        });
        let r = env.step(1).unwrap();
        for (a, b) in r.next_observation.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        // frozen values from the hand evaluation above
        assert!((r.next_observation[1] - 0.195_121_951_219_512_2).abs() < 1e-12);
        assert!((r.next_observation[3] + 0.292_682_926_829_268_3).abs() < 1e-12);
        assert_eq!(r.reward, 1.0);
        assert!(!r.done);
    }

    #[test]
    fn step_cap_ends_episode_with_reward() {
        let mut env = CartPole::new();
        env.set_state(EnvState {
            observation: vec![0.0; 4],
            step_count: MAX_STEPS - 1,
            done: false,
        });
        let r = env.step(0).unwrap();
        assert!(r.done && r.truncated);
        assert_eq!(r.reward, 1.0);
        assert!(matches!(env.step(0), Err(Error::StepOnDoneEpisode)));
    }

    #[test]
    fn terminates_on_angle_bound() {
        let mut env = CartPole::new();
        env.set_state(EnvState {
            observation: vec![0.0, 0.0, THETA_THRESHOLD - 1e-6, 2.0],
            step_count: 3,
            done: false,
        });
        let r = env.step(1).unwrap();
        assert!(r.done && !r.truncated && r.terminal());
    }

    #[test]
    fn rejects_bad_action() {
        let mut env = CartPole::new();
        env.reset(0);
        assert!(matches!(env.step(2), Err(Error::InvalidAction { .. })));
    }
}
