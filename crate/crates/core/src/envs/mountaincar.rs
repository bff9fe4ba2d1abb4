use rand::Rng;

use super::{check_step, EnvKind, EnvState, Environment, StepResult};
use crate::error::Result;
use crate::seed;

pub(super) const MAX_STEPS: usize = 200;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;

/// Under-powered car in a valley, observation `[position, velocity]`.
/// Actions: 0 push left, 1 no push, 2 push right. Reward is -1 per step.
#[derive(Clone, Debug)]
pub struct MountainCar {
    state: EnvState,
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl MountainCar {
    pub fn new() -> Self {
        MountainCar {
            state: EnvState {
                observation: vec![-0.5, 0.0],
                step_count: 0,
                done: false,
            },
        }
    }

    pub fn dynamics(obs: &[f64], action: usize) -> [f64; 2] {
        let (position, velocity) = (obs[0], obs[1]);
        let mut velocity =
            velocity + (action as f64 - 1.0) * FORCE - GRAVITY * (3.0 * position).cos();
        velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        let position = (position + velocity).clamp(MIN_POSITION, MAX_POSITION);
        if position == MIN_POSITION && velocity < 0.0 {
            velocity = 0.0;
        }
        [position, velocity]
    }
}

impl Environment for MountainCar {
    fn kind(&self) -> EnvKind {
        EnvKind::MountainCar
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = seed::rng(seed);
        let position = rng.gen_range(-0.6..=-0.4);
        self.state = EnvState {
            observation: vec![position, 0.0],
            step_count: 0,
            done: false,
        };
        self.state.clone()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_step(&self.state, action, 3)?;
        let next = Self::dynamics(&self.state.observation, action);
        let step_count = self.state.step_count + 1;
        let reached = next[0] >= GOAL_POSITION;
        let capped = step_count >= MAX_STEPS;
        let done = reached || capped;
        self.state = EnvState {
            observation: next.to_vec(),
            step_count,
            done,
        };
        Ok(StepResult {
            next_observation: next.to_vec(),
            reward: -1.0,
            done,
            truncated: capped && !reached,
        })
    }

    fn state(&self) -> &EnvState {
        &self.state
    }

    fn set_state(&mut self, state: EnvState) {
        self.state = state;
    }
}
