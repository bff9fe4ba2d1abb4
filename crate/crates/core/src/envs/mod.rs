//! Classic-control environments with fixed, deterministic physics.
//!
//! Observations are returned in raw physical units; nothing is rescaled.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

mod cartpole;
mod mountaincar;

pub use cartpole::CartPole;
pub use mountaincar::MountainCar;

/// Current state of an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub step_count: usize,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_observation: Vec<f64>,
    pub reward: f64,
    /// Episode is over, either by termination or by the step cap.
    pub done: bool,
    /// The episode ended only because the step cap was hit.
    pub truncated: bool,
}

impl StepResult {
    /// True when the episode reached a genuine terminal state, i.e. the
    /// value of the next state must not be bootstrapped.
    pub fn terminal(&self) -> bool {
        self.done && !self.truncated
    }
}

pub trait Environment: Send {
    fn kind(&self) -> EnvKind;

    /// Starts a new episode. The initial observation depends only on `seed`.
    fn reset(&mut self, seed: u64) -> EnvState;

    fn step(&mut self, action: usize) -> Result<StepResult>;

    fn state(&self) -> &EnvState;

    /// Overwrites the episode state. Intended for tests and replays.
    fn set_state(&mut self, state: EnvState);

    fn obs_dim(&self) -> usize {
        self.kind().obs_dim()
    }

    fn num_actions(&self) -> usize {
        self.kind().num_actions()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvKind {
    CartPole,
    MountainCar,
}

impl EnvKind {
    pub fn obs_dim(self) -> usize {
        match self {
            EnvKind::CartPole => 4,
            EnvKind::MountainCar => 2,
        }
    }

    pub fn num_actions(self) -> usize {
        match self {
            EnvKind::CartPole => 2,
            EnvKind::MountainCar => 3,
        }
    }

    pub fn max_steps(self) -> usize {
        match self {
            EnvKind::CartPole => cartpole::MAX_STEPS,
            EnvKind::MountainCar => mountaincar::MAX_STEPS,
        }
    }

    /// Inclusive bounds on the total reward of one episode.
    pub fn episode_reward_bounds(self) -> (f64, f64) {
        match self {
            EnvKind::CartPole => (1.0, cartpole::MAX_STEPS as f64),
            EnvKind::MountainCar => (-(mountaincar::MAX_STEPS as f64), -1.0),
        }
    }

    /// Short column names for the observation components.
    pub fn feature_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            EnvKind::CartPole => &["p_x", "v_x", "angle", "v_tip"],
            EnvKind::MountainCar => &["p_x", "v_x"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvKind::CartPole => Box::new(CartPole::new()),
            EnvKind::MountainCar => Box::new(MountainCar::new()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::MountainCar => "mountaincar",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cartpole" | "cartpole-v1" => Ok(EnvKind::CartPole),
            "mountaincar" | "mountaincar-v0" => Ok(EnvKind::MountainCar),
            other => Err(Error::UnknownEnvironment(other.to_string())),
        }
    }
}

fn check_step(state: &EnvState, action: usize, num_actions: usize) -> Result<()> {
    if state.done {
        return Err(Error::StepOnDoneEpisode);
    }
    if action >= num_actions {
        return Err(Error::InvalidAction {
            action,
            num_actions,
        });
    }
    Ok(())
}
