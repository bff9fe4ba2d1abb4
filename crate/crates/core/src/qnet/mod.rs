//! Q-function approximators and the DQN training loop.
//!
//! [`DifferentiableQ`] is the seam between the training loop and a concrete
//! model: the teacher MLP implements it, and so does the neuro-fuzzy
//! controller, which is how the naive-substitution baseline reuses this loop.

mod dqn;
mod mlp;
mod optim;
mod replay;

pub use dqn::{
    bellman_loss_and_gradient, bellman_targets, dqn_train_step, epsilon_greedy, run_dqn,
    train_teacher, BatchLoss, DqnConfig, DqnOutcome, Transition,
};
pub use mlp::{InputScaling, MlpQNetwork};
pub use optim::{Optimizer, OptimizerKind};
pub use replay::ReplayBuffer;

use crate::error::Result;

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub trait QFunction {
    fn input_dim(&self) -> usize;

    fn num_actions(&self) -> usize;

    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>>;

    fn greedy_action(&self, state: &[f64]) -> Result<usize> {
        Ok(argmax(&self.q_values(state)?))
    }
}

/// A Q-function whose parameters live in a flat vector and whose
/// vector-Jacobian product is available.
pub trait DifferentiableQ: QFunction + Clone {
    fn num_params(&self) -> usize;

    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, params: &[f64]);

    /// Evaluates Q at `state`, asks `upstream` for dL/dq given the Q-values,
    /// and adds dL/dθ into `grad`. Returns the Q-values.
    fn accumulate_gradient(
        &self,
        state: &[f64],
        grad: &mut [f64],
        upstream: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<Vec<f64>>;

    /// Re-imposes parameter constraints after an optimizer update.
    fn project(&mut self) {}
}

impl<T: QFunction + ?Sized> QFunction for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }

    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        (**self).q_values(state)
    }
}
