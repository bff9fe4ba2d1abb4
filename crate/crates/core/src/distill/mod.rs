//! Policy distillation from a Q-network teacher into a neuro-fuzzy student.
//!
//! The student follows its own epsilon-greedy policy; every visited state is
//! labelled with the teacher's Q-vector and stored in a replay memory, and
//! after each environment step the student takes one gradient step on a
//! minibatch. The loss is the temperature KL divergence between teacher and
//! student action distributions plus two interpretability regularizers.

mod loss;
mod naive;
mod train;

pub use loss::{
    kl_loss, kl_loss_grad, log_softmax, merge_regularizer, merge_regularizer_grad, temperature_softmax,
    tnorm_regularizer, tnorm_regularizer_grad, total_loss, LossBreakdown,
};
pub use naive::{naive_dqn_config, naive_substitution, random_controller};
pub use train::{distill, distill_with_observer, DistillConfig, DistillOutcome};
