//! Distillation of deep Q-network policies into compact neuro-fuzzy controllers.
//!
//! The pipeline trains a DQN teacher on a classic-control task ([`envs`],
//! [`qnet`]), seeds a small rule base from a Gaussian mixture fitted on
//! teacher data ([`gmminit`]), distills the teacher into the controller
//! ([`nfc`], [`distill`]) and finally simplifies the rule base by merging
//! similar fuzzy sets and pruning unimportant antecedent terms ([`postproc`]).
//! [`harness`] wires the stages together and produces reports.

pub mod distill;
pub mod envs;
pub mod error;
pub mod gmminit;
pub mod harness;
pub mod nfc;
pub mod postproc;
pub mod qnet;
pub mod seed;
mod textfmt;

pub use error::{Error, Result};
