//! Neuro-fuzzy controller with Gaussian antecedents, a weighted product
//! T-norm and constant rule consequents.
//!
//! For input `x`, rule `j` fires with
//! `R_j = prod_i A_ij(x_i)^(w_ij / max_i w_ij)` over its active terms, where
//! `A(x) = exp(-((x - mu) / sigma)^2)`. The output is the activation-weighted
//! average `q = sum_j (R_j / sum_l R_l) * y_j` of the consequent vectors.
//!
//! Fuzzy sets are stored per input dimension and referenced by index from
//! each (dimension, rule) term, so two rules may share a set after merging.

mod controller;
mod io;

pub use controller::{FuzzySet, NeuroFuzzyController, NfcForward, DEGENERATE_SUM, SIGMA_MIN};

/// Gaussian membership `exp(-((x - center) / width)^2)`.
pub fn membership(set: &FuzzySet, x: f64) -> f64 {
    set.membership(x)
}
