//! Rule-base initialization from teacher data.
//!
//! The teacher is rolled out greedily to build a (state, Q-vector) dataset,
//! a diagonal Gaussian mixture is fitted on the concatenated rows, and each
//! component becomes one rule: the state part of its mean and the square
//! root of its variance give the antecedent sets, the Q part of its mean
//! gives the consequent.

mod dataset;
mod gmm;

pub use dataset::{collect_dataset, read_dataset, write_dataset, DistillSample};
pub use gmm::{fit_gmm, GaussianComponent, GmmConfig, GmmFit, GmmModel};

use crate::error::{Error, Result};
use crate::nfc::NeuroFuzzyController;

/// One rule per mixture component; raw weights 1, every term active.
pub fn rules_from_gmm(gmm: &GmmModel, inputs: usize, outputs: usize) -> Result<NeuroFuzzyController> {
    if gmm.dim() != inputs + outputs {
        return Err(Error::DimensionMismatch {
            expected: inputs + outputs,
            got: gmm.dim(),
        });
    }
    let n = gmm.components.len();
    let mut centers = vec![0.0; inputs * n];
    let mut widths = vec![0.0; inputs * n];
    let mut consequents = Vec::with_capacity(n * outputs);
    for (j, c) in gmm.components.iter().enumerate() {
        for i in 0..inputs {
            centers[i * n + j] = c.mean[i];
            widths[i * n + j] = c.variance[i].sqrt();
        }
        consequents.extend_from_slice(&c.mean[inputs..]);
    }
    Ok(NeuroFuzzyController::new(inputs, n, outputs, &centers, &widths, &consequents))
}

/// Fits a mixture with `rules` components on the dataset and converts it to a controller.
pub fn init_controller(
    samples: &[DistillSample],
    rules: usize,
    config: &GmmConfig,
    seed: u64,
) -> Result<(NeuroFuzzyController, GmmFit)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Config("empty dataset".into()))?;
    let (m, k) = (first.state.len(), first.teacher_q.len());
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.state.iter().chain(&s.teacher_q).copied().collect())
        .collect();
    let fit = fit_gmm(&rows, &GmmConfig { components: rules, ..config.clone() }, seed)?;
    let ctrl = rules_from_gmm(&fit.model, m, k)?;
    Ok((ctrl, fit))
}
