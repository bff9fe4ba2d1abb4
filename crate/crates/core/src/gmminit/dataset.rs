use std::path::Path;

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::qnet::QFunction;
use crate::seed;
use crate::textfmt::fmt_f64;

/// A visited state paired with the teacher's Q-vector for it.
#[derive(Clone, Debug, PartialEq)]
pub struct DistillSample {
    pub state: Vec<f64>,
    pub teacher_q: Vec<f64>,
}

/// Rolls the teacher out greedily for `num_steps` steps, resetting on episode end.
pub fn collect_dataset<Q: QFunction + ?Sized>(
    teacher: &Q,
    kind: EnvKind,
    num_steps: usize,
    seed: u64,
) -> Result<Vec<DistillSample>> {
    if num_steps == 0 {
        return Err(Error::Config("dataset size must be positive".into()));
    }
    let mut env = kind.make();
    let mut episode = 0u64;
    let mut state = env.reset(seed::derive(seed, episode)).observation;
    let mut out = Vec::with_capacity(num_steps);
    while out.len() < num_steps {
        let q = teacher.q_values(&state)?;
        let action = crate::qnet::argmax(&q);
        out.push(DistillSample {
            state: state.clone(),
            teacher_q: q,
        });
        let r = env.step(action)?;
        state = if r.done {
            episode += 1;
            env.reset(seed::derive(seed, episode)).observation
        } else {
            r.next_observation
        };
    }
    Ok(out)
}

/// Writes state columns named by `state_names`, then `q0..`, one row per sample.
pub fn write_dataset(path: &Path, samples: &[DistillSample], state_names: &[String]) -> Result<()> {
    let k = samples.first().map_or(0, |s| s.teacher_q.len());
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = state_names
        .iter()
        .cloned()
        .chain((0..k).map(|c| format!("q{c}")))
        .collect();
    w.write_record(&header)?;
    for s in samples {
        if s.state.len() != state_names.len() || s.teacher_q.len() != k {
            return Err(Error::DimensionMismatch {
                expected: state_names.len() + k,
                got: s.state.len() + s.teacher_q.len(),
            });
        }
        w.write_record(s.state.iter().chain(&s.teacher_q).map(|v| fmt_f64(*v)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`]; columns named `q<digits>` are Q-values.
pub fn read_dataset(path: &Path) -> Result<Vec<DistillSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let is_q = |h: &str| h.len() > 1 && h.starts_with('q') && h[1..].bytes().all(|b| b.is_ascii_digit());
    let m = header.iter().take_while(|h| !is_q(h)).count();
    if header.iter().skip(m).any(|h| !is_q(h)) || m == header.len() {
        return Err(Error::parse(1, "expected state columns followed by q columns"));
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let values = rec
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| Error::parse(row + 2, format!("bad number `{v}`"))))
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(row + 2, "non-finite value"));
        }
        out.push(DistillSample {
            state: values[..m].to_vec(),
            teacher_q: values[m..].to_vec(),
        });
    }
    Ok(out)
}
