use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    /// Diagonal of the covariance matrix.
    pub variance: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    pub components: Vec<GaussianComponent>,
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    /// Stop once the mean per-row log-likelihood improves by less than this.
    pub tol: f64,
    /// Lower bound on variances, in standardized units when `standardize` is set.
    pub variance_floor: f64,
    /// Fit on z-scored columns and map the parameters back afterwards.
    pub standardize: bool,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 2,
            max_iter: 200,
            tol: 1e-8,
            variance_floor: 1e-6,
            standardize: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean per-row log-likelihood after each EM iteration (in the space the
    /// fit was run in).
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    /// Times an empty component was re-seeded.
    pub reseeds: usize,
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn log_density(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((xi, mi), vi) in x.iter().zip(mean).zip(var) {
        let d = xi - mi;
        acc += LN_2PI + vi.ln() + d * d / vi;
    }
    -0.5 * acc
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, the rest drawn proportionally to
/// squared distance from the nearest chosen center.
fn kmeans_pp<R: Rng>(data: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![data[rng.gen_range(0..data.len())].clone()];
    let mut nearest: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = data.len() - 1;
            for (i, d) in nearest.iter().enumerate() {
                target -= d;
                if target <= 0.0 && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..data.len())
        };
        centers.push(data[idx].clone());
        for (n, x) in nearest.iter_mut().zip(data) {
            *n = n.min(sq_dist(x, &centers[centers.len() - 1]));
        }
    }
    centers
}

/// Expectation-maximization for a diagonal-covariance mixture.
pub fn fit_gmm(data: &[Vec<f64>], config: &GmmConfig, seed: u64) -> Result<GmmFit> {
    let k = config.components;
    if k == 0 {
        return Err(Error::Config("need at least one mixture component".into()));
    }
    if data.len() < k {
        return Err(Error::Config(format!(
            "{} rows cannot support {k} components",
            data.len()
        )));
    }
    let d = data[0].len();
    if let Some(bad) = data.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let n = data.len();
    let nf = n as f64;

    let mut col_mean = vec![0.0; d];
    let mut col_sd = vec![1.0; d];
    if config.standardize {
        for row in data {
            for (m, x) in col_mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        col_mean.iter_mut().for_each(|m| *m /= nf);
        for (c, sd) in col_sd.iter_mut().enumerate() {
            let var = data.iter().map(|r| (r[c] - col_mean[c]).powi(2)).sum::<f64>() / nf;
            *sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
    }
    let x: Vec<Vec<f64>> = data
        .iter()
        .map(|r| r.iter().zip(&col_mean).zip(&col_sd).map(|((v, m), s)| (v - m) / s).collect())
        .collect();

    let global_var: Vec<f64> = (0..d)
        .map(|c| {
            let mean = x.iter().map(|r| r[c]).sum::<f64>() / nf;
            let var = x.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / nf;
            var.max(config.variance_floor)
        })
        .collect();

    let mut rng = seed::rng(seed);
    let mut means = kmeans_pp(&x, k, &mut rng);
    let mut vars = vec![global_var.clone(); k];
    let mut weights = vec![1.0 / k as f64; k];

    let mut resp = vec![vec![0.0; k]; n];
    let mut history = Vec::new();
    let mut reseeds = 0;
    let mut iterations = 0;
    let mut scratch = vec![0.0; k];

    for _ in 0..config.max_iter {
        // E-step
        let mut ll = 0.0;
        for (row, r) in x.iter().zip(resp.iter_mut()) {
            for c in 0..k {
                scratch[c] = weights[c].ln() + log_density(row, &means[c], &vars[c]);
            }
            let lse = log_sum_exp(&scratch);
            ll += lse;
            for c in 0..k {
                r[c] = (scratch[c] - lse).exp();
            }
        }
        let ll = ll / nf;

        iterations += 1;
        let converged = history.last().is_some_and(|prev: &f64| ll - prev < config.tol);
        history.push(ll);
        if converged {
            break;
        }

        // M-step
        let mut reseeded = false;
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk < 1e-10 * nf {
                // Empty component: restart it on the row farthest from every mean.
                let far = x
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let near = means.iter().map(|m| sq_dist(row, m)).fold(f64::INFINITY, f64::min);
                        (i, near)
                    })
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map_or(0, |(i, _)| i);
                means[c] = x[far].clone();
                vars[c] = global_var.clone();
                weights[c] = 1.0 / nf;
                reseeded = true;
                continue;
            }
            weights[c] = nk / nf;
            let mut mean = vec![0.0; d];
            for (row, r) in x.iter().zip(&resp) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += r[c] * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut var = vec![0.0; d];
            for (row, r) in x.iter().zip(&resp) {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += r[c] * (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s = (*s / nk).max(config.variance_floor));
            means[c] = mean;
            vars[c] = var;
        }
        if reseeded {
            reseeds += 1;
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
    }

    let components = (0..k)
        .map(|c| GaussianComponent {
            mean: means[c].iter().zip(&col_mean).zip(&col_sd).map(|((m, mu), s)| m * s + mu).collect(),
            variance: vars[c].iter().zip(&col_sd).map(|(v, s)| v * s * s).collect(),
            weight: weights[c],
        })
        .collect();
    Ok(GmmFit {
        model: GmmModel { components },
        log_likelihood: history,
        iterations,
        reseeds,
    })
}
