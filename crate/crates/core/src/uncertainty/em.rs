//! Expectation-maximization fit of a full-covariance mixture.

use nalgebra::DMatrix;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, Gmm, GmmComponent, UncertaintyError};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub n_components: usize,
    pub max_iters: usize,
    /// Stop when the mean log-likelihood improves by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            n_components: 2,
            max_iters: 500,
            tol: 1e-10,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub gmm: Gmm,
    /// Total log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

/// Fits `cfg.n_components` components to row samples.
///
/// Initialization is k-means++ seeding followed by Lloyd iterations; empty
/// clusters are re-seeded from a random sample. Diagonal covariance entries
/// are floored at `1e-6` times the sample variance of that coordinate.
pub fn fit_em(samples: &[Vec<f64>], cfg: &EmConfig) -> Result<EmFit, UncertaintyError> {
    let m = cfg.n_components;
    if m == 0 {
        return Err(UncertaintyError::Empty);
    }
    let dim = samples.first().map_or(0, |s| s.len());
    let needed = 10 * m * dim.max(1);
    if samples.len() < needed {
        return Err(UncertaintyError::InsufficientSamples {
            needed,
            got: samples.len(),
        });
    }
    if samples.iter().any(|s| s.len() != dim) {
        return Err(UncertaintyError::DimensionMismatch {
            expected: dim,
            got: samples.iter().map(|s| s.len()).find(|&l| l != dim).unwrap_or(0),
        });
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(UncertaintyError::NonFinite("samples"));
    }

    let n = samples.len();
    let mut rng = rng::seeded(cfg.seed);
    let floor = variance_floor(samples);

    // Hard assignments from k-means give the starting responsibilities.
    let labels = kmeans(samples, m, &mut rng);
    let mut resp = vec![0.0; n * m];
    for (i, &k) in labels.iter().enumerate() {
        resp[i * m + k] = 1.0;
    }
    let mut params = m_step(samples, &resp, m, &floor, &mut rng);

    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let ll = e_step(samples, &params, &mut resp);
        let improved = trace.last().map(|&prev: &f64| (ll - prev) / n as f64);
        trace.push(ll);
        if improved.is_some_and(|d| d.abs() < cfg.tol) {
            converged = true;
            break;
        }
        params = m_step(samples, &resp, m, &floor, &mut rng);
    }

    let gmm = Gmm::new(
        params
            .into_iter()
            .map(|p| GmmComponent {
                weight: p.weight,
                mean: p.mean,
                covariance: p.cov,
            })
            .collect(),
    )?;
    Ok(EmFit {
        gmm,
        log_likelihood: trace,
        converged,
    })
}

struct Params {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

fn variance_floor(samples: &[Vec<f64>]) -> Vec<f64> {
    let n = samples.len() as f64;
    let dim = samples[0].len();
    (0..dim)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / n;
            1e-6 * var.max(f64::MIN_POSITIVE)
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn kmeans(samples: &[Vec<f64>], m: usize, rng: &mut rng::StreamRng) -> Vec<usize> {
    let n = samples.len();
    let mut centers = vec![samples[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = samples.iter().map(|s| sq_dist(s, &centers[0])).collect();
    while centers.len() < m {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            nearest
                .iter()
                .position(|&d| {
                    u -= d;
                    u <= 0.0
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        centers.push(samples[pick].clone());
        let c = centers.last().unwrap();
        for (d, s) in nearest.iter_mut().zip(samples) {
            *d = d.min(sq_dist(s, c));
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..20 {
        let next: Vec<usize> = samples
            .par_iter()
            .map(|s| {
                (0..m)
                    .min_by(|&a, &b| sq_dist(s, &centers[a]).total_cmp(&sq_dist(s, &centers[b])))
                    .unwrap()
            })
            .collect();
        let changed = next != labels;
        labels = next;
        let dim = samples[0].len();
        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for (s, &k) in samples.iter().zip(&labels) {
            counts[k] += 1;
            for (acc, v) in sums[k].iter_mut().zip(s) {
                *acc += v;
            }
        }
        for k in 0..m {
            if counts[k] == 0 {
                let i = rng.random_range(0..n);
                centers[k] = samples[i].clone();
                labels[i] = k;
            } else {
                centers[k] = sums[k].iter().map(|v| v / counts[k] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

fn m_step(samples: &[Vec<f64>], resp: &[f64], m: usize, floor: &[f64], rng: &mut rng::StreamRng) -> Vec<Params> {
    let n = samples.len();
    let dim = samples[0].len();
    let mut params = (0..m)
        .map(|k| {
            let nk: f64 = (0..n).map(|i| resp[i * m + k]).sum();
            if nk <= 1e-12 * n as f64 {
                // Empty component: restart it on a random sample with the
                // floored diagonal covariance.
                let i = rng.random_range(0..n);
                return Params {
                    weight: 1.0 / n as f64,
                    mean: samples[i].clone(),
                    cov: (0..dim)
                        .map(|a| (0..dim).map(|b| if a == b { floor[a] * 1e6 } else { 0.0 }).collect())
                        .collect(),
                };
            }
            let mut mean = vec![0.0; dim];
            for (i, s) in samples.iter().enumerate() {
                let r = resp[i * m + k];
                for (acc, v) in mean.iter_mut().zip(s) {
                    *acc += r * v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= nk);
            let mut cov = vec![vec![0.0; dim]; dim];
            for (i, s) in samples.iter().enumerate() {
                let r = resp[i * m + k];
                for a in 0..dim {
                    let da = s[a] - mean[a];
                    for b in 0..=a {
                        cov[a][b] += r * da * (s[b] - mean[b]);
                    }
                }
            }
            for a in 0..dim {
                for b in 0..=a {
                    cov[a][b] /= nk;
                    cov[b][a] = cov[a][b];
                }
                cov[a][a] = cov[a][a].max(floor[a]);
            }
            Params {
                weight: nk / n as f64,
                mean,
                cov,
            }
        })
        .collect::<Vec<_>>();
    // A re-seeded component takes a token weight; renormalize.
    let total: f64 = params.iter().map(|p| p.weight).sum();
    for p in &mut params {
        p.weight /= total;
    }
    params
}

/// Writes responsibilities and returns the total log-likelihood.
fn e_step(samples: &[Vec<f64>], params: &[Params], resp: &mut [f64]) -> f64 {
    let m = params.len();
    let dim = samples[0].len();
    let factors: Vec<(Vec<f64>, f64)> = params
        .iter()
        .map(|p| {
            let cov = DMatrix::from_fn(dim, dim, |i, j| p.cov[i][j]);
            let l = cov
                .cholesky()
                .map(|c| c.l())
                .unwrap_or_else(|| DMatrix::from_diagonal_element(dim, dim, f64::NAN));
            let log_det: f64 = l.diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            let norm = p.weight.ln() - 0.5 * (log_det + dim as f64 * (2.0 * std::f64::consts::PI).ln());
            (l.as_slice().to_vec(), norm)
        })
        .collect();

    resp.par_chunks_mut(m)
        .zip(samples.par_iter())
        .map(|(row, s)| {
            let mut z = vec![0.0; dim];
            for (k, (l, norm)) in factors.iter().enumerate() {
                // Forward substitution with column-major L.
                for a in 0..dim {
                    let mut v = s[a] - params[k].mean[a];
                    for b in 0..a {
                        v -= l[a + b * dim] * z[b];
                    }
                    z[a] = v / l[a + a * dim];
                }
                let q: f64 = z.iter().map(|v| v * v).sum();
                row[k] = norm - 0.5 * q;
            }
            let total = log_sum_exp(row);
            for r in row.iter_mut() {
                *r = (*r - total).exp();
            }
            total
        })
        .sum()
}
