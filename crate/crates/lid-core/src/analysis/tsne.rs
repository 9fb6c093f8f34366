//! t-SNE projection to 2-D: per-point Gaussian bandwidths found by binary
//! search to a target perplexity, symmetrized affinities, Student-t
//! low-dimensional kernel, momentum gradient descent with early exaggeration.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::rng_for;

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const MOMENTUM_SWITCH_ITER: usize = 250;
const EARLY_MOMENTUM: f64 = 0.5;
const LATE_MOMENTUM: f64 = 0.8;
const PERPLEXITY_TOL: f64 = 1e-5;
const MAX_BISECTIONS: usize = 50;
const P_MIN: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 10.0,
            iters: 500,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

/// Result of a projection run.
#[derive(Clone, Debug)]
pub struct TsneOutput {
    /// One (x, y) row per input point, in input order.
    pub points: Vec<[f64; 2]>,
    pub initial_kl: f64,
    pub final_kl: f64,
}

fn pairwise_sq_dists(data: &[Vec<f64>]) -> Vec<f64> {
    let n = data.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = data[i]
                .iter()
                .zip(&data[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// Conditional probabilities row i with the precision beta found by binary
/// search so that the row entropy matches log(perplexity).
fn conditional_row(sq: &[f64], i: usize, n: usize, target_entropy: f64, row: &mut [f64]) {
    let mut beta = 1.0f64;
    let mut beta_min = f64::NEG_INFINITY;
    let mut beta_max = f64::INFINITY;
    for _ in 0..MAX_BISECTIONS {
        let mut sum = 0.0;
        for j in 0..n {
            row[j] = if j == i {
                0.0
            } else {
                (-beta * sq[i * n + j]).exp()
            };
            sum += row[j];
        }
        let mut entropy = 0.0;
        if sum > 0.0 {
            for v in row.iter_mut() {
                *v /= sum;
                if *v > 1e-15 {
                    entropy -= *v * v.ln();
                }
            }
        }
        let diff = entropy - target_entropy;
        if diff.abs() < PERPLEXITY_TOL {
            break;
        }
        if diff > 0.0 {
            beta_min = beta;
            beta = if beta_max.is_infinite() {
                beta * 2.0
            } else {
                (beta + beta_max) / 2.0
            };
        } else {
            beta_max = beta;
            beta = if beta_min.is_infinite() {
                beta / 2.0
            } else {
                (beta + beta_min) / 2.0
            };
        }
    }
}

fn joint_probabilities(data: &[Vec<f64>], perplexity: f64) -> Result<Vec<f64>> {
    let n = data.len();
    let sq = pairwise_sq_dists(data);
    if sq.iter().all(|&d| d == 0.0) {
        return Err(Error::invalid(
            "degenerate sample: all points identical, t-SNE undefined",
        ));
    }
    let target_entropy = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        conditional_row(&sq, i, n, target_entropy, &mut row);
        cond[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let mut joint = vec![0.0; n * n];
    let norm = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / norm).max(P_MIN);
        }
    }
    for i in 0..n {
        joint[i * n + i] = P_MIN;
    }
    Ok(joint)
}

/// Student-t affinities of the embedding; returns (q, unnormalized weights).
fn low_dim_affinities(y: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut w = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            w[i * n + j] = v;
            w[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    let q: Vec<f64> = w.iter().map(|&v| (v / sum).max(P_MIN)).collect();
    (q, w)
}

fn kl_divergence(p: &[f64], q: &[f64], n: usize) -> f64 {
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[i * n + j];
                kl += pij * (pij / q[i * n + j]).ln();
            }
        }
    }
    kl
}

/// Runs t-SNE on the given points. Requires `points.len() > 3 * perplexity`
/// and `iters >= 250`. Duplicate points are allowed; a fully degenerate
/// sample is rejected.
pub fn tsne(points: &[Vec<f64>], cfg: &TsneConfig) -> Result<TsneOutput> {
    let n = points.len();
    if (n as f64) <= 3.0 * cfg.perplexity {
        return Err(Error::invalid(format!(
            "sample size {n} must exceed 3 * perplexity ({})",
            3.0 * cfg.perplexity
        )));
    }
    if cfg.iters < 250 {
        return Err(Error::invalid("t-SNE needs at least 250 iterations"));
    }
    if points.iter().any(|p| p.len() != points[0].len()) {
        return Err(Error::shape("t-SNE input dimensions differ"));
    }

    let p = joint_probabilities(points, cfg.perplexity)?;

    let mut rng = rng_for(cfg.seed, "tsne-init");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            [a * 1e-4, b * 1e-4]
        })
        .collect();

    let (q0, _) = low_dim_affinities(&y);
    let initial_kl = kl_divergence(&p, &q0, n);

    let mut velocity = vec![[0.0f64; 2]; n];
    let mut grad = vec![[0.0f64; 2]; n];
    for iter in 0..cfg.iters {
        let exaggeration = if iter < EXAGGERATION_ITERS {
            EXAGGERATION
        } else {
            1.0
        };
        let momentum = if iter < MOMENTUM_SWITCH_ITER {
            EARLY_MOMENTUM
        } else {
            LATE_MOMENTUM
        };
        let (q, w) = low_dim_affinities(&y);
        for g in grad.iter_mut() {
            *g = [0.0, 0.0];
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let factor = 4.0 * (exaggeration * p[i * n + j] - q[i * n + j]) * w[i * n + j];
                grad[i][0] += factor * (y[i][0] - y[j][0]);
                grad[i][1] += factor * (y[i][1] - y[j][1]);
            }
        }
        for i in 0..n {
            for d in 0..2 {
                velocity[i][d] = momentum * velocity[i][d] - cfg.learning_rate * grad[i][d];
                y[i][d] += velocity[i][d];
            }
        }
    }

    let (qf, _) = low_dim_affinities(&y);
    let final_kl = kl_divergence(&p, &qf, n);
    Ok(TsneOutput {
        points: y,
        initial_kl,
        final_kl,
    })
}
