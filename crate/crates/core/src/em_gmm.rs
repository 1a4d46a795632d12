//! Two-component one-dimensional Gaussian mixture fitted by
//! expectation-maximization.
//!
//! Component 1 is reported as the low-mean component (`mu[0] <= mu[1]`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::rng::{purpose, Stream};

pub const MIN_SAMPLES: usize = 10;

/// Mixture weight below which (relative to the sample count) a component is
/// considered empty and reseeded.
const EMPTY_COMPONENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub pi: [f64; 2],
    pub mu: [f64; 2],
    pub sigma2: [f64; 2],
}

impl GmmParams {
    pub fn ratio(&self) -> f64 {
        if self.mu[1] > 0.0 {
            self.mu[0] / self.mu[1]
        } else {
            f64::NAN
        }
    }

    fn ordered(self) -> (Self, bool) {
        if self.mu[0] <= self.mu[1] {
            (self, false)
        } else {
            (
                Self {
                    pi: [self.pi[1], self.pi[0]],
                    mu: [self.mu[1], self.mu[0]],
                    sigma2: [self.sigma2[1], self.sigma2[0]],
                },
                true,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop when `|delta logL| < tol * |logL|`.
    pub tol: f64,
    /// Variance floor as a fraction of the sample variance.
    pub variance_floor_rel: f64,
    /// Extra randomly initialized runs; the best likelihood wins.
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-8, variance_floor_rel: 1e-6, restarts: 0, rng_seed: 0 }
    }
}

impl EmOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || !(self.tol > 0.0) || !(self.variance_floor_rel > 0.0) {
            return arg_err("EM options need max_iter >= 1, tol > 0 and a positive variance floor");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub params: GmmParams,
    /// `responsibilities[k][i]`, posterior of component `k` for sample `i`.
    pub responsibilities: [Vec<f64>; 2],
    pub log_likelihood: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Constant data: a single effective component.
    pub degenerate: bool,
    pub history: Vec<f64>,
}

#[inline]
fn log_normal(x: f64, mu: f64, sigma2: f64) -> f64 {
    -0.5 * ((2.0 * PI * sigma2).ln() + (x - mu) * (x - mu) / sigma2)
}

#[inline]
fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

fn log_terms(x: f64, p: &GmmParams) -> [f64; 2] {
    [0, 1].map(|k| p.pi[k].ln() + log_normal(x, p.mu[k], p.sigma2[k]))
}

/// `G(x) = sum_k pi_k N(x | mu_k, sigma2_k)`.
pub fn mixture_pdf(x: f64, p: &GmmParams) -> f64 {
    (0..2)
        .map(|k| {
            let s2 = p.sigma2[k];
            p.pi[k] * (-(x - p.mu[k]).powi(2) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt()
        })
        .sum()
}

/// `sum_i log G(x_i)`, evaluated with log-sum-exp.
pub fn log_likelihood(samples: &[f64], p: &GmmParams) -> Result<f64> {
    if samples.is_empty() {
        return arg_err("log-likelihood of an empty sample");
    }
    Ok(samples
        .iter()
        .map(|&x| {
            let [a, b] = log_terms(x, p);
            log_sum_exp2(a, b)
        })
        .sum())
}

/// Posterior responsibilities. Where both components underflow the sample
/// goes wholly to the nearer mean.
pub fn e_step(samples: &[f64], p: &GmmParams) -> [Vec<f64>; 2] {
    let mut g = [vec![0.0; samples.len()], vec![0.0; samples.len()]];
    for (i, &x) in samples.iter().enumerate() {
        let [a, b] = log_terms(x, p);
        let lse = log_sum_exp2(a, b);
        if lse.is_finite() {
            g[0][i] = (a - lse).exp();
            g[1][i] = (b - lse).exp();
        } else {
            let first = (x - p.mu[0]).abs() <= (x - p.mu[1]).abs();
            g[0][i] = if first { 1.0 } else { 0.0 };
            g[1][i] = 1.0 - g[0][i];
        }
    }
    g
}

/// Weighted-moment update. A component whose total responsibility is below
/// `1e-6 * N` is reseeded at the sample farthest (in standardized distance)
/// from the other component's mean.
pub fn m_step(samples: &[f64], gamma: &[Vec<f64>; 2], variance_floor: f64) -> Result<GmmParams> {
    let n = samples.len();
    if n == 0 || gamma[0].len() != n || gamma[1].len() != n {
        return arg_err("responsibilities must match the sample count");
    }
    let mut p = GmmParams { pi: [0.0; 2], mu: [0.0; 2], sigma2: [variance_floor; 2] };
    let mut mass = [0.0; 2];
    for k in 0..2 {
        mass[k] = gamma[k].iter().sum();
        if mass[k] > 0.0 {
            p.mu[k] = gamma[k].iter().zip(samples).map(|(g, x)| g * x).sum::<f64>() / mass[k];
            let v = gamma[k].iter().zip(samples).map(|(g, x)| g * (x - p.mu[k]).powi(2)).sum::<f64>() / mass[k];
            p.sigma2[k] = v.max(variance_floor);
        }
        p.pi[k] = mass[k] / n as f64;
    }
    for k in 0..2 {
        if mass[k] < EMPTY_COMPONENT * n as f64 {
            let other = 1 - k;
            let sd = p.sigma2[other].sqrt();
            let far = samples
                .iter()
                .cloned()
                .max_by(|a, b| ((a - p.mu[other]).abs() / sd).total_cmp(&((b - p.mu[other]).abs() / sd)))
                .unwrap();
            p.mu[k] = far;
            p.sigma2[k] = p.sigma2[other];
            p.pi[k] = 1.0 / n as f64;
            p.pi[other] = 1.0 - p.pi[k];
        }
    }
    let total = p.pi[0] + p.pi[1];
    p.pi = [p.pi[0] / total, p.pi[1] / total];
    Ok(p)
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

struct Run {
    params: GmmParams,
    gamma: [Vec<f64>; 2],
    ll: f64,
    n_iter: usize,
    converged: bool,
    history: Vec<f64>,
}

fn run_em(samples: &[f64], init: GmmParams, floor: f64, opts: &EmOptions) -> Result<Run> {
    let mut params = init;
    let mut history = Vec::with_capacity(opts.max_iter + 1);
    let mut converged = false;
    let mut n_iter = 0;
    let mut gamma = e_step(samples, &params);
    let mut ll = log_likelihood(samples, &params)?;
    history.push(ll);
    while n_iter < opts.max_iter {
        params = m_step(samples, &gamma, floor)?;
        n_iter += 1;
        gamma = e_step(samples, &params);
        let next = log_likelihood(samples, &params)?;
        history.push(next);
        let delta = (next - ll).abs();
        ll = next;
        if delta < opts.tol * ll.abs() {
            converged = true;
            break;
        }
    }
    Ok(Run { params, gamma, ll, n_iter, converged, history })
}

/// Fits the two-component mixture.
///
/// Deterministic initialization: means at the 25th and 75th percentiles,
/// equal weights, both variances at half the sample variance.
pub fn fit(samples: &[f64], opts: &EmOptions) -> Result<EmFit> {
    opts.validate()?;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_SAMPLES, got: samples.len() });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return arg_err("samples must be finite");
    }
    let (mean, var) = mean_var(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let spread = sorted[sorted.len() - 1] - sorted[0];
    let scale = sorted[0].abs().max(sorted[sorted.len() - 1].abs());

    if spread <= 1e-12 * scale || var == 0.0 {
        let n = samples.len();
        let params = GmmParams { pi: [0.0, 1.0], mu: [mean, mean], sigma2: [f64::MIN_POSITIVE; 2] };
        return Ok(EmFit {
            params,
            responsibilities: [vec![0.0; n], vec![1.0; n]],
            log_likelihood: f64::INFINITY,
            n_iter: 0,
            converged: true,
            degenerate: true,
            history: vec![],
        });
    }

    let floor = opts.variance_floor_rel * var;
    let init = GmmParams {
        pi: [0.5, 0.5],
        mu: [percentile(&sorted, 0.25), percentile(&sorted, 0.75)],
        sigma2: [(var / 2.0).max(floor); 2],
    };
    let mut best = run_em(samples, init, floor, opts)?;

    let stream = Stream::new(opts.rng_seed, purpose::EM_RESTART);
    for r in 0..opts.restarts {
        let (u1, u2) = stream.uniform_pair(r as u64);
        let pick = |u: f64| sorted[((u * sorted.len() as f64) as usize).min(sorted.len() - 1)];
        let init = GmmParams { pi: [0.5, 0.5], mu: [pick(u1), pick(u2)], sigma2: [(var / 2.0).max(floor); 2] };
        let run = run_em(samples, init, floor, opts)?;
        if run.ll > best.ll {
            best = run;
        }
    }

    let (params, swapped) = best.params.ordered();
    let mut gamma = best.gamma;
    if swapped {
        gamma.swap(0, 1);
    }
    Ok(EmFit {
        params,
        responsibilities: gamma,
        log_likelihood: best.ll,
        n_iter: best.n_iter,
        converged: best.converged,
        degenerate: false,
        history: best.history,
    })
}
