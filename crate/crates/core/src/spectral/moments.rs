use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use super::grid_indices;
use crate::dyadic::AtomicMeasure;
use crate::numeric::{mean_and_std_error, pairwise_sum, pairwise_sum_by};
use crate::rng::{rng_for, Stream};
use crate::{Error, Result};

/// Largest walk length for exhaustive enumeration (`2^16` words).
pub const MAX_EXACT_STEPS: usize = 16;

/// `E[e^{i u S(h/N)}] = cos(u/√N)^h`.
pub fn char_exact(u: f64, n_steps: usize, h: usize) -> f64 {
    (u / (n_steps as f64).sqrt()).cos().powi(h as i32)
}

/// The same expectation averaged over all `2^h` sign words.
pub fn char_enumerated(u: f64, n_steps: usize, h: usize) -> Result<f64> {
    if h > MAX_EXACT_STEPS {
        return Err(Error::Resource(format!("cannot enumerate 2^{h} words")));
    }
    let scale = (n_steps as f64).sqrt();
    let total = pairwise_sum_by(1usize << h, &|w| {
        let p = 2 * (w as u32).count_ones() as i64 - h as i64;
        (u * p as f64 / scale).cos()
    });
    Ok(total / (1u64 << h) as f64)
}

/// Worst gap between [`char_exact`] and [`char_enumerated`] over every
/// `h <= 16`, `u ∈ {0.5, 1, 2, 5}` and `N ∈ {4, 16, 64}` with `h <= N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharSuite {
    pub cases: usize,
    pub max_abs_error: f64,
}

pub fn char_suite() -> CharSuite {
    let mut cases = 0;
    let mut max_abs_error: f64 = 0.0;
    for n_steps in [4usize, 16, 64] {
        for h in 1..=MAX_EXACT_STEPS.min(n_steps) {
            for u in [0.5, 1.0, 2.0, 5.0] {
                let e = char_enumerated(u, n_steps, h).expect("h within enumeration limit");
                max_abs_error = max_abs_error.max((e - char_exact(u, n_steps, h)).abs());
                cases += 1;
            }
        }
    }
    CharSuite {
        cases,
        max_abs_error,
    }
}

/// `(22 q u^{-2α})^q`.
pub fn moment_bound(q: u32, u: f64, alpha: f64) -> f64 {
    (22.0 * q as f64 * u.powf(-2.0 * alpha)).powi(q as i32)
}

fn check_steps(theta: &AtomicMeasure, n_steps: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    if n_steps == 0 {
        return Err(Error::InvalidInput("walk needs at least one step".into()));
    }
    Ok((grid_indices(theta, n_steps)?, theta.weights().collect()))
}

/// `e^{i u P/√N}` for `P = -N..=N`, indexed by `P + N`.
fn phase_table(u: f64, n_steps: usize) -> Vec<Complex64> {
    let scale = (n_steps as f64).sqrt();
    (-(n_steps as i64)..=n_steps as i64)
        .map(|p| Complex64::from_polar(1.0, u * p as f64 / scale))
        .collect()
}

/// `|Σ_j c_j e^{i u P(j)/√N}|^2` for a word given as little-endian 64-bit blocks.
fn squared_modulus(
    blocks: &[u64],
    idx: &[usize],
    weights: &[f64],
    phases: &[Complex64],
    n_steps: usize,
) -> f64 {
    let mut prefix = Vec::with_capacity(blocks.len() + 1);
    prefix.push(0u32);
    for b in blocks {
        prefix.push(prefix.last().unwrap() + b.count_ones());
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (&j, &c) in idx.iter().zip(weights) {
        let (blk, off) = (j / 64, j % 64);
        let partial = if off == 0 {
            0
        } else {
            (blocks[blk] & ((1u64 << off) - 1)).count_ones()
        };
        let ones = (prefix[blk] + partial) as i64;
        let p = 2 * ones - j as i64;
        acc += phases[(p + n_steps as i64) as usize] * c;
    }
    acc.norm_sqr()
}

fn trial_blocks(seed: u64, trial: u64, n_steps: usize) -> Vec<u64> {
    let mut rng = rng_for(seed, Stream::Trial(trial));
    let mut blocks: Vec<u64> = (0..n_steps.div_ceil(64)).map(|_| rng.next_u64()).collect();
    if !n_steps.is_multiple_of(64) {
        *blocks.last_mut().unwrap() &= (1u64 << (n_steps % 64)) - 1;
    }
    blocks
}

fn enumerate_f(theta: &AtomicMeasure, n_steps: usize, u: f64) -> Result<Vec<f64>> {
    if n_steps > MAX_EXACT_STEPS {
        return Err(Error::Resource(format!(
            "exhaustive evaluation needs N <= {MAX_EXACT_STEPS}, got {n_steps}"
        )));
    }
    let (idx, weights) = check_steps(theta, n_steps)?;
    let phases = phase_table(u, n_steps);
    Ok((0..1u64 << n_steps)
        .map(|w| squared_modulus(&[w], &idx, &weights, &phases, n_steps))
        .collect())
}

/// `E|∫ e^{i u S} dθ|^{2q}` averaged over all `2^N` words.
pub fn moment_exact_small(theta: &AtomicMeasure, n_steps: usize, q: u32, u: f64) -> Result<f64> {
    let f = enumerate_f(theta, n_steps, u)?;
    let powered: Vec<f64> = f.iter().map(|x| x.powi(q as i32)).collect();
    Ok(pairwise_sum(&powered) / f.len() as f64)
}

/// `Σ_{j,k} c_j c_k cos(u/√N)^{|j-k|}`, the second moment via independent increments.
pub fn moment_double_sum(theta: &AtomicMeasure, n_steps: usize, u: f64) -> Result<f64> {
    let (idx, weights) = check_steps(theta, n_steps)?;
    let a = (u / (n_steps as f64).sqrt()).cos();
    let m = idx.len();
    Ok(pairwise_sum_by(m * m, &|t| {
        let (j, k) = (t / m, t % m);
        weights[j] * weights[k] * a.powi(idx[j].abs_diff(idx[k]) as i32)
    }))
}

/// Monte Carlo estimate of `E|∫ e^{i u S_n} dθ_n|^{2q}` with its bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub n_steps: usize,
    pub q: u32,
    pub u: f64,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
    pub exact: Option<f64>,
}

impl MomentEstimate {
    /// `mean - 3 σ <= bound`.
    pub fn bound_holds(&self) -> bool {
        self.mean - 3.0 * self.std_error <= self.bound
    }

    /// `|mean - exact| <= 3 σ`, when the exact value is known.
    pub fn agrees_with_exact(&self) -> Option<bool> {
        self.exact
            .map(|e| (self.mean - e).abs() <= 3.0 * self.std_error)
    }
}

fn sample_f(
    theta: &AtomicMeasure,
    n_steps: usize,
    u: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let (idx, weights) = check_steps(theta, n_steps)?;
    let phases = phase_table(u, n_steps);
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|t| {
            squared_modulus(
                &trial_blocks(seed, t, n_steps),
                &idx,
                &weights,
                &phases,
                n_steps,
            )
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn moment_mc(
    theta: &AtomicMeasure,
    n_steps: usize,
    q: u32,
    u: f64,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if q == 0 {
        return Err(Error::InvalidInput("q must be at least 1".into()));
    }
    if trials < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    if !u.is_finite() {
        return Err(Error::InvalidInput(format!("frequency {u} is not finite")));
    }
    let f = sample_f(theta, n_steps, u, trials, seed)?;
    let powered: Vec<f64> = f.iter().map(|x| x.powi(q as i32)).collect();
    let (mean, std_error) = mean_and_std_error(&powered);
    let exact = if n_steps <= MAX_EXACT_STEPS {
        Some(moment_exact_small(theta, n_steps, q, u)?)
    } else {
        None
    };
    Ok(MomentEstimate {
        n_steps,
        q,
        u,
        alpha,
        trials,
        seed,
        mean,
        std_error,
        bound: moment_bound(q, u, alpha),
        exact,
    })
}

/// Empirical tail of `F = |∫ e^{i u S_n} dθ_n|^2` against the Chebyshev chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub n_steps: usize,
    pub u: f64,
    pub eps: f64,
    pub q: u32,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    /// `u^{-2α+ε}`.
    pub threshold: f64,
    pub p_hat: f64,
    pub p_std_error: f64,
    pub moment_mean: f64,
    pub moment_std_error: f64,
    /// `mean(F^q) / threshold^q`.
    pub chain: f64,
    pub mc_error: f64,
    pub holds: bool,
}

/// `q = ceil(6/ε)`.
pub fn default_tail_q(eps: f64) -> u32 {
    (6.0 / eps).ceil() as u32
}

#[allow(clippy::too_many_arguments)]
pub fn tail_mc(
    theta: &AtomicMeasure,
    n_steps: usize,
    u: f64,
    eps: f64,
    q: Option<u32>,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<TailReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("ε = {eps} must be positive")));
    }
    if trials < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    let q = q.unwrap_or_else(|| default_tail_q(eps));
    if q == 0 {
        return Err(Error::InvalidInput("q must be at least 1".into()));
    }
    let threshold = u.powf(-2.0 * alpha + eps);
    let f = sample_f(theta, n_steps, u, trials, seed)?;
    let hits: Vec<f64> = f
        .iter()
        .map(|&x| if x > threshold { 1.0 } else { 0.0 })
        .collect();
    let powered: Vec<f64> = f.iter().map(|x| x.powi(q as i32)).collect();
    let (p_hat, p_std_error) = mean_and_std_error(&hits);
    let (moment_mean, moment_std_error) = mean_and_std_error(&powered);
    let tq = threshold.powi(q as i32);
    let chain = moment_mean / tq;
    let mc_error = p_std_error.hypot(moment_std_error / tq);
    Ok(TailReport {
        n_steps,
        u,
        eps,
        q,
        alpha,
        trials,
        seed,
        threshold,
        p_hat,
        p_std_error,
        moment_mean,
        moment_std_error,
        chain,
        mc_error,
        holds: p_hat <= chain + 3.0 * mc_error,
    })
}

/// Exact `P{F > u^{-2α+ε}}` over all `2^N` words.
pub fn tail_exact_small(
    theta: &AtomicMeasure,
    n_steps: usize,
    u: f64,
    eps: f64,
    alpha: f64,
) -> Result<f64> {
    let threshold = u.powf(-2.0 * alpha + eps);
    let f = enumerate_f(theta, n_steps, u)?;
    Ok(f.iter().filter(|&&x| x > threshold).count() as f64 / f.len() as f64)
}
