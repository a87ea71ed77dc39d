use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::gamma;

use super::grid_indices;
use crate::dyadic::{Atom, AtomicMeasure};
use crate::numeric::pairwise_sum_by;
use crate::rng::{rng_for, Stream};
use crate::{Error, Result};

/// The constant in the interval bound `θ_n(I) <= C |I|^α` used by the
/// geometric-sum estimate.
pub const PAPER_CONSTANT_C: f64 = 3.0;

/// Both sides of `∫ f dμ = μ[0,1] f(1) - ∫_0^1 f'(t) μ[0,t] dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaEval {
    pub lhs: f64,
    /// Right side with the integral split exactly over the gaps between atoms.
    pub rhs: f64,
    /// Right side with the integral done by composite Simpson quadrature.
    pub rhs_quadrature: f64,
    pub abs_error: f64,
    /// `abs_error` relative to `Σ c_j |f(t_j)| + μ[0,1] |f(1)|`.
    pub rel_error: f64,
}

/// Evaluate the summation-by-parts identity for an atomic measure on `[0, 1]`.
///
/// On the gap `[t_j, t_{j+1})` the distribution function is the constant
/// `μ[0, t_j]`, so the integral there is exactly `μ[0, t_j] (f(t_{j+1}) - f(t_j))`
/// (with `t_{m+1} = 1`). Quadrature of `f'` is kept only as a cross-check.
pub fn parts_lemma_eval(
    mu: &AtomicMeasure,
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    quad_step: f64,
) -> Result<LemmaEval> {
    if !(quad_step > 0.0 && quad_step <= 1e-4) {
        return Err(Error::InvalidInput(format!(
            "quadrature step {quad_step} must lie in (0, 1e-4]"
        )));
    }
    let atoms = mu.atoms();
    if let Some(a) = atoms.iter().find(|a| !(0.0..=1.0).contains(&a.position)) {
        return Err(Error::InvalidInput(format!(
            "atom at {} lies outside [0, 1]",
            a.position
        )));
    }
    let m = atoms.len();
    let cum = mu.cumulative();
    let total = cum.last().copied().unwrap_or(0.0);
    let next = |j: usize| {
        if j + 1 < m {
            atoms[j + 1].position
        } else {
            1.0
        }
    };

    let lhs = pairwise_sum_by(m, &|j| atoms[j].weight * f(atoms[j].position));
    let split = pairwise_sum_by(m, &|j| cum[j] * (f(next(j)) - f(atoms[j].position)));
    let quad = pairwise_sum_by(m, &|j| {
        cum[j] * simpson(df, atoms[j].position, next(j), quad_step)
    });
    let f1 = f(1.0);
    let rhs = total * f1 - split;
    let rhs_quadrature = total * f1 - quad;
    let scale =
        pairwise_sum_by(m, &|j| atoms[j].weight * f(atoms[j].position).abs()) + total * f1.abs();
    let abs_error = (lhs - rhs).abs();
    Ok(LemmaEval {
        lhs,
        rhs,
        rhs_quadrature,
        abs_error,
        rel_error: if scale > 0.0 {
            abs_error / scale
        } else {
            abs_error
        },
    })
}

/// Composite Simpson rule with panels no wider than `step`.
fn simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, step: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = ((b - a) / step).ceil().max(1.0) as usize * 2;
    let h = (b - a) / panels as f64;
    let inner = pairwise_sum_by(panels - 1, &|i| {
        let k = i + 1;
        (if k % 2 == 1 { 4.0 } else { 2.0 }) * g(a + k as f64 * h)
    });
    h / 3.0 * (g(a) + inner + g(b))
}

/// Names of the test functions used by [`lemma_suite`].
pub const LEMMA_FUNCTIONS: [&str; 7] = ["1", "t", "t^2", "t^3", "t^4", "t^5", "sin(7t)"];

type RealFn = Box<dyn Fn(f64) -> f64>;

fn lemma_function(k: usize) -> (RealFn, RealFn) {
    match k {
        0..=5 => {
            let p = k as i32;
            (
                Box::new(move |t: f64| t.powi(p)),
                Box::new(move |t: f64| {
                    if p == 0 {
                        0.0
                    } else {
                        p as f64 * t.powi(p - 1)
                    }
                }),
            )
        }
        _ => (
            Box::new(|t: f64| (7.0 * t).sin()),
            Box::new(|t: f64| 7.0 * (7.0 * t).cos()),
        ),
    }
}

/// Random atomic measure number `index` of a run: 1 to 64 atoms with
/// uniform positions in `[0, 1]` and uniform weights, total mass in `(0, 1]`.
pub fn random_measure(seed: u64, index: u64) -> AtomicMeasure {
    let mut rng = rng_for(seed, Stream::Trial(index));
    let m = rng.random_range(1..=64usize);
    let mut atoms: Vec<Atom> = (0..m)
        .map(|_| Atom {
            position: rng.random::<f64>(),
            weight: rng.random::<f64>() + 1e-3,
        })
        .collect();
    let raw: f64 = atoms.iter().map(|a| a.weight).sum();
    let total = 1.0 - rng.random::<f64>();
    for a in &mut atoms {
        a.weight *= total / raw;
    }
    AtomicMeasure::from_unsorted(atoms).expect("positions lie in [0, 1)")
}

/// One measure and test function of the identity suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCase {
    pub measure: u64,
    pub atoms: usize,
    pub function: &'static str,
    pub eval: LemmaEval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSuite {
    pub cases: Vec<LemmaCase>,
    pub max_rel_error: f64,
    pub max_quadrature_error: f64,
}

impl LemmaSuite {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// The summation-by-parts identity over `measures` random measures and
/// every function in [`LEMMA_FUNCTIONS`].
pub fn lemma_suite(seed: u64, measures: u64, quad_step: f64) -> Result<LemmaSuite> {
    let mut cases = Vec::new();
    for i in 0..measures {
        let mu = random_measure(seed, i);
        for (k, name) in LEMMA_FUNCTIONS.iter().enumerate() {
            let (f, df) = lemma_function(k);
            let eval = parts_lemma_eval(&mu, &*f, &*df, quad_step)?;
            cases.push(LemmaCase {
                measure: i,
                atoms: mu.len(),
                function: name,
                eval,
            });
        }
    }
    let max_rel_error = cases.iter().map(|c| c.eval.rel_error).fold(0.0, f64::max);
    let max_quadrature_error = cases
        .iter()
        .map(|c| (c.eval.rhs_quadrature - c.eval.lhs).abs())
        .fold(0.0, f64::max);
    Ok(LemmaSuite {
        cases,
        max_rel_error,
        max_quadrature_error,
    })
}

/// `Σ_h c(r+h) a^h` against its three-term bound, with `a = cos(u/√N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricSum {
    pub n_steps: usize,
    pub r: usize,
    pub u: f64,
    pub alpha: f64,
    pub a: f64,
    pub lhs: f64,
    /// `a^N + (1-a)/N^α + C Γ(α+1) / (N log(1/a))^α`.
    pub rhs: f64,
    /// `11 / u^{2α}`.
    pub simplified: f64,
}

impl GeometricSum {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Evaluate the geometric sum for `θ_n` on the grid `j/N`, `c(j) = 0` off the atoms.
pub fn geometric_sum_bound(
    theta: &AtomicMeasure,
    n_steps: usize,
    r: usize,
    u: f64,
    alpha: f64,
) -> Result<GeometricSum> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "α = {alpha} must lie in (0, 1]"
        )));
    }
    if r > n_steps {
        return Err(Error::InvalidInput(format!(
            "offset r = {r} exceeds N = {n_steps}"
        )));
    }
    let nf = n_steps as f64;
    let a = (u / nf.sqrt()).cos();
    if !(a > 0.0 && a < 1.0) || u <= 0.0 {
        return Err(Error::OutOfRegime(format!(
            "need 0 < u/√N < π/2, got u = {u}, N = {n_steps} (a = {a})"
        )));
    }
    let idx = grid_indices(theta, n_steps)?;
    let weights: Vec<f64> = theta.weights().collect();
    let start = idx.partition_point(|&j| j < r);
    let lhs = pairwise_sum_by(idx.len() - start, &|i| {
        weights[start + i] * a.powi((idx[start + i] - r) as i32)
    });
    let rhs = a.powf(nf)
        + (1.0 - a) / nf.powf(alpha)
        + PAPER_CONSTANT_C * gamma(alpha + 1.0) / (nf * (1.0 / a).ln()).powf(alpha);
    Ok(GeometricSum {
        n_steps,
        r,
        u,
        alpha,
        a,
        lhs,
        rhs,
        simplified: 11.0 / u.powf(2.0 * alpha),
    })
}
