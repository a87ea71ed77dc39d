use rayon::prelude::*;

use super::grid_indices;
use crate::dyadic::AtomicMeasure;
use crate::numeric::{pairwise_sum, pairwise_sum_by};
use crate::{Error, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "energy exponent α = {alpha} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// `Σ_{j≠k} c_j c_k |t_j - t_k|^{-α}`; the infinite diagonal is left out.
pub fn energy_offdiag(mu: &AtomicMeasure, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let atoms = mu.atoms();
    let rows: Vec<f64> = (0..atoms.len())
        .into_par_iter()
        .map(|j| {
            let (t, c) = (atoms[j].position, atoms[j].weight);
            let rest = &atoms[j + 1..];
            c * pairwise_sum_by(rest.len(), &|i| {
                rest[i].weight * (rest[i].position - t).powf(-alpha)
            })
        })
        .collect();
    Ok(2.0 * pairwise_sum(&rows))
}

/// Off-diagonal energy of a measure on the grid `j/N`, for many exponents.
///
/// Pair weights are aggregated by index distance once, after which each
/// exponent costs one pass over the distinct distances.
#[derive(Debug, Clone)]
pub struct EnergyProfile {
    n_steps: usize,
    /// `(m, Σ_{k-j=m} c_j c_k)` for every occurring distance `m > 0`.
    pairs: Vec<(usize, f64)>,
}

impl EnergyProfile {
    pub fn new(theta: &AtomicMeasure, n_steps: usize) -> Result<Self> {
        let idx = grid_indices(theta, n_steps)?;
        let w: Vec<f64> = theta.weights().collect();
        let mut by_gap = vec![0.0f64; n_steps + 1];
        for j in 0..idx.len() {
            for k in j + 1..idx.len() {
                by_gap[idx[k] - idx[j]] += w[j] * w[k];
            }
        }
        let pairs = by_gap
            .into_iter()
            .enumerate()
            .filter(|&(_, v)| v > 0.0)
            .collect();
        Ok(EnergyProfile { n_steps, pairs })
    }

    pub fn energy(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let n = self.n_steps as f64;
        Ok(2.0
            * pairwise_sum_by(self.pairs.len(), &|i| {
                let (m, v) = self.pairs[i];
                v * (m as f64 / n).powf(-alpha)
            }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{cantor_flow, n_approximation, Atom, CantorSpec, Rational};
    use crate::fit::least_squares;

    #[test]
    fn two_atoms() {
        let mu = AtomicMeasure::new(vec![
            Atom {
                position: 0.0,
                weight: 0.5,
            },
            Atom {
                position: 1.0,
                weight: 0.5,
            },
        ])
        .unwrap();
        assert_eq!(energy_offdiag(&mu, 0.5).unwrap(), 0.5);
        let one = AtomicMeasure::new(vec![Atom {
            position: 0.2,
            weight: 1.0,
        }])
        .unwrap();
        assert_eq!(energy_offdiag(&one, 0.5).unwrap(), 0.0);
        assert!(energy_offdiag(&mu, 1.0).is_err());
    }

    #[test]
    fn profile_matches_direct() {
        let s = CantorSpec::new(Rational::new(1, 4), 10).unwrap();
        let theta = n_approximation(&cantor_flow(&s).unwrap(), 10).unwrap();
        let p = EnergyProfile::new(&theta, 1 << 10).unwrap();
        for alpha in [0.2, 0.5, 0.8] {
            let (a, b) = (
                p.energy(alpha).unwrap(),
                energy_offdiag(&theta, alpha).unwrap(),
            );
            assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn growth_separates_dimension() {
        let s = CantorSpec::new(Rational::new(1, 4), 14).unwrap();
        let flow = cantor_flow(&s).unwrap();
        let depths = [6u32, 8, 10, 12, 14];
        let energies = |alpha: f64| -> Vec<f64> {
            depths
                .iter()
                .map(|&n| energy_offdiag(&n_approximation(&flow, n).unwrap(), alpha).unwrap())
                .collect()
        };
        // below the dimension the increments shrink geometrically, so the sequence converges
        let low = energies(0.4);
        let steps: Vec<f64> = low.windows(2).map(|w| w[1] - w[0]).collect();
        for w in steps.windows(2) {
            assert!(w[1] < 0.95 * w[0], "{low:?}");
        }
        // above it the energy is a partial geometric sum whose increments grow like N^{0.6 - 0.5}
        let high = energies(0.6);
        let xs: Vec<f64> = depths[1..]
            .iter()
            .map(|&n| n as f64 * std::f64::consts::LN_2)
            .collect();
        let ys: Vec<f64> = high.windows(2).map(|w| (w[1] - w[0]).ln()).collect();
        let fit = least_squares(&xs, &ys).unwrap();
        assert!((fit.slope - 0.1).abs() < 0.03, "{fit:?}");
    }
}
