use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::grid_indices;
use crate::dyadic::{Atom, AtomicMeasure};
use crate::numeric::pairwise_sum_complex_by;
use crate::walk::WalkPath;
use crate::{Error, Result};

/// Image of `theta` under the walk: an atom of weight `c(j)` at `S(j/N)` for
/// every atom `c(j) δ_{j/N}`, with coincident images merged.
///
/// `theta` may live on a coarser dyadic grid than the walk.
pub fn pushout_measure(path: &WalkPath, theta: &AtomicMeasure) -> Result<AtomicMeasure> {
    let merged = pushout_sums(path, theta)?;
    let scale = path.scale();
    let atoms = merged
        .into_iter()
        .map(|(p, w)| Atom {
            position: p as f64 / scale,
            weight: w,
        })
        .collect();
    AtomicMeasure::with_total(atoms, theta.total_mass())
}

/// Pushout keyed by the integer partial sum `P(j)`, sorted by `P`.
pub(crate) fn pushout_sums(path: &WalkPath, theta: &AtomicMeasure) -> Result<Vec<(i32, f64)>> {
    let idx = grid_indices(theta, path.len())?;
    let sums = path.partial_sums();
    let mut pairs: Vec<(i32, f64)> = idx
        .iter()
        .zip(theta.weights())
        .map(|(&j, w)| (sums[j], w))
        .collect();
    // stable sort keeps the original index order inside each merged group
    pairs.sort_by_key(|&(p, _)| p);
    let mut merged: Vec<(i32, f64)> = Vec::with_capacity(pairs.len());
    for (p, w) in pairs {
        match merged.last_mut() {
            Some(last) if last.0 == p => last.1 += w,
            _ => merged.push((p, w)),
        }
    }
    Ok(merged)
}

/// `Σ_j c_j e^{i u t_j}`, summed pairwise in index order.
pub fn transform_at(nu: &AtomicMeasure, u: f64) -> Result<Complex64> {
    if !u.is_finite() {
        return Err(Error::InvalidInput(format!("frequency {u} is not finite")));
    }
    Ok(transform_unchecked(nu.atoms(), u))
}

fn transform_unchecked(atoms: &[Atom], u: f64) -> Complex64 {
    pairwise_sum_complex_by(atoms.len(), &|i| {
        let a = atoms[i];
        Complex64::from_polar(a.weight, u * a.position)
    })
}

/// A bound on the floating-point error of [`transform_at`] at `u`.
fn rounding_bound(atoms: &[Atom], total: f64, u: f64) -> f64 {
    let reach = atoms.iter().map(|a| a.position.abs()).fold(0.0, f64::max);
    let depth = (atoms.len().max(2) as f64).log2().ceil();
    total * f64::EPSILON * (4.0 + 2.0 * depth + u.abs() * reach)
}

/// Supremum of `|ν̂|` over one dyadic block `[lo, hi)` of the frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeBlock {
    pub lo: f64,
    pub hi: f64,
    /// Geometric centre `sqrt(lo * hi)`; zero for the block `{0}`.
    pub center: f64,
    pub sup: f64,
    pub argmax: f64,
    /// Largest rounding bound inside the block.
    pub uncertainty: f64,
    /// Root mean square of `|ν̂|` over the block's grid points.
    pub rms: f64,
    pub count: usize,
}

/// Group grid points in `[u_lo, u_hi]` by dyadic block `[2^k, 2^{k+1})`;
/// `u = 0` gets a block of its own.
pub fn envelope_blocks(
    grid: &[f64],
    moduli: &[f64],
    uncertainty: &[f64],
    u_lo: f64,
    u_hi: f64,
) -> Vec<EnvelopeBlock> {
    let mut blocks: Vec<EnvelopeBlock> = Vec::new();
    let mut current: Option<i32> = None;
    let mut sq_sum = 0.0;
    for i in 0..grid.len() {
        let u = grid[i];
        if u < u_lo || u > u_hi {
            continue;
        }
        let key = if u == 0.0 {
            i32::MIN
        } else {
            u.log2().floor() as i32
        };
        if current != Some(key) {
            if let Some(b) = blocks.last_mut() {
                b.rms = (sq_sum / b.count as f64).sqrt();
            }
            let (lo, hi) = if key == i32::MIN {
                (0.0, 0.0)
            } else {
                ((key as f64).exp2(), (key as f64 + 1.0).exp2())
            };
            blocks.push(EnvelopeBlock {
                lo,
                hi,
                center: (lo * hi).sqrt(),
                sup: f64::NEG_INFINITY,
                argmax: u,
                uncertainty: 0.0,
                rms: 0.0,
                count: 0,
            });
            current = Some(key);
            sq_sum = 0.0;
        }
        let b = blocks.last_mut().expect("block pushed");
        if moduli[i] > b.sup {
            b.sup = moduli[i];
            b.argmax = u;
        }
        b.uncertainty = b.uncertainty.max(uncertainty[i]);
        b.count += 1;
        sq_sum += moduli[i] * moduli[i];
    }
    if let Some(b) = blocks.last_mut() {
        b.rms = (sq_sum / b.count as f64).sqrt();
    }
    blocks
}

/// Transform values on a frequency grid together with their dyadic envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSample {
    pub grid: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<Complex64>,
    pub uncertainty: Vec<f64>,
    pub envelope: Vec<EnvelopeBlock>,
    pub total_mass: f64,
    pub valid_u_max: Option<f64>,
}

impl SpectrumSample {
    /// Wrap precomputed values (no rounding uncertainty).
    pub fn from_values(grid: Vec<f64>, values: Vec<Complex64>, total_mass: f64) -> Self {
        let uncertainty = vec![0.0; grid.len()];
        let moduli: Vec<f64> = values.iter().map(|v| v.norm()).collect();
        let envelope = envelope_blocks(&grid, &moduli, &uncertainty, 0.0, f64::INFINITY);
        SpectrumSample {
            grid,
            values,
            uncertainty,
            envelope,
            total_mass,
            valid_u_max: None,
        }
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Rows `u, re, im, abs`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        use crate::numeric::fmt17;
        writeln!(w, "u,re,im,abs")?;
        for (u, v) in self.grid.iter().zip(&self.values) {
            writeln!(
                w,
                "{},{},{},{}",
                fmt17(*u),
                fmt17(v.re),
                fmt17(v.im),
                fmt17(v.norm())
            )?;
        }
        Ok(())
    }
}

/// Evaluate [`transform_at`] on every grid point (in parallel; each value is
/// computed independently so the result does not depend on scheduling).
pub fn transform_grid(nu: &AtomicMeasure, grid: &[f64]) -> Result<SpectrumSample> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty frequency grid".into()));
    }
    if grid.iter().any(|u| !u.is_finite() || *u < 0.0) {
        return Err(Error::InvalidInput(
            "frequencies must be finite and nonnegative".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("frequency grid must be sorted".into()));
    }
    let atoms = nu.atoms();
    let values: Vec<Complex64> = grid
        .par_iter()
        .map(|&u| transform_unchecked(atoms, u))
        .collect();
    let uncertainty: Vec<f64> = grid
        .iter()
        .map(|&u| rounding_bound(atoms, nu.total_mass(), u))
        .collect();
    let moduli: Vec<f64> = values.iter().map(|v| v.norm()).collect();
    let envelope = envelope_blocks(grid, &moduli, &uncertainty, 0.0, f64::INFINITY);
    Ok(SpectrumSample {
        grid: grid.to_vec(),
        values,
        uncertainty,
        envelope,
        total_mass: nu.total_mass(),
        valid_u_max: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::decode_code;
    use std::f64::consts::PI;

    fn measure(atoms: &[(f64, f64)]) -> AtomicMeasure {
        AtomicMeasure::new(
            atoms
                .iter()
                .map(|&(p, w)| Atom {
                    position: p,
                    weight: w,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pushout_examples() {
        let r2 = 2f64.sqrt();
        let nu = pushout_measure(&decode_code("11").unwrap(), &measure(&[(0.5, 1.0)])).unwrap();
        assert_eq!(
            nu.atoms(),
            &[Atom {
                position: 1.0 / r2,
                weight: 1.0
            }]
        );
        let nu = pushout_measure(
            &decode_code("10").unwrap(),
            &measure(&[(0.5, 0.5), (1.0, 0.5)]),
        )
        .unwrap();
        assert_eq!(
            nu.atoms(),
            &[
                Atom {
                    position: 0.0,
                    weight: 0.5
                },
                Atom {
                    position: 1.0 / r2,
                    weight: 0.5
                }
            ]
        );
        // "1100": P = 1, 2, 1, 0 so the atoms at 1/4 and 3/4 merge
        let theta = measure(&[(0.25, 0.1), (0.5, 0.2), (0.75, 0.3), (1.0, 0.4)]);
        let nu = pushout_measure(&decode_code("1100").unwrap(), &theta).unwrap();
        assert_eq!(nu.len(), 3);
        assert!((nu.atoms()[1].weight - 0.4).abs() < 1e-15);
        assert_eq!(nu.total_mass(), theta.total_mass());
        assert!(pushout_measure(&decode_code("1100").unwrap(), &measure(&[(0.3, 1.0)])).is_err());
    }

    #[test]
    fn transform_examples() {
        let m = measure(&[(0.1, 0.25), (0.7, 0.75)]);
        assert_eq!(transform_at(&m, 0.0).unwrap(), Complex64::new(1.0, 0.0));
        let one = measure(&[(0.3, 1.0)]);
        assert!((transform_at(&one, 17.0).unwrap().norm() - 1.0).abs() < 1e-15);
        let u = 3.0;
        let anti = measure(&[(0.0, 0.5), (PI / u, 0.5)]);
        assert!(transform_at(&anti, u).unwrap().norm() < 1e-15);
        assert!(transform_at(&m, f64::NAN).is_err());
    }

    #[test]
    fn dirichlet_kernel_peak() {
        let n = 64;
        let uniform = measure(
            &(1..=n)
                .map(|j| (j as f64 / n as f64, 1.0 / n as f64))
                .collect::<Vec<_>>(),
        );
        let u = 2.0 * PI * n as f64;
        let s = transform_grid(&uniform, &[0.0, 1.0, u]).unwrap();
        assert!((s.values[2].norm() - 1.0).abs() < 1e-12);
        // closed form |sin(u/2) / (N sin(u/(2N)))| at u = 1
        let want = (0.5f64).sin().abs() / (n as f64 * (0.5 / n as f64).sin());
        assert!((s.values[1].norm() - want).abs() < 1e-12);
        assert_eq!(s.envelope[0].sup, 1.0);
        assert_eq!(s.envelope[0].lo, 0.0);
    }

    #[test]
    fn grid_matches_pointwise() {
        let m = measure(&[(0.0, 0.2), (0.31, 0.3), (1.7, 0.5)]);
        let grid: Vec<f64> = (0..200).map(|i| i as f64 * 0.37).collect();
        let s = transform_grid(&m, &grid).unwrap();
        for (u, v) in grid.iter().zip(&s.values) {
            assert_eq!(*v, transform_at(&m, *u).unwrap());
        }
        assert!(transform_grid(&m, &[]).is_err());
        assert!(transform_grid(&m, &[2.0, 1.0]).is_err());
    }
}
