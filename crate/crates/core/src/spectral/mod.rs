//! Fourier transforms of pushout measures and the estimates built on them.

mod decay;
mod energy;
mod grid;
mod lemma;
mod moments;
mod transform;

pub use decay::{
    decay_fit, decay_fit_with, decay_pipeline, DecayFit, DecayRun, FitMethod, DEFAULT_U_LO,
};
pub use energy::{energy_offdiag, EnergyProfile};
pub use grid::GridSpec;
pub use lemma::{
    geometric_sum_bound, lemma_suite, parts_lemma_eval, random_measure, GeometricSum, LemmaCase,
    LemmaEval, LemmaSuite, LEMMA_FUNCTIONS, PAPER_CONSTANT_C,
};
pub use moments::{
    char_enumerated, char_exact, char_suite, default_tail_q, moment_bound, moment_double_sum,
    moment_exact_small, moment_mc, tail_exact_small, tail_mc, CharSuite, MomentEstimate,
    TailReport, MAX_EXACT_STEPS,
};
pub use transform::{
    envelope_blocks, pushout_measure, transform_at, transform_grid, EnvelopeBlock, SpectrumSample,
};

use crate::dyadic::AtomicMeasure;
use crate::{Error, Result};

/// Grid indices `j` of atoms at `j/N`, failing on any atom off the grid.
pub(crate) fn grid_indices(theta: &AtomicMeasure, n_steps: usize) -> Result<Vec<usize>> {
    theta
        .positions()
        .map(|t| {
            let x = t * n_steps as f64;
            if x.fract() != 0.0 || !(0.0..=n_steps as f64).contains(&x) {
                Err(Error::InvalidInput(format!(
                    "atom at {t} is not on the grid of spacing 1/{n_steps}"
                )))
            } else {
                Ok(x as usize)
            }
        })
        .collect()
}
