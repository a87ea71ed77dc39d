use std::f64::consts::PI;

use serde::Serialize;

use super::transform::{envelope_blocks, pushout_measure, transform_grid, SpectrumSample};
use crate::dyadic::{n_approximation, TreeFlowMeasure};
use crate::fit::least_squares;
use crate::walk::RefinementLadder;
use crate::{Error, Result};

/// Frequencies below this are dominated by the mass near `u = 0` and are left
/// out of decay fits by default.
pub const DEFAULT_U_LO: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Per-block supremum minus its rounding bound.
    BlockSup,
    /// Per-block root mean square; reported as a diagnostic only.
    BlockRms,
}

/// Power-law fit `envelope ≈ e^{intercept} u^{-exponent}` over dyadic blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub u_range: (f64, f64),
    pub method: FitMethod,
    /// `(center, envelope)` of each block used.
    pub points: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Fit the block-sup envelope of `spectrum` restricted to `[u_lo, u_hi]`.
pub fn decay_fit(spectrum: &SpectrumSample, u_lo: f64, u_hi: f64) -> Result<DecayFit> {
    decay_fit_with(spectrum, u_lo, u_hi, FitMethod::BlockSup)
}

pub fn decay_fit_with(
    spectrum: &SpectrumSample,
    u_lo: f64,
    u_hi: f64,
    method: FitMethod,
) -> Result<DecayFit> {
    let moduli = spectrum.moduli();
    let blocks = envelope_blocks(&spectrum.grid, &moduli, &spectrum.uncertainty, u_lo, u_hi);
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for b in blocks.iter().filter(|b| b.lo > 0.0) {
        let value = match method {
            FitMethod::BlockSup => b.sup - b.uncertainty,
            FitMethod::BlockRms => b.rms,
        };
        if value > 0.0 {
            points.push((b.center, value));
        } else {
            warnings.push(format!(
                "block [{}, {}) dropped: envelope vanishes",
                b.lo, b.hi
            ));
        }
    }
    if points.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 dyadic blocks in [{u_lo}, {u_hi}], found {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let line = least_squares(&xs, &ys)?;
    Ok(DecayFit {
        exponent: -line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        u_range: (u_lo, u_hi),
        method,
        points,
        warnings,
    })
}

/// Output of [`decay_pipeline`].
#[derive(Debug, Clone, Serialize)]
pub struct DecayRun {
    #[serde(skip)]
    pub spectrum: SpectrumSample,
    pub fit: DecayFit,
    pub rms_fit: Option<DecayFit>,
    pub walk_level: u32,
    pub theta_level: u32,
    /// `π √M / 2` for a walk of `M` steps. Atoms sit at even walk indices, where
    /// `S √M` is even, so `|ν̂|` is symmetric about this frequency and returns
    /// to the total mass at `π √M`.
    pub valid_u_max: f64,
    /// `0.1 √M / (m (m + 1))` with `m = log2 M`; reported, not enforced.
    pub chain_u_max: f64,
    /// `u_max · d / (1 - 2^{-1/2})` with `d` the last ladder distance: a heuristic
    /// bound on the distance to the limit path at the top frequency.
    pub limit_error_at_u_max: Option<f64>,
}

/// Transform the pushout of `θ_n` under the finest ladder walk over `grid`
/// and fit the decay of its envelope on `[u_lo, max grid]`.
pub fn decay_pipeline(
    ladder: &RefinementLadder,
    flow: &TreeFlowMeasure,
    theta_level: u32,
    grid: &[f64],
    u_lo: f64,
) -> Result<DecayRun> {
    let walk = ladder.finest();
    let walk_level = ladder.n_max();
    let m = walk.len() as f64;
    let valid_u_max = PI * m.sqrt() / 2.0;
    let u_max = grid.iter().copied().fold(0.0, f64::max);
    if u_max > valid_u_max {
        return Err(Error::Validity { u_max, valid_u_max });
    }
    let theta = n_approximation(flow, theta_level)?;
    let nu = pushout_measure(walk, &theta)?;
    let mut spectrum = transform_grid(&nu, grid)?;
    spectrum.valid_u_max = Some(valid_u_max);
    let fit = decay_fit(&spectrum, u_lo, u_max)?;
    let rms_fit = decay_fit_with(&spectrum, u_lo, u_max, FitMethod::BlockRms).ok();
    let level = walk_level as f64;
    Ok(DecayRun {
        spectrum,
        fit,
        rms_fit,
        walk_level,
        theta_level,
        valid_u_max,
        chain_u_max: 0.1 * m.sqrt() / (level * (level + 1.0)),
        limit_error_at_u_max: ladder
            .distances()
            .last()
            .map(|d| u_max * d / (1.0 - std::f64::consts::FRAC_1_SQRT_2)),
    })
}
