//! Dimension estimates: box counting on point samples, the energy-growth
//! crossover of a flow, and the combined report comparing both with the
//! Fourier decay of the image measure.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dyadic::{cantor_flow, n_approximation, CantorSpec, TreeFlowMeasure};
use crate::fit::least_squares;
use crate::spectral::{decay_pipeline, DecayFit, EnergyProfile, GridSpec, DEFAULT_U_LO};
use crate::walk::{build_ladder, RefinementLadder, WalkPath, MAX_LADDER_LEVEL};
use crate::{Error, Result};

/// Slope threshold (per unit depth) separating bounded from growing energy.
pub const GROWTH_THRESHOLD: f64 = 0.02 * std::f64::consts::LN_2;

/// Walk values at the grid point nearest the midpoint of every stage-`m`
/// survivor, in survivor order.
pub fn image_points(path: &WalkPath, spec: &CantorSpec, m: u32) -> Result<Vec<f64>> {
    let level = path
        .level()
        .ok_or_else(|| Error::InvalidInput("walk length must be a power of two".into()))?;
    if m > spec.coarsest_fit(level) {
        return Err(Error::Domain(format!(
            "stage {m} intervals are shorter than the walk grid 2^-{level}"
        )));
    }
    let sv = spec.survivors(m)?;
    Ok((0..sv.len())
        .map(|i| path.grid_value(sv.nearest_grid_point(i, level) as usize))
        .collect())
}

/// Occupied-box counts and the fitted box dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCount {
    /// Box sides are `2^-k` for each listed `k`.
    pub scales: Vec<u32>,
    pub counts: Vec<usize>,
    pub dimension: f64,
    pub r_squared: f64,
    pub warnings: Vec<String>,
}

fn occupied(points: &[f64], origin: f64, k: u32) -> usize {
    let inv = (k as f64).exp2();
    points
        .iter()
        .map(|&x| ((x - origin) * inv).floor() as i64)
        .collect::<BTreeSet<_>>()
        .len()
}

/// Count occupied boxes of side `2^-k` (anchored at the smallest point) and
/// regress `log N` on `k log 2`.
pub fn box_count(points: &[f64], scales: &[u32]) -> Result<BoxCount> {
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("points must be finite".into()));
    }
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if points.is_empty() || lo == hi {
        return Ok(BoxCount {
            scales: scales.to_vec(),
            counts: vec![usize::from(!points.is_empty()); scales.len()],
            dimension: 0.0,
            r_squared: 1.0,
            warnings: vec!["all points coincide; dimension set to 0".into()],
        });
    }
    let distinct: BTreeSet<_> = scales.iter().collect();
    let span = match (scales.iter().min(), scales.iter().max()) {
        (Some(a), Some(b)) => b - a,
        _ => 0,
    };
    if distinct.len() < 4 || span < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 scales spanning 3 octaves, got {scales:?}"
        )));
    }
    let counts: Vec<usize> = scales.iter().map(|&k| occupied(points, lo, k)).collect();
    let xs: Vec<f64> = scales
        .iter()
        .map(|&k| k as f64 * std::f64::consts::LN_2)
        .collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let line = least_squares(&xs, &ys)?;
    Ok(BoxCount {
        scales: scales.to_vec(),
        counts,
        dimension: line.slope,
        r_squared: line.r_squared,
        warnings: Vec::new(),
    })
}

/// Scales from just below the sample's extent down to `finest`, stopping once
/// a quarter of the distinct points sit in separate boxes (past that the
/// count saturates at the sample size).
pub fn auto_scales(points: &[f64], finest: u32) -> Vec<u32> {
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Vec::new();
    }
    let distinct = points
        .iter()
        .map(|x| x.to_bits())
        .collect::<BTreeSet<_>>()
        .len();
    let start = (-(hi - lo).log2()).ceil().max(0.0) as u32 + 1;
    let mut scales = Vec::new();
    for k in start..=finest {
        scales.push(k);
        if occupied(points, lo, k) * 4 > distinct {
            break;
        }
    }
    scales
}

/// Result of [`capacity_dim`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityEstimate {
    pub crossover: f64,
    pub depths: Vec<u32>,
    /// `(α, slope of log ΔE against depth)`; `-inf` marks a non-increasing energy.
    pub slopes: Vec<(f64, f64)>,
    pub threshold: f64,
    pub warnings: Vec<String>,
}

/// The exponent at which the off-diagonal energy of `θ_n` switches from
/// converging to diverging as `n` grows.
///
/// For each `α` the increments `E_{n_{i+1}} - E_{n_i}` are regressed (in log)
/// against depth. Below the dimension they shrink geometrically, above it they
/// grow at rate `(α - dim) log 2` per level. The crossover is where the slope
/// first exceeds [`GROWTH_THRESHOLD`], interpolated linearly between grid points.
pub fn capacity_dim(
    flow: &TreeFlowMeasure,
    depths: &[u32],
    alpha_grid: &[f64],
) -> Result<CapacityEstimate> {
    if depths.len() < 3 {
        return Err(Error::InvalidInput(
            "capacity needs at least 3 depths".into(),
        ));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("depths must increase".into()));
    }
    if alpha_grid.is_empty() || alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "α grid must be nonempty and increasing".into(),
        ));
    }
    let profiles = depths
        .iter()
        .map(|&n| EnergyProfile::new(&n_approximation(flow, n)?, 1usize << n))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let mut slopes = Vec::with_capacity(alpha_grid.len());
    let mut all_zero = true;
    for &alpha in alpha_grid {
        let e = profiles
            .iter()
            .map(|p| p.energy(alpha))
            .collect::<Result<Vec<f64>>>()?;
        all_zero &= e.iter().all(|&v| v == 0.0);
        let inc: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).collect();
        let slope = if inc.iter().all(|&d| d > 0.0) {
            let xs: Vec<f64> = depths[1..].iter().map(|&n| n as f64).collect();
            let ys: Vec<f64> = inc.iter().map(|d| d.ln()).collect();
            least_squares(&xs, &ys)?.slope
        } else {
            f64::NEG_INFINITY
        };
        slopes.push((alpha, slope));
    }
    let crossover = if all_zero {
        warnings.push(
            "energy vanishes at every depth (single atom); crossover set to grid minimum".into(),
        );
        alpha_grid[0]
    } else {
        match slopes.iter().position(|&(_, s)| s > GROWTH_THRESHOLD) {
            Some(0) => {
                warnings.push("energy grows at every α; crossover at grid minimum".into());
                alpha_grid[0]
            }
            Some(i) => {
                let ((a0, s0), (a1, s1)) = (slopes[i - 1], slopes[i]);
                if s0.is_finite() {
                    a0 + (GROWTH_THRESHOLD - s0) / (s1 - s0) * (a1 - a0)
                } else {
                    a1
                }
            }
            None => {
                warnings.push(
                    "energy stays bounded across the α grid; crossover at grid maximum".into(),
                );
                *alpha_grid.last().expect("nonempty")
            }
        }
    };
    Ok(CapacityEstimate {
        crossover,
        depths: depths.to_vec(),
        slopes,
        threshold: GROWTH_THRESHOLD,
        warnings,
    })
}

/// `0.01, 0.02, ..., 0.99`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

/// Five depths spaced by `round(log2(1/ξ))` (so each step adds about one
/// construction stage), ending at the deepest level whose `θ_n` has at most
/// `2^11` atoms, capped at 24.
pub fn default_capacity_depths(spec: &CantorSpec) -> Vec<u32> {
    let step = (1.0 / spec.ratio_f64()).log2().round().max(1.0) as u32;
    let top = (1..=24u32)
        .filter(|&n| (n as f64 * spec.beta()).ceil() <= 11.0)
        .max()
        .unwrap_or(1);
    (0..5)
        .rev()
        .filter_map(|i| top.checked_sub(i * step))
        .filter(|&n| n >= 1)
        .collect()
}

/// Which word drives the walk in [`salem_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WordSource {
    /// Fair seeded word.
    Random,
    /// The all-ones word, a maximally compressible negative control.
    AllOnes,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SalemOptions {
    /// Lower end of the decay fit; the upper end is the top of `grid`.
    pub u_lo: f64,
    pub grid: GridSpec,
    pub word: WordSource,
}

impl Default for SalemOptions {
    fn default() -> Self {
        SalemOptions {
            u_lo: DEFAULT_U_LO,
            grid: GridSpec::Linear {
                lo: DEFAULT_U_LO,
                hi: 2000.0,
                step: 1.0 / 16.0,
            },
            word: WordSource::Random,
        }
    }
}

/// Box, capacity and Fourier estimates side by side.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionReport {
    pub xi: String,
    pub seed: u64,
    pub n: u32,
    pub walk_level: u32,
    pub image_stage: u32,
    pub options: SalemOptions,
    pub target_beta: f64,
    pub target_gamma: f64,
    pub saturated: bool,
    pub box_dim: BoxCount,
    pub capacity: CapacityEstimate,
    /// Achieved decay exponent of the pushout transform.
    pub decay: DecayFit,
    pub decay_rms: Option<DecayFit>,
    /// `min(1, 2 · exponent)`: the dimension implied by the achieved exponent.
    pub fourier_dim: f64,
    pub salem_gap: f64,
    pub fourier_le_box: bool,
    pub valid_u_max: f64,
    pub chain_u_max: f64,
    pub warnings: Vec<String>,
}

/// Fewest image points a report will box-count.
pub const MIN_IMAGE_POINTS: usize = 64;

/// Walk level of a report: at least [`walk_level_for`], raised (up to
/// [`MAX_LADDER_LEVEL`]) until the image sample has [`MIN_IMAGE_POINTS`] points.
pub fn report_walk_level(spec: &CantorSpec, n: u32, u_max: f64) -> u32 {
    let mut level = walk_level_for(n, u_max);
    while level < MAX_LADDER_LEVEL
        && (1usize << spec.coarsest_fit(level).min(40)) < MIN_IMAGE_POINTS
    {
        level += 1;
    }
    level
}

/// Smallest walk level, at least `n`, whose alias-free band `π 2^{m/2} / 2` covers `u_max`.
pub fn walk_level_for(n: u32, u_max: f64) -> u32 {
    let needed = (2.0 * (2.0 * u_max / std::f64::consts::PI).log2())
        .ceil()
        .max(0.0) as u32;
    n.max(needed)
}

/// Ladder ending at `level`, from a sampled word or from the all-ones control.
pub fn walk_ladder(seed: u64, level: u32, word: WordSource) -> Result<RefinementLadder> {
    if level < 2 {
        return Err(Error::InvalidInput(format!(
            "walk level {level} is below 2"
        )));
    }
    let n_min = level.saturating_sub(10).max(1);
    match word {
        WordSource::Random => build_ladder(seed, n_min, level),
        WordSource::AllOnes => RefinementLadder::from_finest(
            WalkPath::from_bits(vec![true; 1usize << level])?,
            n_min,
            seed,
        ),
    }
}

/// Flow, walk, transform, image sample and estimates for one Cantor set.
pub fn salem_report(
    spec: &CantorSpec,
    seed: u64,
    n: u32,
    opts: &SalemOptions,
) -> Result<DimensionReport> {
    let grid = opts.grid.points()?;
    let u_max = grid.last().copied().unwrap_or(0.0);
    let walk_level = report_walk_level(spec, n, u_max);
    if walk_level > MAX_LADDER_LEVEL {
        return Err(Error::Resource(format!(
            "walk level {walk_level} exceeds {MAX_LADDER_LEVEL}"
        )));
    }
    let ladder = walk_ladder(seed, walk_level, opts.word)?;
    let flow = cantor_flow(&spec.with_depth(n))?;
    let run = decay_pipeline(&ladder, &flow, n, &grid, opts.u_lo)?;

    let stage = spec.coarsest_fit(walk_level);
    let points = image_points(ladder.finest(), spec, stage)?;
    let scales = auto_scales(&points, walk_level / 2 - 1);
    let mut warnings = Vec::new();
    let box_dim = box_count(&points, &scales)?;
    warnings.extend(box_dim.warnings.iter().cloned());

    let depths = default_capacity_depths(spec);
    let cap_flow = cantor_flow(&spec.with_depth(*depths.last().expect("five depths")))?;
    let capacity = capacity_dim(&cap_flow, &depths, &default_alpha_grid())?;
    warnings.extend(capacity.warnings.iter().cloned());
    warnings.extend(run.fit.warnings.iter().cloned());
    if spec.saturates() {
        warnings.push("2β > 1: the image dimension saturates at 1".into());
    }

    let fourier_dim = (2.0 * run.fit.exponent).clamp(0.0, 1.0);
    Ok(DimensionReport {
        xi: format!("{}/{}", spec.ratio().numer(), spec.ratio().denom()),
        seed,
        n,
        walk_level,
        image_stage: stage,
        options: opts.clone(),
        target_beta: spec.beta(),
        target_gamma: spec.gamma(),
        saturated: spec.saturates(),
        fourier_dim,
        salem_gap: (fourier_dim - box_dim.dimension).abs(),
        fourier_le_box: fourier_dim <= box_dim.dimension + 0.1,
        box_dim,
        capacity,
        decay: run.fit,
        decay_rms: run.rms_fit,
        valid_u_max: run.valid_u_max,
        chain_u_max: run.chain_u_max,
        warnings,
    })
}
