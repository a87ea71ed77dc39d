use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use super::atomic::{Atom, AtomicMeasure};
use super::cantor::CantorSpec;
use super::index::DyadicIndex;
use super::Rational;
use crate::rng::{rng_for, Stream};
use crate::{Error, Result};

/// Largest depth a flow may be built to.
pub const MAX_FLOW_DEPTH: u32 = 30;

/// Largest tolerated flow-condition violation.
pub const FLOW_TOLERANCE: f64 = 1e-12;

/// Largest number of resolution intervals `cantor_flow` will enumerate.
const MAX_RESOLUTION_INTERVALS: usize = 1 << 22;

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// A measure on `[0, 1]` given by the masses of dyadic intervals.
///
/// Only nonzero masses are stored. Level `d` holds the masses of the cells
/// `I(j, d)` keyed by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeFlowMeasure {
    levels: Vec<BTreeMap<u64, Rational>>,
    exponent: f64,
    constant: f64,
}

impl TreeFlowMeasure {
    /// Build the tree from its finest level by summing children.
    pub fn from_leaves(
        depth: u32,
        leaves: BTreeMap<u64, Rational>,
        exponent: f64,
        constant: f64,
    ) -> Result<Self> {
        check_depth(depth)?;
        let mut levels = vec![leaves];
        for _ in 0..depth {
            let below = levels.last().expect("nonempty");
            let mut above: BTreeMap<u64, Rational> = BTreeMap::new();
            for (&j, m) in below {
                *above.entry(j.div_ceil(2)).or_insert_with(Rational::zero) += *m;
            }
            levels.push(above);
        }
        levels.reverse();
        Self::from_levels(levels, exponent, constant)
    }

    /// Build from explicit per-level masses without enforcing additivity,
    /// so that [`flow_check`] can inspect arbitrary input.
    pub fn from_levels(
        mut levels: Vec<BTreeMap<u64, Rational>>,
        exponent: f64,
        constant: f64,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput(
                "a flow needs at least the root level".into(),
            ));
        }
        check_depth(levels.len() as u32 - 1)?;
        if !(exponent > 0.0 && exponent <= 1.0) || !(constant > 0.0 && constant.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "Frostman exponent {exponent} must lie in (0, 1] and constant {constant} be positive"
            )));
        }
        for (d, level) in levels.iter_mut().enumerate() {
            if let Some((&j, _)) = level.iter().find(|(&j, _)| j == 0 || j > 1u64 << d) {
                return Err(Error::InvalidInput(format!(
                    "cell index {j} out of range at level {d}"
                )));
            }
            if let Some((&j, m)) = level.iter().find(|(_, m)| **m < Rational::zero()) {
                return Err(Error::InvalidInput(format!(
                    "negative mass {m} at ({d}, {j})"
                )));
            }
            level.retain(|_, m| !m.is_zero());
        }
        Ok(TreeFlowMeasure {
            levels,
            exponent,
            constant,
        })
    }

    /// Lebesgue measure, `mass(I) = |I|`, which is a 1-Frostman flow with constant 1.
    pub fn lebesgue(depth: u32) -> Result<Self> {
        if depth > 24 {
            return Err(Error::Resource(format!(
                "dense flow of depth {depth} is too large"
            )));
        }
        let n = 1u64 << depth;
        let leaves = (1..=n).map(|j| (j, Rational::new(1, n as i128))).collect();
        Self::from_leaves(depth, leaves, 1.0, 1.0)
    }

    pub fn max_depth(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn mass(&self, idx: DyadicIndex) -> Result<Rational> {
        let level = self.levels.get(idx.level() as usize).ok_or_else(|| {
            Error::Domain(format!(
                "level {} deeper than flow depth {}",
                idx.level(),
                self.max_depth()
            ))
        })?;
        Ok(level.get(&idx.j()).copied().unwrap_or_else(Rational::zero))
    }

    pub fn root_mass(&self) -> Rational {
        self.levels[0]
            .get(&1)
            .copied()
            .unwrap_or_else(Rational::zero)
    }

    /// Copy with one stored mass replaced; used to inject faults.
    pub fn with_mass(&self, idx: DyadicIndex, mass: Rational) -> Result<Self> {
        self.mass(idx)?;
        let mut levels = self.levels.clone();
        levels[idx.level() as usize].insert(idx.j(), mass);
        Self::from_levels(levels, self.exponent, self.constant)
    }

    /// Nonzero masses of level `d`, in index order.
    pub fn level(&self, d: u32) -> Option<&BTreeMap<u64, Rational>> {
        self.levels.get(d as usize)
    }

    /// Mass of the union of level-`d` cells `jlo..=jhi`.
    pub fn range_mass(&self, d: u32, jlo: u64, jhi: u64) -> Rational {
        self.levels
            .get(d as usize)
            .map(|l| l.range(jlo..=jhi).map(|(_, m)| *m).sum())
            .unwrap_or_else(Rational::zero)
    }

    /// Line-oriented text form: a header, then `<n> <j> <num>/<den>` per stored cell.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# flow α={} C={} depth={}\n",
            self.exponent,
            self.constant,
            self.max_depth()
        );
        for (d, level) in self.levels.iter().enumerate() {
            for (j, m) in level {
                writeln!(out, "{d} {j} {}/{}", m.numer(), m.denom()).expect("string write");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty flow text".into()))?;
        let fields: BTreeMap<&str, &str> = header
            .strip_prefix("# flow")
            .ok_or_else(|| Error::Parse("missing '# flow' header".into()))?
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let get = |k: &str| -> Result<&str> {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("header lacks {k}=")))
        };
        let float = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|e| Error::Parse(format!("{k}: {e}")))
        };
        let exponent = float("α")?;
        let constant = float("C")?;
        let depth: u32 = get("depth")?
            .parse()
            .map_err(|e| Error::Parse(format!("depth: {e}")))?;
        check_depth(depth)?;
        let mut levels = vec![BTreeMap::new(); depth as usize + 1];
        for (i, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: expected '<n> <j> <num>/<den>'", i + 2));
            let mut parts = line.split_whitespace();
            let d: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let j: u64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let m = parts.next().ok_or_else(bad)?;
            let m = CantorSpec::parse_ratio(m)?;
            levels.get_mut(d).ok_or_else(bad)?.insert(j, m);
        }
        Self::from_levels(levels, exponent, constant)
    }
}

fn check_depth(depth: u32) -> Result<()> {
    if depth > MAX_FLOW_DEPTH {
        return Err(Error::Resource(format!(
            "flow depth {depth} exceeds {MAX_FLOW_DEPTH}"
        )));
    }
    Ok(())
}

/// The natural measure of `C_ξ` as a flow down to `spec.depth()`.
///
/// Masses are counted exactly at the first construction stage `m` whose
/// intervals are shorter than the finest cells: each stage-`m` interval puts
/// mass `2^-m` into the cell holding its midpoint.
pub fn cantor_flow(spec: &CantorSpec) -> Result<TreeFlowMeasure> {
    let depth = spec.depth();
    check_depth(depth)?;
    let m = spec.resolution_for(depth);
    if m >= usize::BITS || (1usize << m) > MAX_RESOLUTION_INTERVALS {
        return Err(Error::Resource(format!(
            "depth {depth} needs construction stage {m}, beyond the budget of {MAX_RESOLUTION_INTERVALS} intervals"
        )));
    }
    let survivors = spec.survivors(m)?;
    let unit = Rational::new(1, 1i128 << m);
    let mut leaves: BTreeMap<u64, Rational> = BTreeMap::new();
    for i in 0..survivors.len() {
        *leaves
            .entry(survivors.midpoint_cell(i, depth))
            .or_insert_with(Rational::zero) += unit;
    }
    TreeFlowMeasure::from_leaves(depth, leaves, spec.beta(), 1.0)
}

/// Outcome of [`flow_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    pub max_violation: f64,
    pub worst: Option<DyadicIndex>,
    pub vertices_checked: usize,
    pub root_mass: f64,
    pub passed: bool,
}

/// Check `mass(parent) = mass(left) + mass(right)` at every internal vertex
/// and that the root mass is at most 1.
pub fn flow_check(flow: &TreeFlowMeasure) -> FlowReport {
    let mut max_violation = 0.0;
    let mut worst = None;
    let mut checked = 0usize;
    for d in 0..flow.max_depth() {
        let parents = &flow.levels[d as usize];
        let children = &flow.levels[d as usize + 1];
        let mut sums: BTreeMap<u64, Rational> = BTreeMap::new();
        for (&j, m) in children {
            *sums.entry(j.div_ceil(2)).or_insert_with(Rational::zero) += *m;
        }
        let keys: std::collections::BTreeSet<u64> =
            parents.keys().chain(sums.keys()).copied().collect();
        for j in keys {
            checked += 1;
            let p = parents.get(&j).copied().unwrap_or_else(Rational::zero);
            let s = sums.get(&j).copied().unwrap_or_else(Rational::zero);
            let v = to_f64(&(p - s)).abs();
            if v > max_violation {
                max_violation = v;
                worst = DyadicIndex::new(d, j).ok();
            }
        }
    }
    let root = flow.root_mass();
    FlowReport {
        max_violation,
        worst,
        vertices_checked: checked,
        root_mass: to_f64(&root),
        passed: max_violation <= FLOW_TOLERANCE && root <= Rational::one(),
    }
}

/// Outcome of [`frostman_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrostmanReport {
    pub alpha: f64,
    pub constant: f64,
    /// Largest `mass(I) / (C |I|^α)` over stored dyadic cells.
    pub dyadic_worst_ratio: f64,
    pub dyadic_worst: Option<DyadicIndex>,
    /// Largest `mass(I) / (3 C |I|^α)` over sampled general intervals.
    pub general_worst_ratio: f64,
    pub general_worst: Option<(f64, f64)>,
    pub samples: usize,
    pub passed: bool,
}

/// Verify the mass distribution bound on every stored dyadic cell and on
/// `samples` random intervals.
///
/// Sampled lengths are log-uniform between the finest cell and 1. A general
/// interval is charged the mass of every finest cell it meets, which can only
/// overstate its mass.
pub fn frostman_check(
    flow: &TreeFlowMeasure,
    alpha: f64,
    constant: f64,
    samples: usize,
    seed: u64,
) -> FrostmanReport {
    let mut dyadic_worst_ratio = 0.0;
    let mut dyadic_worst = None;
    for (d, level) in flow.levels.iter().enumerate() {
        let bound = constant * (-(d as f64) * alpha).exp2();
        for (&j, m) in level {
            let r = to_f64(m) / bound;
            if r > dyadic_worst_ratio {
                dyadic_worst_ratio = r;
                dyadic_worst = DyadicIndex::new(d as u32, j).ok();
            }
        }
    }

    let depth = flow.max_depth();
    let cells = (1u64 << depth) as f64;
    let mut rng = rng_for(seed, Stream::Intervals);
    let mut general_worst_ratio = 0.0;
    let mut general_worst = None;
    for _ in 0..samples {
        let len = (rng.random::<f64>() * depth as f64 * -std::f64::consts::LN_2).exp();
        let lo = rng.random::<f64>() * (1.0 - len);
        let hi = (lo + len).min(1.0);
        let jlo = ((lo * cells).floor() as u64 + 1).min(1u64 << depth);
        let jhi = ((hi * cells).ceil() as u64).clamp(jlo, 1u64 << depth);
        let mass = to_f64(&flow.range_mass(depth, jlo, jhi));
        let r = mass / (3.0 * constant * (hi - lo).powf(alpha));
        if r > general_worst_ratio {
            general_worst_ratio = r;
            general_worst = Some((lo, hi));
        }
    }
    let slack = 1.0 + FLOW_TOLERANCE;
    FrostmanReport {
        alpha,
        constant,
        dyadic_worst_ratio,
        dyadic_worst,
        general_worst_ratio,
        general_worst,
        samples,
        passed: dyadic_worst_ratio <= slack && general_worst_ratio <= slack,
    }
}

/// Outcome of [`hull_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullReport {
    pub stages: u32,
    pub survivors: usize,
    /// Survivors whose dyadic hull carries exactly `2^-k = |J|^β`.
    pub exact: usize,
    /// Survivors whose cover by finest cells carries exactly `2^-k`.
    pub cover_exact: usize,
    /// Largest `|mass(cover) / 2^-k - 1|`.
    pub max_cover_error: f64,
    /// Smallest `mass(hull) / 2^-k`; at least 1 when hulls hold their survivor.
    pub min_hull_over_survivor: f64,
    /// Largest `mass(hull) / |hull|^β`.
    pub max_hull_ratio: f64,
    /// Largest `| |J|^β - 2^-k |` over survivors `J`.
    pub survivor_power_error: f64,
}

impl HullReport {
    pub fn all_exact(&self) -> bool {
        self.exact == self.survivors
    }

    pub fn all_covers_exact(&self) -> bool {
        self.cover_exact == self.survivors
    }
}

/// Compare the flow mass of the dyadic hull of every stage-`k` survivor with
/// `2^-k` and with `|hull|^β`, for every stage whose intervals are no shorter
/// than the finest cell. The hull is the smallest dyadic interval containing
/// the survivor; the cover is the union of finest cells meeting it.
pub fn hull_check(flow: &TreeFlowMeasure, spec: &CantorSpec) -> Result<HullReport> {
    let depth = flow.max_depth();
    let beta = spec.beta();
    let stages = spec.coarsest_fit(depth);
    let mut report = HullReport {
        stages,
        survivors: 0,
        exact: 0,
        cover_exact: 0,
        max_cover_error: 0.0,
        min_hull_over_survivor: f64::INFINITY,
        max_hull_ratio: 0.0,
        survivor_power_error: 0.0,
    };
    for k in 0..=stages {
        let sv = spec.survivors(k)?;
        let target = Rational::new(1, 1i128 << k);
        let power = sv.length_f64().powf(beta);
        report.survivor_power_error = report
            .survivor_power_error
            .max((power - to_f64(&target)).abs());
        for i in 0..sv.len() {
            let hull = sv.closed_hull(i, depth);
            let mass = flow.mass(hull)?;
            report.survivors += 1;
            let hull_power = hull.length().powf(beta);
            if mass == target && (hull_power - to_f64(&target)).abs() <= 1e-12 {
                report.exact += 1;
            }
            let (first, last) = sv.cover_cells(i, depth);
            let cover = flow.range_mass(depth, first, last);
            if cover == target {
                report.cover_exact += 1;
            }
            report.max_cover_error = report
                .max_cover_error
                .max((to_f64(&(cover / target)) - 1.0).abs());
            report.min_hull_over_survivor = report
                .min_hull_over_survivor
                .min(to_f64(&mass) / to_f64(&target));
            report.max_hull_ratio = report.max_hull_ratio.max(to_f64(&mass) / hull_power);
        }
    }
    Ok(report)
}

/// The atomic measure `Σ_j mass(I(j, n)) δ_{j/2^n}`; cells of zero mass are omitted.
pub fn n_approximation(flow: &TreeFlowMeasure, n: u32) -> Result<AtomicMeasure> {
    let level = flow
        .level(n)
        .ok_or_else(|| Error::Domain(format!("n = {n} exceeds flow depth {}", flow.max_depth())))?;
    let cells = (1u64 << n) as f64;
    let atoms = level
        .iter()
        .map(|(&j, m)| Atom {
            position: j as f64 / cells,
            weight: to_f64(m),
        })
        .collect();
    AtomicMeasure::with_total(atoms, to_f64(&flow.root_mass()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Interval;

    fn spec(p: i128, q: i128, depth: u32) -> CantorSpec {
        CantorSpec::new(Rational::new(p, q), depth).unwrap()
    }

    fn idx(level: u32, j: u64) -> DyadicIndex {
        DyadicIndex::new(level, j).unwrap()
    }

    #[test]
    fn quarter_flow_masses() {
        let f = cantor_flow(&spec(1, 4, 6)).unwrap();
        assert_eq!(f.mass(idx(2, 1)).unwrap(), Rational::new(1, 2));
        assert_eq!(f.root_mass(), Rational::one());
        assert_eq!(f.mass(idx(4, 2)).unwrap(), Rational::zero());
    }

    #[test]
    fn third_flow_gap_is_empty() {
        let f = cantor_flow(&spec(1, 3, 8)).unwrap();
        // I(3, 3) = [1/3 + 1/24, 1/2) lies inside the removed middle third
        assert_eq!(f.mass(idx(3, 4)).unwrap(), Rational::zero());
        assert_eq!(f.mass(idx(1, 1)).unwrap(), Rational::new(1, 2));
        let r = flow_check(&f);
        assert_eq!(r.max_violation, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn injected_fault_is_reported() {
        let f = cantor_flow(&spec(1, 3, 8)).unwrap();
        let target = idx(5, 1);
        let m = f.mass(target).unwrap() + Rational::new(1, 1_000_000);
        let bad = f.with_mass(target, m).unwrap();
        let r = flow_check(&bad);
        assert!(!r.passed);
        assert!((r.max_violation - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn lebesgue_is_a_flow() {
        let f = TreeFlowMeasure::lebesgue(10).unwrap();
        assert!(flow_check(&f).passed);
        let r = frostman_check(&f, 1.0, 1.0, 200, 1);
        assert_eq!(r.dyadic_worst_ratio, 1.0);
        assert!(r.passed);
    }

    #[test]
    fn frostman_on_third() {
        // equality holds on survivors, but a cell straddling two small survivors
        // can exceed |I|^β by a bounded factor
        let s = spec(1, 3, 10);
        let f = cantor_flow(&s).unwrap();
        let r = frostman_check(&f, s.beta(), 1.0, 1000, 3);
        assert!(
            r.dyadic_worst_ratio >= 1.0 && r.dyadic_worst_ratio < 1.5,
            "{r:?}"
        );
        assert!(r.general_worst_ratio <= 1.0, "{r:?}");
        let r = frostman_check(&f, s.beta(), 1.5, 1000, 3);
        assert!(r.passed);
    }

    #[test]
    fn frostman_fails_above_dimension() {
        let f = cantor_flow(&spec(1, 4, 14)).unwrap();
        let r = frostman_check(&f, 0.6, 1.0, 100, 3);
        assert!(!r.passed);
        assert!(r.dyadic_worst_ratio > 2.0);
    }

    #[test]
    fn approximations() {
        let leb = n_approximation(&TreeFlowMeasure::lebesgue(4).unwrap(), 2).unwrap();
        let pos: Vec<f64> = leb.positions().collect();
        assert_eq!(pos, vec![0.25, 0.5, 0.75, 1.0]);
        assert!(leb.weights().all(|w| w == 0.25));

        let c = n_approximation(&cantor_flow(&spec(1, 3, 6)).unwrap(), 1).unwrap();
        assert_eq!(
            c.atoms(),
            &[
                Atom {
                    position: 0.5,
                    weight: 0.5
                },
                Atom {
                    position: 1.0,
                    weight: 0.5
                }
            ]
        );

        let z = n_approximation(&cantor_flow(&spec(2, 7, 6)).unwrap(), 0).unwrap();
        assert_eq!(
            z.atoms(),
            &[Atom {
                position: 1.0,
                weight: 1.0
            }]
        );
        assert_eq!(z.total_mass(), 1.0);

        assert!(n_approximation(&cantor_flow(&spec(1, 3, 6)).unwrap(), 7).is_err());
    }

    #[test]
    fn small_intervals_bounded() {
        let s = spec(1, 4, 12);
        let f = cantor_flow(&s).unwrap();
        let theta = n_approximation(&f, 8).unwrap();
        let step = 1.0 / 256.0;
        for k in 0..2000 {
            let lo = k as f64 / 2000.0 * (1.0 - step);
            let m = theta.interval_mass(&Interval::new(lo, lo + 0.999 * step).unwrap());
            assert!(m <= step.powf(s.beta()) + 1e-15);
        }
    }

    #[test]
    fn hulls() {
        let f = cantor_flow(&spec(1, 4, 14)).unwrap();
        let r = hull_check(&f, &spec(1, 4, 14)).unwrap();
        assert!(r.all_exact() && r.all_covers_exact(), "{r:?}");
        let s = spec(1, 3, 14);
        let r = hull_check(&cantor_flow(&s).unwrap(), &s).unwrap();
        assert!(r.all_covers_exact(), "{r:?}");
        assert!(r.exact < r.survivors);
        assert!(r.min_hull_over_survivor >= 1.0);
        assert!(r.max_hull_ratio <= 1.0 + 1e-12, "{r:?}");
    }

    #[test]
    fn text_round_trip() {
        let f = cantor_flow(&spec(1, 3, 5)).unwrap();
        let text = f.to_text();
        assert!(text.starts_with("# flow α="));
        let back = TreeFlowMeasure::from_text(&text).unwrap();
        assert_eq!(back.levels, f.levels);
        assert_eq!(back.max_depth(), 5);
    }

    #[test]
    fn resource_limits() {
        assert!(matches!(
            cantor_flow(&spec(1, 3, 31)),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            cantor_flow(&spec(2, 5, 30)),
            Err(Error::Resource(_))
        ));
    }
}
