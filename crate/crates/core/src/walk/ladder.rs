use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::path::{sample_word, WalkPath};
use crate::rng::{rng_for, Stream};
use crate::{Error, Result};

/// Deepest level a ladder may reach (`2^24` steps).
pub const MAX_LADDER_LEVEL: u32 = 24;

/// Identifier written into manifests.
pub const COUPLING_RULE: &str = "top-down-greedy-tracking/v1";

/// Walks at consecutive dyadic levels, coupled so that each level tracks the
/// next finer one.
///
/// The finest level is a fair word. Each coarser level takes, on every coarse
/// step, the sign that keeps its grid value closest to the finer walk at the
/// same time; exact ties are broken by a seeded coin.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementLadder {
    seed: u64,
    n_min: u32,
    levels: Vec<WalkPath>,
    distances: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    n_min: u32,
    n_max: u32,
    coupling: String,
    distances: Vec<f64>,
}

impl RefinementLadder {
    /// Coarsen a given finest word down to level `n_min`.
    pub fn from_finest(finest: WalkPath, n_min: u32, seed: u64) -> Result<Self> {
        let n_max = finest.level().ok_or_else(|| {
            Error::InvalidInput("finest word length must be a power of two".into())
        })?;
        if n_min >= n_max {
            return Err(Error::InvalidInput(format!(
                "need n_min < n_max, got {n_min} >= {n_max}"
            )));
        }
        if n_max > MAX_LADDER_LEVEL {
            return Err(Error::Resource(format!(
                "ladder level {n_max} exceeds {MAX_LADDER_LEVEL}"
            )));
        }
        let mut rng = rng_for(seed, Stream::Ladder);
        let mut levels = vec![finest];
        for _ in n_min..n_max {
            let fine = levels.last().expect("nonempty");
            let target = fine.partial_sums();
            let m = fine.len() / 2;
            let mut bits = Vec::with_capacity(m);
            let mut q = 0i64;
            for j in 1..=m {
                // coarse value Q/√M should follow fine value P(2j)/√(2M)
                let t = target[2 * j] as f64 / std::f64::consts::SQRT_2;
                let (up, down) = (((q + 1) as f64 - t).abs(), ((q - 1) as f64 - t).abs());
                let step_up = if up == down {
                    rng.random::<bool>()
                } else {
                    up < down
                };
                q += if step_up { 1 } else { -1 };
                bits.push(step_up);
            }
            levels.push(WalkPath::from_bits(bits)?);
        }
        levels.reverse();
        let distances = levels
            .windows(2)
            .map(|w| sup_distance(&w[0], &w[1]))
            .collect();
        Ok(RefinementLadder {
            seed,
            n_min,
            levels,
            distances,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_min(&self) -> u32 {
        self.n_min
    }

    pub fn n_max(&self) -> u32 {
        self.n_min + self.levels.len() as u32 - 1
    }

    pub fn level(&self, n: u32) -> Option<&WalkPath> {
        n.checked_sub(self.n_min)
            .and_then(|i| self.levels.get(i as usize))
    }

    pub fn finest(&self) -> &WalkPath {
        self.levels.last().expect("nonempty")
    }

    pub fn levels(&self) -> &[WalkPath] {
        &self.levels
    }

    /// `‖x_{n+1} - x_n‖_∞` for `n = n_min .. n_max - 1`.
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Write `manifest.json` and one `level-<n>.hex` file per level.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            seed: self.seed,
            n_min: self.n_min,
            n_max: self.n_max(),
            coupling: COUPLING_RULE.to_string(),
            distances: self.distances.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        fs::write(dir.join("manifest.json"), json + "\n")?;
        for (i, p) in self.levels.iter().enumerate() {
            fs::write(
                dir.join(format!("level-{}.hex", self.n_min + i as u32)),
                p.to_hex(),
            )?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let io = |e: std::io::Error| Error::Parse(format!("{}: {e}", dir.display()));
        let text = fs::read_to_string(dir.join("manifest.json")).map_err(io)?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
        let levels = (manifest.n_min..=manifest.n_max)
            .map(|n| {
                let text = fs::read_to_string(dir.join(format!("level-{n}.hex"))).map_err(io)?;
                WalkPath::from_hex(&text)
            })
            .collect::<Result<Vec<_>>>()?;
        let distances = levels
            .windows(2)
            .map(|w| sup_distance(&w[0], &w[1]))
            .collect();
        Ok(RefinementLadder {
            seed: manifest.seed,
            n_min: manifest.n_min,
            levels,
            distances,
        })
    }
}

/// Build a ladder whose finest level is `sample_word(2^n_max, seed)`.
pub fn build_ladder(seed: u64, n_min: u32, n_max: u32) -> Result<RefinementLadder> {
    if n_max > MAX_LADDER_LEVEL {
        return Err(Error::Resource(format!(
            "ladder level {n_max} exceeds {MAX_LADDER_LEVEL}"
        )));
    }
    if n_min >= n_max {
        return Err(Error::InvalidInput(format!(
            "need n_min < n_max, got {n_min} >= {n_max}"
        )));
    }
    let finest = WalkPath::from_bits(sample_word(1usize << n_max, seed))?;
    RefinementLadder::from_finest(finest, n_min, seed)
}

/// Exact sup distance between a walk and one twice as fine; both are linear
/// between points of the finer grid.
fn sup_distance(coarse: &WalkPath, fine: &WalkPath) -> f64 {
    let (pc, pf) = (coarse.partial_sums(), fine.partial_sums());
    let (sc, sf) = (coarse.scale(), fine.scale());
    (0..pf.len())
        .map(|i| {
            let c = if i % 2 == 0 {
                pc[i / 2] as f64
            } else {
                0.5 * (pc[i / 2] + pc[i / 2 + 1]) as f64
            };
            (c / sc - pf[i] as f64 / sf).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = build_ladder(9, 4, 12).unwrap();
        let b = build_ladder(9, 4, 12).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.levels().len(), 9);
        assert_eq!(a.level(12).unwrap().len(), 4096);
        assert_eq!(a.finest().bits(), &sample_word(4096, 9)[..]);
    }

    #[test]
    fn consecutive_distances_shrink() {
        let l = build_ladder(2024, 8, 18).unwrap();
        for (i, d) in l.distances().iter().enumerate() {
            let n = (8 + i) as f64;
            assert!(*d <= 4.0 * (n / n.exp2()).sqrt(), "level {n}: {d}");
        }
    }

    #[test]
    fn grid_values_are_cauchy() {
        let l = build_ladder(77, 8, 18).unwrap();
        let base = l.level(8).unwrap().len();
        for n in 9..=18u32 {
            let (a, b) = (l.level(n - 1).unwrap(), l.level(n).unwrap());
            let (sa, sb) = (a.len() / base, b.len() / base);
            let tol = 10.0 * (n as f64 / (n as f64).exp2()).sqrt();
            for j in 0..=base {
                assert!((a.grid_value(j * sa) - b.grid_value(j * sb)).abs() <= tol);
            }
        }
    }

    #[test]
    fn round_trip_through_directory() {
        let l = build_ladder(3, 2, 8).unwrap();
        let dir = std::env::temp_dir().join(format!("salem-ladder-{}", std::process::id()));
        l.write_dir(&dir).unwrap();
        let back = RefinementLadder::read_dir(&dir).unwrap();
        fs::remove_dir_all(&dir).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn limits() {
        assert!(matches!(build_ladder(1, 4, 25), Err(Error::Resource(_))));
        assert!(build_ladder(1, 6, 6).is_err());
    }
}
