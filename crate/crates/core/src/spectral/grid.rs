use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::{Error, Result};

/// Frequency grids.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// `lo, lo + step, ...` up to `hi`.
    Linear { lo: f64, hi: f64, step: f64 },
    /// `per_octave` log-spaced points per doubling from `lo` to `hi`.
    LogUniform { lo: f64, hi: f64, per_octave: u32 },
    /// For each integer `n` in `[lo, hi)`, the points `n + r/n`, `r = 0..n`, then `hi`.
    Thm42 { lo: u32, hi: u32 },
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        match *self {
            GridSpec::Linear { lo, hi, step } => {
                if !(lo >= 0.0 && hi >= lo && step > 0.0) || !hi.is_finite() {
                    return bad(format!("bad linear grid {lo}..{hi} step {step}"));
                }
                let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|i| lo + i as f64 * step).collect())
            }
            GridSpec::LogUniform { lo, hi, per_octave } => {
                if !(lo > 0.0 && hi >= lo && per_octave > 0) || !hi.is_finite() {
                    return bad(format!("bad log grid {lo}..{hi} with {per_octave}/octave"));
                }
                let steps = ((hi / lo).log2() * per_octave as f64 + 1e-9).floor() as usize;
                Ok((0..=steps)
                    .map(|i| lo * (i as f64 / per_octave as f64).exp2())
                    .collect())
            }
            GridSpec::Thm42 { lo, hi } => {
                if lo == 0 || hi < lo {
                    return bad(format!("bad thm42 grid {lo}..{hi}"));
                }
                let mut pts: Vec<f64> = (lo..hi)
                    .flat_map(|n| (0..n).map(move |r| n as f64 + r as f64 / n as f64))
                    .collect();
                pts.push(hi as f64);
                Ok(pts)
            }
        }
    }

    pub fn hi(&self) -> f64 {
        match *self {
            GridSpec::Linear { hi, .. } | GridSpec::LogUniform { hi, .. } => hi,
            GridSpec::Thm42 { hi, .. } => hi as f64,
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Linear { lo, hi, step } => write!(f, "range:{lo}:{hi}:{step}"),
            GridSpec::LogUniform { lo, hi, per_octave } => write!(f, "log:{lo}:{hi}:{per_octave}"),
            GridSpec::Thm42 { lo, hi } => write!(f, "thm42:{lo}:{hi}"),
        }
    }
}

/// `range:LO:HI:STEP`, `log:LO:HI:PER_OCTAVE` or `thm42:LO:HI`.
impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("grid '{s}' is missing field {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("grid '{s}': {e}")))
        };
        let int = |i: usize| -> Result<u32> {
            let v = num(i)?;
            if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
                return Err(Error::Parse(format!(
                    "grid '{s}': field {i} must be a nonnegative integer"
                )));
            }
            Ok(v as u32)
        };
        let expect = |k: usize| -> Result<()> {
            if parts.len() != k {
                return Err(Error::Parse(format!("grid '{s}' needs {} fields", k - 1)));
            }
            Ok(())
        };
        let spec = match parts[0] {
            "range" => {
                expect(4)?;
                GridSpec::Linear {
                    lo: num(1)?,
                    hi: num(2)?,
                    step: num(3)?,
                }
            }
            "log" => {
                expect(4)?;
                GridSpec::LogUniform {
                    lo: num(1)?,
                    hi: num(2)?,
                    per_octave: int(3)?,
                }
            }
            "thm42" => {
                expect(3)?;
                GridSpec::Thm42 {
                    lo: int(1)?,
                    hi: int(2)?,
                }
            }
            other => return Err(Error::Parse(format!("unknown grid kind '{other}'"))),
        };
        spec.points()?;
        Ok(spec)
    }
}
