use serde::{Deserialize, Serialize};

use super::Rational;
use crate::{Error, Result};

/// The interval `I_{j,n} = [(j-1)/2^n, j/2^n)`, closed at the right when it
/// ends at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicIndex {
    level: u32,
    j: u64,
}

impl DyadicIndex {
    pub const MAX_LEVEL: u32 = 62;

    pub fn new(level: u32, j: u64) -> Result<Self> {
        if level > Self::MAX_LEVEL {
            return Err(Error::Resource(format!(
                "dyadic level {level} exceeds {}",
                Self::MAX_LEVEL
            )));
        }
        if j == 0 || j > 1u64 << level {
            return Err(Error::InvalidInput(format!(
                "index j = {j} outside [1, 2^{level}]"
            )));
        }
        Ok(DyadicIndex { level, j })
    }

    pub fn root() -> Self {
        DyadicIndex { level: 0, j: 1 }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn j(&self) -> u64 {
        self.j
    }

    pub fn cells(&self) -> u64 {
        1u64 << self.level
    }

    pub fn is_last(&self) -> bool {
        self.j == self.cells()
    }

    pub fn length(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn left(&self) -> f64 {
        (self.j - 1) as f64 * self.length()
    }

    pub fn right(&self) -> f64 {
        self.j as f64 * self.length()
    }

    pub fn bounds_exact(&self) -> (Rational, Rational) {
        let den = 1i128 << self.level;
        (
            Rational::new(self.j as i128 - 1, den),
            Rational::new(self.j as i128, den),
        )
    }

    pub fn contains(&self, x: f64) -> bool {
        let (l, r) = (self.left(), self.right());
        x >= l && (x < r || (self.is_last() && x == r))
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| DyadicIndex {
            level: self.level - 1,
            j: self.j.div_ceil(2),
        })
    }

    pub fn children(&self) -> [Self; 2] {
        let level = self.level + 1;
        [
            DyadicIndex {
                level,
                j: 2 * self.j - 1,
            },
            DyadicIndex {
                level,
                j: 2 * self.j,
            },
        ]
    }

    /// The level-`level` cell containing `x`, using the half-open convention.
    pub fn containing(level: u32, x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("{x} is outside [0, 1]")));
        }
        if level > Self::MAX_LEVEL {
            return Err(Error::Resource(format!("dyadic level {level} too deep")));
        }
        let cells = 1u64 << level;
        let j = ((x * cells as f64).floor() as u64 + 1).min(cells);
        Ok(DyadicIndex { level, j })
    }
}

impl std::fmt::Display for DyadicIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "I({}, {})", self.j, self.level)
    }
}

/// Three dyadic intervals of a common length `l` with `|I|/2 < l <= |I|` whose
/// union contains the closed interval `[lo, hi]`.
///
/// When the level has fewer than three cells (only for `|I| >= 1/2`) cells are
/// repeated.
pub fn three_cover(lo: f64, hi: f64) -> Result<[DyadicIndex; 3]> {
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > 1.0 {
        return Err(Error::Domain(format!("[{lo}, {hi}] is not inside [0, 1]")));
    }
    if hi <= lo {
        return Err(Error::InvalidInput(format!(
            "degenerate interval [{lo}, {hi}]"
        )));
    }
    let len = hi - lo;
    let mut level = 0u32;
    while (-(level as f64)).exp2() > len {
        level += 1;
        if level > DyadicIndex::MAX_LEVEL {
            return Err(Error::Resource(format!(
                "interval of length {len} too short"
            )));
        }
    }
    let first = DyadicIndex::containing(level, lo)?;
    let last = DyadicIndex::containing(level, hi)?;
    let cells = 1u64 << level;
    let mut js: Vec<u64> = (first.j..=last.j).collect();
    debug_assert!(js.len() <= 3);
    while js.len() < 3 {
        let max = *js.last().unwrap();
        let min = js[0];
        if max < cells {
            js.push(max + 1);
        } else if min > 1 {
            js.insert(0, min - 1);
        } else {
            js.push(max);
        }
    }
    Ok([
        DyadicIndex { level, j: js[0] },
        DyadicIndex { level, j: js[1] },
        DyadicIndex { level, j: js[2] },
    ])
}
