use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{DyadicIndex, Rational};
use crate::{Error, Result};

/// Deepest construction stage we are willing to enumerate (`2^22` intervals).
pub const MAX_SURVIVOR_LEVEL: u32 = 22;

/// A middle-interval Cantor set `C_ξ` truncated at a construction depth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CantorSpec {
    #[serde(with = "ratio_string")]
    ratio: Rational,
    depth: u32,
}

mod ratio_string {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        super::CantorSpec::parse_ratio(&s).map_err(serde::de::Error::custom)
    }
}

impl CantorSpec {
    pub fn new(ratio: Rational, depth: u32) -> Result<Self> {
        let half = Rational::new(1, 2);
        if ratio <= Rational::zero() || ratio >= half {
            return Err(Error::InvalidSpec(format!(
                "ratio {ratio} must lie strictly between 0 and 1/2"
            )));
        }
        // ratios closer to 1/2 than 1e-6 are degenerate: the set fills the interval
        if ratio > half - Rational::new(1, 1_000_000) {
            return Err(Error::InvalidSpec(format!(
                "ratio {ratio} is within 1e-6 of 1/2"
            )));
        }
        Ok(CantorSpec { ratio, depth })
    }

    /// Parse `"p/q"` (or a bare integer, which is always rejected by [`CantorSpec::new`]).
    pub fn parse_ratio(s: &str) -> Result<Rational> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<i128>()
                .map_err(|e| Error::Parse(format!("bad rational '{s}': {e}")))
        };
        match s.split_once('/') {
            Some((p, q)) => {
                let (p, q) = (parse(p)?, parse(q)?);
                if q == 0 {
                    return Err(Error::Parse(format!("zero denominator in '{s}'")));
                }
                Ok(Rational::new(p, q))
            }
            None => Ok(Rational::from_integer(parse(s)?)),
        }
    }

    pub fn ratio(&self) -> Rational {
        self.ratio
    }

    pub fn ratio_f64(&self) -> f64 {
        *self.ratio.numer() as f64 / *self.ratio.denom() as f64
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn with_depth(&self, depth: u32) -> Self {
        CantorSpec {
            ratio: self.ratio,
            depth,
        }
    }

    /// Hausdorff dimension `log 2 / log(1/ξ)`.
    pub fn beta(&self) -> f64 {
        let (p, q) = (*self.ratio.numer() as f64, *self.ratio.denom() as f64);
        std::f64::consts::LN_2 / (q.ln() - p.ln())
    }

    /// Dimension of the walk image, `min(1, 2β)`.
    pub fn gamma(&self) -> f64 {
        (2.0 * self.beta()).min(1.0)
    }

    /// True when `2β > 1`, i.e. the image dimension saturates at 1.
    pub fn saturates(&self) -> bool {
        2.0 * self.beta() > 1.0
    }

    /// Smallest stage `m` whose intervals are strictly shorter than `2^-depth`.
    pub fn resolution_for(&self, depth: u32) -> u32 {
        let p = BigInt::from(*self.ratio.numer());
        let q = BigInt::from(*self.ratio.denom());
        let cell = BigInt::one() << depth as usize;
        let mut m = 0u32;
        let (mut pm, mut qm) = (BigInt::one(), BigInt::one());
        // ξ^m < 2^-depth  <=>  p^m 2^depth < q^m
        while &pm * &cell >= qm {
            m += 1;
            pm *= &p;
            qm *= &q;
        }
        m
    }

    /// Largest stage `m` whose intervals are at least `2^-level` long.
    pub fn coarsest_fit(&self, level: u32) -> u32 {
        self.resolution_for(level).saturating_sub(1)
    }

    pub fn survivors(&self, level: u32) -> Result<Survivors> {
        Survivors::build(self.ratio, level)
    }
}

/// The `2^m` intervals of the `m`-th construction stage, stored as integer
/// numerators over the common denominator `q^m`.
#[derive(Debug, Clone)]
pub struct Survivors {
    level: u32,
    denom: BigInt,
    len_num: BigInt,
    lefts: Vec<BigInt>,
}

impl Survivors {
    fn build(ratio: Rational, level: u32) -> Result<Self> {
        if level > MAX_SURVIVOR_LEVEL {
            return Err(Error::Resource(format!(
                "construction stage {level} exceeds {MAX_SURVIVOR_LEVEL} (2^{level} intervals)"
            )));
        }
        let p = BigInt::from(*ratio.numer());
        let q = BigInt::from(*ratio.denom());
        let pow = |b: &BigInt, e: u32| num_traits::pow(b.clone(), e as usize);
        let denom = pow(&q, level);
        let len_num = pow(&p, level);
        let mut lefts = vec![BigInt::zero()];
        lefts.reserve(1usize << level);
        for i in 1..=level {
            // shift of the right child: ξ^{i-1}(1 - ξ), scaled by q^level
            let shift = pow(&p, i - 1) * pow(&q, level - i) * (&q - &p);
            let next: Vec<BigInt> = lefts.iter().flat_map(|a| [a.clone(), a + &shift]).collect();
            lefts = next;
        }
        Ok(Survivors {
            level,
            denom,
            len_num,
            lefts,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.lefts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lefts.is_empty()
    }

    pub fn interval(&self, i: usize) -> ClosedInterval {
        let lo = BigRational::new(self.lefts[i].clone(), self.denom.clone());
        let hi = BigRational::new(&self.lefts[i] + &self.len_num, self.denom.clone());
        ClosedInterval { lo, hi }
    }

    pub fn intervals(&self) -> Vec<ClosedInterval> {
        (0..self.len()).map(|i| self.interval(i)).collect()
    }

    /// Length `ξ^m` as a float.
    pub fn length_f64(&self) -> f64 {
        ratio_to_f64(&self.len_num, &self.denom)
    }

    pub fn midpoint_f64(&self, i: usize) -> f64 {
        let num = &self.lefts[i] * 2 + &self.len_num;
        ratio_to_f64(&num, &(&self.denom * 2))
    }

    /// 1-based index of the level-`depth` dyadic cell holding the midpoint of interval `i`.
    pub fn midpoint_cell(&self, i: usize, depth: u32) -> u64 {
        let num: BigInt = (&self.lefts[i] * 2 + &self.len_num) << depth as usize;
        let den = &self.denom * 2;
        let j = num.div_floor(&den).to_u64().expect("cell index fits u64") + 1;
        j.min(1u64 << depth)
    }

    /// Finest dyadic cell, at level at most `max_level`, whose closure contains interval `i`.
    pub fn closed_hull(&self, i: usize, max_level: u32) -> DyadicIndex {
        let lo = &self.lefts[i];
        let hi = lo + &self.len_num;
        for d in (0..=max_level).rev() {
            let scaled_lo = lo << d as usize;
            let j = scaled_lo.div_floor(&self.denom);
            // closure of I(j+1, d) is [j/2^d, (j+1)/2^d]; clamp so that lo = 1 stays in range
            let j = j.min((BigInt::one() << d as usize) - 1);
            if (&hi << d as usize) <= (&j + 1) * &self.denom {
                let j = j.to_u64().expect("cell index fits u64") + 1;
                return DyadicIndex::new(d, j).expect("valid cell");
            }
        }
        DyadicIndex::root()
    }

    /// 1-based range `(first, last)` of the level-`depth` cells meeting the closed interval `i`.
    pub fn cover_cells(&self, i: usize, depth: u32) -> (u64, u64) {
        let cells = 1u64 << depth;
        let index = |x: BigInt| {
            let j = (x << depth as usize)
                .div_floor(&self.denom)
                .to_u64()
                .expect("cell index fits u64")
                + 1;
            j.min(cells)
        };
        let lo = self.lefts[i].clone();
        let hi = &lo + &self.len_num;
        (index(lo), index(hi))
    }

    /// 1-based index `k` of the level-`level` grid point `k/2^level` nearest the
    /// midpoint of interval `i` (ties round up).
    pub fn nearest_grid_point(&self, i: usize, level: u32) -> u64 {
        // round(mid * 2^level) = floor((2*mid*2^level + 1) / 2)
        let num: BigInt = ((&self.lefts[i] * 2 + &self.len_num) << level as usize) + &self.denom;
        let den = &self.denom * 2;
        num.div_floor(&den).to_u64().expect("grid index fits u64")
    }
}

fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    BigRational::new(num.clone(), den.clone())
        .to_f64()
        .unwrap_or(f64::NAN)
}

/// A closed interval with exact rational endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedInterval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl ClosedInterval {
    pub fn length(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (
            self.lo.to_f64().unwrap_or(f64::NAN),
            self.hi.to_f64().unwrap_or(f64::NAN),
        )
    }

    pub fn contains(&self, other: &ClosedInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn disjoint(&self, other: &ClosedInterval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }

    pub fn is_positive(&self) -> bool {
        self.length().is_positive()
    }
}

/// The family `A_n` of `2^n` closed intervals of length `ξ^n` left after `n`
/// construction steps.
pub fn cantor_intervals(spec: &CantorSpec) -> Result<Vec<ClosedInterval>> {
    Ok(spec.survivors(spec.depth)?.intervals())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn first_dissection_third() {
        let spec = CantorSpec::new(Rational::new(1, 3), 1).unwrap();
        let iv = cantor_intervals(&spec).unwrap();
        assert_eq!(iv.len(), 2);
        assert_eq!((iv[0].lo.clone(), iv[0].hi.clone()), (r(0, 1), r(1, 3)));
        assert_eq!((iv[1].lo.clone(), iv[1].hi.clone()), (r(2, 3), r(1, 1)));
    }

    #[test]
    fn empty_construction() {
        let spec = CantorSpec::new(Rational::new(1, 3), 0).unwrap();
        let iv = cantor_intervals(&spec).unwrap();
        assert_eq!(
            iv,
            vec![ClosedInterval {
                lo: r(0, 1),
                hi: r(1, 1)
            }]
        );
    }

    #[test]
    fn quarter_two_steps() {
        let spec = CantorSpec::new(Rational::new(1, 4), 2).unwrap();
        let got: Vec<(BigRational, BigRational)> = cantor_intervals(&spec)
            .unwrap()
            .into_iter()
            .map(|i| (i.lo, i.hi))
            .collect();
        let want = vec![
            (r(0, 1), r(1, 16)),
            (r(3, 16), r(1, 4)),
            (r(3, 4), r(13, 16)),
            (r(15, 16), r(1, 1)),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn invalid_ratios() {
        for (p, q) in [(0, 1), (1, 2), (2, 3), (-1, 3), (4_999_999, 10_000_000)] {
            assert!(
                matches!(
                    CantorSpec::new(Rational::new(p, q), 1),
                    Err(Error::InvalidSpec(_))
                ),
                "{p}/{q}"
            );
        }
        assert!(CantorSpec::new(Rational::new(499_999, 1_000_000), 1).is_ok());
    }

    #[test]
    fn parse_ratio_strings() {
        assert_eq!(
            CantorSpec::parse_ratio("1/16").unwrap(),
            Rational::new(1, 16)
        );
        assert_eq!(
            CantorSpec::parse_ratio(" 2 / 6 ").unwrap(),
            Rational::new(1, 3)
        );
        assert!(CantorSpec::parse_ratio("1/0").is_err());
        assert!(CantorSpec::parse_ratio("x/3").is_err());
    }

    #[test]
    fn dimensions() {
        let s = CantorSpec::new(Rational::new(1, 4), 3).unwrap();
        assert!((s.beta() - 0.5).abs() < 1e-15);
        let s = CantorSpec::new(Rational::new(1, 3), 3).unwrap();
        assert!((s.beta() - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        assert_eq!(s.gamma(), 1.0);
        assert!(s.saturates());
    }

    #[test]
    fn nesting_and_lengths() {
        let spec = CantorSpec::new(Rational::new(2, 7), 4).unwrap();
        let coarse = cantor_intervals(&spec.with_depth(3)).unwrap();
        let fine = cantor_intervals(&spec).unwrap();
        let len = r(16, 2401);
        for (i, f) in fine.iter().enumerate() {
            assert_eq!(f.length(), len);
            assert!(coarse[i / 2].contains(f));
        }
        for w in fine.windows(2) {
            assert!(w[0].disjoint(&w[1]));
        }
    }

    #[test]
    fn resolution() {
        let s = CantorSpec::new(Rational::new(1, 4), 0).unwrap();
        // 4^-m < 2^-18 first holds at m = 10
        assert_eq!(s.resolution_for(18), 10);
        assert_eq!(s.coarsest_fit(18), 9);
        let s = CantorSpec::new(Rational::new(1, 3), 0).unwrap();
        assert_eq!(s.resolution_for(14), 9);
    }

    #[test]
    fn grid_helpers() {
        let s = CantorSpec::new(Rational::new(1, 3), 0).unwrap();
        let sv = s.survivors(1).unwrap();
        // [0,1/3] midpoint 1/6 sits in I(1,1); [2/3,1] midpoint 5/6 in I(2,1)
        assert_eq!(sv.midpoint_cell(0, 1), 1);
        assert_eq!(sv.midpoint_cell(1, 1), 2);
        // nearest level-2 grid point to 1/6 is 1/4 (k = 1), to 5/6 is 3/4 (k = 3)
        assert_eq!(sv.nearest_grid_point(0, 2), 1);
        assert_eq!(sv.nearest_grid_point(1, 2), 3);
    }
}
