use rand::RngCore;

use crate::rng::{rng_for, Stream};
use crate::{Error, Result};

/// A binary word together with the integer partial sums of its `±1` steps.
///
/// The walk is `S(j/N) = P(j)/√N`, linear between grid points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPath {
    bits: Vec<bool>,
    sums: Vec<i32>,
}

impl WalkPath {
    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidInput("empty word".into()));
        }
        if bits.len() > i32::MAX as usize {
            return Err(Error::Resource(format!(
                "word of length {} is too long",
                bits.len()
            )));
        }
        let mut sums = Vec::with_capacity(bits.len() + 1);
        sums.push(0i32);
        let mut p = 0i32;
        for &b in &bits {
            p += if b { 1 } else { -1 };
            sums.push(p);
        }
        Ok(WalkPath { bits, sums })
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// `log2 N` when `N` is a power of two.
    pub fn level(&self) -> Option<u32> {
        self.len()
            .is_power_of_two()
            .then(|| self.len().trailing_zeros())
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// `P(0), ..., P(N)`.
    pub fn partial_sums(&self) -> &[i32] {
        &self.sums
    }

    pub fn scale(&self) -> f64 {
        (self.len() as f64).sqrt()
    }

    /// `S(j/N)`.
    pub fn grid_value(&self, j: usize) -> f64 {
        self.sums[j] as f64 / self.scale()
    }

    /// Hex form: a `len=<N>` line followed by the bits packed MSB-first.
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = self
            .bits
            .chunks(8)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
            })
            .collect();
        format!("len={}\n{}\n", self.len(), hex::encode(bytes))
    }

    pub fn from_hex(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("len="))
            .ok_or_else(|| Error::Parse("missing 'len=<N>' header".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad length: {e}")))?;
        let body: String = lines.collect();
        let bytes = hex::decode(&body).map_err(|e| Error::Parse(format!("bad hex: {e}")))?;
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::Parse(format!(
                "expected {} hex bytes for len={n}, found {}",
                n.div_ceil(8),
                bytes.len()
            )));
        }
        let bits = (0..n)
            .map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1)
            .collect();
        Self::from_bits(bits)
    }
}

/// Decode a word of `'0'`/`'1'` characters.
pub fn decode_code(word: &str) -> Result<WalkPath> {
    let bits = word
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::Parse(format!("'{other}' is not a binary digit"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    WalkPath::from_bits(bits)
}

pub fn encode_path(path: &WalkPath) -> String {
    path.bits
        .iter()
        .map(|&b| if b { '1' } else { '0' })
        .collect()
}

/// `S(t)` by linear interpolation between grid values.
pub fn walk_value(path: &WalkPath, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} is outside [0, 1]")));
    }
    Ok(interpolate(path, t))
}

fn interpolate(path: &WalkPath, t: f64) -> f64 {
    let n = path.len();
    let x = t * n as f64;
    let j = (x.floor() as usize).min(n - 1);
    let frac = x - j as f64;
    let (a, b) = (path.sums[j] as f64, path.sums[j + 1] as f64);
    (a + frac * (b - a)) / path.scale()
}

/// `n` fair bits from the seed's word stream.
pub fn sample_word(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = rng_for(seed, Stream::Word);
    let mut bits = Vec::with_capacity(n);
    while bits.len() < n {
        let w = rng.next_u64();
        let take = (n - bits.len()).min(64);
        bits.extend((0..take).map(|i| w >> i & 1 == 1));
    }
    bits
}

/// `max_h sup_t |S(t+h) - S(t)| / sqrt(2 C h log(1/h))`, with `t` ranging over
/// the walk's own grid.
pub fn modulus_ratio(path: &WalkPath, c: f64, h_grid: &[f64]) -> Result<f64> {
    if c <= 1.0 || !c.is_finite() {
        return Err(Error::InvalidInput(format!(
            "modulus constant C = {c} must exceed 1"
        )));
    }
    let n = path.len();
    let mut worst = 0.0f64;
    for &h in h_grid {
        if !(h > 0.0 && h <= 0.5) {
            return Err(Error::InvalidInput(format!(
                "increment h = {h} must lie in (0, 1/2]"
            )));
        }
        let steps = h * n as f64;
        let sup = if steps.fract() == 0.0 {
            let k = steps as usize;
            let s = &path.sums;
            (0..=n - k)
                .map(|j| (s[j + k] - s[j]).unsigned_abs())
                .max()
                .unwrap_or(0) as f64
                / path.scale()
        } else {
            (0..=n)
                .map(|j| j as f64 / n as f64)
                .take_while(|&t| t + h <= 1.0)
                .map(|t| (interpolate(path, t + h) - interpolate(path, t)).abs())
                .fold(0.0, f64::max)
        };
        worst = worst.max(sup / (2.0 * c * h * (1.0 / h).ln()).sqrt());
    }
    Ok(worst)
}
