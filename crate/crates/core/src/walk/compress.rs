//! A small lossless bit compressor used as a computable stand-in for
//! Kolmogorov complexity.
//!
//! The output starts with a 2-bit mode and the Elias-gamma coded length,
//! followed by one of:
//!
//! * `0` raw bits,
//! * `1` LZ77 over the bits,
//! * `2` LZ77 over the run lengths of the bits (first bit stored explicitly).
//!
//! The shortest of the three is kept. LZ77 payloads are a sequence of tokens:
//! a `0` flag introduces a block of literals, a `1` flag a back reference
//! `(distance, length)`.

use std::collections::HashMap;

use serde::Serialize;

use crate::{Error, Result};

const MODE_RAW: u8 = 0;
const MODE_LZ_BITS: u8 = 1;
const MODE_LZ_RUNS: u8 = 2;

/// Minimum match length (in symbols) and hashed prefix for each LZ mode.
const BIT_MIN_MATCH: usize = 16;
const RUN_MIN_MATCH: usize = 2;
const CHAIN_LIMIT: usize = 48;

#[derive(Default)]
struct BitWriter {
    bits: Vec<bool>,
}

impl BitWriter {
    fn push(&mut self, b: bool) {
        self.bits.push(b);
    }

    fn push_uint(&mut self, v: u64, width: u32) {
        for i in (0..width).rev() {
            self.bits.push(v >> i & 1 == 1);
        }
    }

    /// Elias gamma code of `v >= 1`.
    fn gamma(&mut self, v: u64) {
        debug_assert!(v >= 1);
        let width = 64 - v.leading_zeros();
        for _ in 1..width {
            self.bits.push(false);
        }
        self.push_uint(v, width);
    }
}

fn gamma_len(v: u64) -> usize {
    2 * (64 - v.leading_zeros() as usize) - 1
}

struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl BitReader<'_> {
    fn bit(&mut self) -> Result<bool> {
        let b = *self
            .bits
            .get(self.pos)
            .ok_or_else(|| Error::Parse("compressed stream ended early".into()))?;
        self.pos += 1;
        Ok(b)
    }

    fn uint(&mut self, width: u32) -> Result<u64> {
        (0..width).try_fold(0u64, |acc, _| Ok(acc << 1 | self.bit()? as u64))
    }

    fn gamma(&mut self) -> Result<u64> {
        let mut zeros = 0u32;
        while !self.bit()? {
            zeros += 1;
            if zeros > 63 {
                return Err(Error::Parse("gamma code too long".into()));
            }
        }
        Ok(1u64 << zeros | self.uint(zeros)?)
    }
}

fn runs_of(bits: &[bool]) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < bits.len() {
        let start = i;
        while i < bits.len() && bits[i] == bits[start] {
            i += 1;
        }
        runs.push((i - start) as u64);
    }
    runs
}

/// Greedy LZ77 over `symbols`. A match is taken only when it is cheaper than
/// spelling the same symbols out as literals.
fn lz_encode(
    w: &mut BitWriter,
    symbols: &[u64],
    min_match: usize,
    literal_cost: impl Fn(u64) -> usize,
    write_literal: impl Fn(&mut BitWriter, u64),
) {
    let key = |i: usize| -> u64 {
        symbols[i..i + min_match]
            .iter()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, &s| {
                (h ^ s).wrapping_mul(0x0100_0000_01b3)
            })
    };
    let mut table: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut pending = 0usize..0usize;
    let flush = |w: &mut BitWriter, block: std::ops::Range<usize>| {
        if !block.is_empty() {
            w.push(false);
            w.gamma(block.len() as u64);
            for &s in &symbols[block] {
                write_literal(w, s);
            }
        }
    };
    let mut i = 0;
    while i < symbols.len() {
        let mut best: Option<(usize, usize)> = None;
        if i + min_match <= symbols.len() {
            let k = key(i);
            if let Some(cands) = table.get(&k) {
                for &c in cands.iter().rev().take(CHAIN_LIMIT) {
                    let mut len = 0;
                    while i + len < symbols.len() && symbols[c + len] == symbols[i + len] {
                        len += 1;
                    }
                    if len >= min_match && best.is_none_or(|(_, l)| len > l) {
                        best = Some((i - c, len));
                    }
                }
            }
        }
        let take = best.filter(|&(dist, len)| {
            let cost = 1 + gamma_len(dist as u64) + gamma_len((len - min_match + 1) as u64);
            let spelled: usize = symbols[i..i + len].iter().map(|&s| literal_cost(s)).sum();
            cost < spelled
        });
        let advance = match take {
            Some((dist, len)) => {
                flush(w, pending.clone());
                w.push(true);
                w.gamma(dist as u64);
                w.gamma((len - min_match + 1) as u64);
                pending = i + len..i + len;
                len
            }
            None => {
                pending.end = i + 1;
                1
            }
        };
        for p in i..i + advance {
            if p + min_match <= symbols.len() {
                table.entry(key(p)).or_default().push(p);
            }
        }
        i += advance;
    }
    flush(w, pending);
}

fn lz_decode(
    r: &mut BitReader,
    total: u64,
    weight: impl Fn(u64) -> u64,
    min_match: usize,
    read_literal: impl Fn(&mut BitReader) -> Result<u64>,
) -> Result<Vec<u64>> {
    let mut out: Vec<u64> = Vec::new();
    let mut covered = 0u64;
    while covered < total {
        if r.bit()? {
            let dist = r.gamma()? as usize;
            let len = r.gamma()? as usize + min_match - 1;
            if dist == 0 || dist > out.len() {
                return Err(Error::Parse("back reference before start".into()));
            }
            for _ in 0..len {
                let s = out[out.len() - dist];
                covered += weight(s);
                out.push(s);
            }
        } else {
            for _ in 0..r.gamma()? {
                let s = read_literal(r)?;
                covered += weight(s);
                out.push(s);
            }
        }
    }
    if covered != total {
        return Err(Error::Parse("decoded length overshoots header".into()));
    }
    Ok(out)
}

fn encode_mode(bits: &[bool], mode: u8) -> Vec<bool> {
    let mut w = BitWriter::default();
    w.push_uint(mode as u64, 2);
    w.gamma(bits.len() as u64 + 1);
    match mode {
        MODE_RAW => bits.iter().for_each(|&b| w.push(b)),
        MODE_LZ_BITS => {
            let symbols: Vec<u64> = bits.iter().map(|&b| b as u64).collect();
            lz_encode(
                &mut w,
                &symbols,
                BIT_MIN_MATCH,
                |_| 1,
                |w, s| w.push(s == 1),
            );
        }
        _ => {
            if let Some(&first) = bits.first() {
                w.push(first);
            }
            lz_encode(&mut w, &runs_of(bits), RUN_MIN_MATCH, gamma_len, |w, s| {
                w.gamma(s)
            });
        }
    }
    w.bits
}

/// Compress a bit string, keeping the shortest of the three encodings.
pub fn compress(bits: &[bool]) -> Vec<bool> {
    [MODE_RAW, MODE_LZ_BITS, MODE_LZ_RUNS]
        .into_iter()
        .map(|m| encode_mode(bits, m))
        .min_by_key(Vec::len)
        .expect("three candidates")
}

pub fn compressed_len(bits: &[bool]) -> usize {
    compress(bits).len()
}

pub fn decompress(code: &[bool]) -> Result<Vec<bool>> {
    let mut r = BitReader { bits: code, pos: 0 };
    let mode = r.uint(2)? as u8;
    let n = r.gamma()? - 1;
    let bits = match mode {
        MODE_RAW => (0..n).map(|_| r.bit()).collect::<Result<Vec<bool>>>()?,
        MODE_LZ_BITS => lz_decode(&mut r, n, |_| 1, BIT_MIN_MATCH, |r| Ok(r.bit()? as u64))?
            .into_iter()
            .map(|s| s == 1)
            .collect(),
        MODE_LZ_RUNS => {
            if n == 0 {
                Vec::new()
            } else {
                let mut b = r.bit()?;
                let runs = lz_decode(&mut r, n, |s| s, RUN_MIN_MATCH, |r| r.gamma())?;
                let mut out = Vec::with_capacity(n as usize);
                for len in runs {
                    out.extend(std::iter::repeat_n(b, len as usize));
                    b = !b;
                }
                out
            }
        }
        m => return Err(Error::Parse(format!("unknown compression mode {m}"))),
    };
    if r.pos != code.len() {
        return Err(Error::Parse(
            "trailing bits after compressed payload".into(),
        ));
    }
    Ok(bits)
}

/// Allowed shortfall below `N` for a word to count as incompressible-like:
/// `64 + 2 ceil(log2 N)` bits.
pub fn slack(n: usize) -> usize {
    let log = if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    };
    64 + 2 * log
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeficiencyReport {
    pub word_len: usize,
    pub compressed_len: usize,
    /// `N - L_c`; negative when compression expands the word.
    pub deficiency: i64,
    pub slack: usize,
    /// True when `L_c >= N - slack(N)`.
    pub incompressible_like: bool,
}

pub fn deficiency_proxy(bits: &[bool]) -> DeficiencyReport {
    let n = bits.len();
    let lc = compressed_len(bits);
    DeficiencyReport {
        word_len: n,
        compressed_len: lc,
        deficiency: n as i64 - lc as i64,
        slack: slack(n),
        incompressible_like: lc + slack(n) >= n,
    }
}
