use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::numeric::{fmt17, pairwise_sum_by};
use crate::{Error, Result};

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// Interval `[lo, hi)`, closed on the right when `hi == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidInput(format!("bad interval [{lo}, {hi})")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn unit() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && (t < self.hi || (self.hi == 1.0 && t == 1.0))
    }
}

/// Finitely many atoms at strictly increasing positions.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
    total_mass: f64,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let total = pairwise_sum_by(atoms.len(), &|i| atoms[i].weight);
        Self::with_total(atoms, total)
    }

    /// Build with a total mass known independently (for instance the exact root
    /// mass of a flow).
    pub fn with_total(atoms: Vec<Atom>, total_mass: f64) -> Result<Self> {
        for a in &atoms {
            if !a.position.is_finite() || !a.weight.is_finite() || a.weight < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "atom ({}, {}) must have finite position and nonnegative weight",
                    a.position, a.weight
                )));
            }
        }
        if let Some(w) = atoms.windows(2).find(|w| w[0].position >= w[1].position) {
            return Err(Error::InvalidInput(format!(
                "atom positions must increase strictly ({} then {})",
                w[0].position, w[1].position
            )));
        }
        Ok(AtomicMeasure { atoms, total_mass })
    }

    /// Sort by position and merge coincident atoms.
    pub fn from_unsorted(mut atoms: Vec<Atom>) -> Result<Self> {
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.position == a.position => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        Self::new(merged)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.position)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.weight)
    }

    /// Mass of the atoms lying in `interval`.
    pub fn interval_mass(&self, interval: &Interval) -> f64 {
        let start = self.atoms.partition_point(|a| a.position < interval.lo);
        let end = self
            .atoms
            .partition_point(|a| interval.contains(a.position) || a.position < interval.lo);
        let slice = &self.atoms[start..end.max(start)];
        pairwise_sum_by(slice.len(), &|i| slice[i].weight)
    }

    /// Cumulative masses `mu[0, t_j]`, one per atom.
    pub fn cumulative(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a.weight;
                Some(*acc)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,weight")?;
        for a in &self.atoms {
            writeln!(w, "{},{}", fmt17(a.position), fmt17(a.weight))?;
        }
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv); leading `#` comment lines are skipped.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .skip_while(|l| matches!(l, Ok(l) if l.starts_with('#')));
        match lines.next() {
            Some(Ok(h)) if h.trim() == "t,weight" => {}
            _ => return Err(Error::Parse("missing 't,weight' header".into())),
        }
        let mut atoms = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (t, w) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 't,weight'", i + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))
            };
            atoms.push(Atom {
                position: parse(t)?,
                weight: parse(w)?,
            });
        }
        Self::new(atoms)
    }
}
