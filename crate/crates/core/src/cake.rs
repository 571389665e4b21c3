//! Pieces of the unit cake and allocations of those pieces to agents.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gaps at or below this length are closed when canonicalizing, and
/// overlap/coverage checks pass at this total length.
pub const GEOMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CakeError {
    #[error("interval endpoint {value} is outside [0, 1]")]
    OutOfDomain { value: f64 },
    #[error("interval [{lo}, {hi}] has lo > hi")]
    Reversed { lo: f64, hi: f64 },
}

/// Closed subinterval `[lo, hi]` of `[0, 1]`. Serializes as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, CakeError> {
        for value in [lo, hi] {
            if !(0.0..=1.0).contains(&value) {
                return Err(CakeError::OutOfDomain { value });
            }
        }
        if lo > hi {
            return Err(CakeError::Reversed { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    fn overlap(&self, other: &Interval) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }
}

impl From<Interval> for [f64; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = CakeError;
    fn try_from([lo, hi]: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::new(lo, hi)
    }
}

/// A finite union of intervals in canonical form: sorted, with gaps wider
/// than [`GEOMETRY_TOLERANCE`] between consecutive intervals and no
/// zero-length members.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct Piece {
    intervals: Vec<Interval>,
}

impl<'de> Deserialize<'de> for Piece {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<Interval>::deserialize(d)?;
        Ok(Piece::from_intervals(raw))
    }
}

impl Piece {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_interval(iv: Interval) -> Self {
        Self::from_intervals(vec![iv])
    }

    /// Canonical union of already-validated intervals.
    pub fn from_intervals(mut raw: Vec<Interval>) -> Self {
        raw.retain(|iv| iv.hi > iv.lo);
        raw.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut out: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match out.last_mut() {
                Some(last) if iv.lo <= last.hi + GEOMETRY_TOLERANCE => {
                    last.hi = last.hi.max(iv.hi);
                }
                _ => out.push(iv),
            }
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    pub fn union(&self, other: &Piece) -> Piece {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Piece::from_intervals(all)
    }

    /// Total length shared with `other`.
    pub fn overlap(&self, other: &Piece) -> f64 {
        let mut total = 0.0;
        for a in &self.intervals {
            for b in &other.intervals {
                total += a.overlap(b);
            }
        }
        total
    }
}

/// Sorts, merges and validates raw `(lo, hi)` pairs into a [`Piece`].
pub fn canonicalize(raw: &[(f64, f64)]) -> Result<Piece, CakeError> {
    let intervals = raw
        .iter()
        .map(|&(lo, hi)| Interval::new(lo, hi))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Piece::from_intervals(intervals))
}

/// One piece per agent, in agent order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub agents: Vec<String>,
    pub pieces: Vec<Piece>,
}

impl Allocation {
    pub fn new(agents: Vec<String>, pieces: Vec<Piece>) -> Self {
        Self { agents, pieces }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Sum of pairwise intersection lengths.
    pub overlap: f64,
    /// Length of `[0, 1]` not covered by any piece.
    pub uncovered: f64,
    pub arity_ok: bool,
    pub passed: bool,
}

/// Checks that the pieces are essentially disjoint and cover the cake.
pub fn validate_allocation(a: &Allocation) -> ValidationReport {
    let arity_ok = a.agents.len() == a.pieces.len();
    let mut overlap = 0.0;
    for (i, p) in a.pieces.iter().enumerate() {
        for q in &a.pieces[i + 1..] {
            overlap += p.overlap(q);
        }
    }
    let covered = a
        .pieces
        .iter()
        .fold(Piece::empty(), |acc, p| acc.union(p))
        .length();
    let uncovered = (1.0 - covered).max(0.0);
    ValidationReport {
        overlap,
        uncovered,
        arity_ok,
        passed: arity_ok && overlap <= GEOMETRY_TOLERANCE && uncovered <= GEOMETRY_TOLERANCE,
    }
}
