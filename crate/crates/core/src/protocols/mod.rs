//! Division procedures. Each returns a [`ProtocolOutcome`]: the allocation,
//! every agent's value for its own share, and the ordered steps that
//! produced it. [`replay`] rebuilds the allocation from the steps alone.

mod adjusted_winner;
mod cut_choose;
mod maximin;
mod selfridge_conway;

pub use adjusted_winner::{adjusted_winner_2, adjusted_winner_n, discretize, DiscreteCake};
pub use cut_choose::{cut_and_choose_2, cut_and_choose_3, payoffs_by_cutter};
pub use maximin::{maximin_split, MAXIMIN_GRID_POINTS, MAXIMIN_MIN_STEP};
pub use selfridge_conway::selfridge_conway;

use serde::Serialize;
use thiserror::Error;

use crate::cake::{Allocation, Interval, Piece};
use crate::valuation::{Valuation, ValuationError};

/// Values closer than this are treated as tied when an agent picks a piece.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("agent `{0}` appears more than once")]
    DuplicateAgent(String),
    #[error("agent index {0} does not exist")]
    UnknownAgent(usize),
    #[error("expected {expected} agents, got {found}")]
    WrongArity { expected: String, found: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid bids: {0}")]
    InvalidBids(String),
    #[error("trace cannot be replayed: {0}")]
    BadTrace(String),
    #[error(transparent)]
    Valuation(#[from] ValuationError),
}

/// One recorded action. Cut positions and trims are absolute cake coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Step {
    /// A cut of the region currently being divided. `agent` is `None` when
    /// the cut is placed by the procedure itself (maximin).
    Cut {
        agent: Option<usize>,
        at: f64,
    },
    /// `agent` shortens board piece `piece` so that it starts at `at`; the
    /// removed part, worth `amount` to the trimmer, is set aside.
    Trim {
        agent: usize,
        piece: usize,
        at: f64,
        amount: f64,
    },
    Choose {
        agent: usize,
        piece: usize,
    },
    /// Initial award of a whole good.
    Award {
        agent: usize,
        good: usize,
    },
    /// `fraction` of the whole good moves from one agent to another.
    Transfer {
        good: usize,
        fraction: f64,
        from: usize,
        to: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolOutcome {
    pub protocol: String,
    pub allocation: Allocation,
    /// `payoffs[i]` is agent `i`'s value of its own piece.
    pub payoffs: Vec<f64>,
    pub trace: Vec<Step>,
    /// Set when the procedure carries no fairness guarantee.
    pub heuristic: bool,
    /// Number of equal-width goods for point-bidding procedures.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goods: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ProtocolOutcome {
    fn new(protocol: &str, allocation: Allocation, payoffs: Vec<f64>, trace: Vec<Step>) -> Self {
        Self {
            protocol: protocol.to_string(),
            allocation,
            payoffs,
            trace,
            heuristic: false,
            goods: None,
            objective: None,
            notes: Vec::new(),
        }
    }
}

fn labels_distinct(valuations: &[&Valuation]) -> Result<(), ProtocolError> {
    for (i, v) in valuations.iter().enumerate() {
        if valuations[..i].iter().any(|w| w.label() == v.label()) {
            return Err(ProtocolError::DuplicateAgent(v.label().to_string()));
        }
    }
    Ok(())
}

fn segment(lo: f64, hi: f64) -> Interval {
    let lo = lo.clamp(0.0, 1.0);
    let hi = hi.clamp(lo, 1.0);
    Interval::new(lo, hi).expect("clamped into the cake")
}

/// Splits `[lo, hi]` at `cuts` (sorted ascending).
fn board(lo: f64, hi: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend_from_slice(cuts);
    edges.push(hi);
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Index of the most valuable available piece; ties go to the lowest index.
fn best_piece(v: &Valuation, pieces: &[(f64, f64)], taken: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &(lo, hi)) in pieces.iter().enumerate() {
        if taken[k] {
            continue;
        }
        let value = v.measure_interval(lo, hi);
        match best {
            Some((_, b)) if value <= b + TIE_TOLERANCE => {}
            _ => best = Some((k, value)),
        }
    }
    best.map(|(k, _)| k)
}

fn payoffs_of(valuations: &[&Valuation], pieces: &[Piece]) -> Vec<f64> {
    valuations
        .iter()
        .zip(pieces)
        .map(|(v, p)| v.measure(p))
        .collect()
}

/// Lays the agents' shares of each good side by side inside the good's
/// interval `[g/m, (g+1)/m]`, in agent order.
fn goods_allocation(agents: Vec<String>, shares: &[Vec<f64>]) -> Allocation {
    let m = shares.len();
    let n = agents.len();
    let mut holdings: Vec<Vec<Interval>> = vec![Vec::new(); n];
    for (g, row) in shares.iter().enumerate() {
        let start = g as f64 / m as f64;
        let end = (g + 1) as f64 / m as f64;
        let width = end - start;
        let last = row.iter().rposition(|s| *s > 0.0);
        let mut cursor = start;
        for (i, &s) in row.iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            let next = if Some(i) == last {
                end
            } else {
                (cursor + s * width).min(end)
            };
            holdings[i].push(segment(cursor, next));
            cursor = next;
        }
    }
    Allocation::new(
        agents,
        holdings.into_iter().map(Piece::from_intervals).collect(),
    )
}

/// Rebuilds an allocation from a trace.
///
/// Cut-based traces divide a region (initially the whole cake) at the
/// recorded cuts; choices hand out board pieces; once every board piece is
/// taken, the next cut starts dividing the set-aside trimming. Point-bidding
/// traces need the number of goods.
pub fn replay(
    agents: &[String],
    trace: &[Step],
    goods: Option<usize>,
) -> Result<Allocation, ProtocolError> {
    let bad = |msg: &str| ProtocolError::BadTrace(msg.to_string());
    let n = agents.len();
    let check_agent = |a: usize| {
        if a < n {
            Ok(a)
        } else {
            Err(ProtocolError::UnknownAgent(a))
        }
    };

    if let Some(m) = goods {
        let mut shares = vec![vec![0.0; n]; m];
        for step in trace {
            match *step {
                Step::Award { agent, good } => {
                    let row = shares
                        .get_mut(good)
                        .ok_or_else(|| bad("good out of range"))?;
                    row[check_agent(agent)?] = 1.0;
                }
                Step::Transfer {
                    good,
                    fraction,
                    from,
                    to,
                } => {
                    let row = shares
                        .get_mut(good)
                        .ok_or_else(|| bad("good out of range"))?;
                    row[check_agent(from)?] -= fraction;
                    row[check_agent(to)?] += fraction;
                }
                _ => return Err(bad("cut step in a point-bidding trace")),
            }
        }
        return Ok(goods_allocation(agents.to_vec(), &shares));
    }

    let mut holdings: Vec<Vec<Interval>> = vec![Vec::new(); n];
    let mut region = (0.0, 1.0);
    let mut cuts: Vec<f64> = Vec::new();
    let mut pieces: Option<Vec<(f64, f64)>> = None;
    let mut taken: Vec<bool> = Vec::new();
    let mut residue: Option<(f64, f64)> = None;

    for step in trace {
        match *step {
            Step::Cut { at, .. } => {
                if pieces.is_some() {
                    if !taken.iter().all(|t| *t) {
                        return Err(bad("cut while board pieces remain"));
                    }
                    region = residue.take().ok_or_else(|| bad("no region left to cut"))?;
                    pieces = None;
                    cuts.clear();
                }
                cuts.push(at);
            }
            Step::Trim {
                agent, piece, at, ..
            } => {
                check_agent(agent)?;
                let board = pieces.get_or_insert_with(|| {
                    let mut sorted = cuts.clone();
                    sorted.sort_by(f64::total_cmp);
                    taken = vec![false; sorted.len() + 1];
                    board(region.0, region.1, &sorted)
                });
                let p = board
                    .get_mut(piece)
                    .ok_or_else(|| bad("trim of missing piece"))?;
                residue = Some((p.0, at));
                p.0 = at;
            }
            Step::Choose { agent, piece } => {
                check_agent(agent)?;
                let board = pieces.get_or_insert_with(|| {
                    let mut sorted = cuts.clone();
                    sorted.sort_by(f64::total_cmp);
                    taken = vec![false; sorted.len() + 1];
                    board(region.0, region.1, &sorted)
                });
                let &(lo, hi) = board
                    .get(piece)
                    .ok_or_else(|| bad("choice of missing piece"))?;
                if std::mem::replace(&mut taken[piece], true) {
                    return Err(bad("piece chosen twice"));
                }
                holdings[agent].push(segment(lo, hi));
            }
            Step::Award { .. } | Step::Transfer { .. } => {
                return Err(bad("point-bidding step without a goods count"))
            }
        }
    }
    Ok(Allocation::new(
        agents.to_vec(),
        holdings.into_iter().map(Piece::from_intervals).collect(),
    ))
}
