use std::cmp::Ordering;

use crate::cake::{Allocation, Piece};
use crate::valuation::Valuation;

use super::{board, labels_distinct, segment, ProtocolError, ProtocolOutcome, Step};

/// Grid points per cut in the coarse search.
pub const MAXIMIN_GRID_POINTS: usize = 401;
/// Coordinate descent stops after a pass at a step no larger than this.
pub const MAXIMIN_MIN_STEP: f64 = 1e-7;

/// Contiguous division maximizing the smallest agent value.
///
/// `n - 1` cuts split the cake into `n` consecutive pieces; piece `perm[i]`
/// goes to agent `i`. With `assignment_search` every permutation is tried,
/// otherwise agent `i` gets the `i`-th piece from the left. The coarse grid
/// is refined by coordinate descent that accepts a move when it improves the
/// sorted value vector lexicographically, which lets it walk along ties of
/// the minimum.
pub fn maximin_split(
    valuations: &[Valuation],
    assignment_search: bool,
) -> Result<ProtocolOutcome, ProtocolError> {
    let n = valuations.len();
    if n > 3 {
        return Err(ProtocolError::Unsupported(format!(
            "maximin search handles 2 or 3 agents, got {n}"
        )));
    }
    if n < 2 {
        return Err(ProtocolError::WrongArity {
            expected: "2 or 3".into(),
            found: n,
        });
    }
    let refs: Vec<&Valuation> = valuations.iter().collect();
    labels_distinct(&refs)?;

    let perms = if assignment_search {
        permutations(n)
    } else {
        vec![(0..n).collect()]
    };
    let mut best: Option<(Candidate, Vec<usize>)> = None;
    for perm in perms {
        let start = coarse_grid(valuations, &perm);
        let refined = refine(valuations, &perm, start);
        let better = match &best {
            None => true,
            Some((b, _)) => leximin_cmp(&refined.sorted, &b.sorted) == Ordering::Greater,
        };
        if better {
            best = Some((refined, perm));
        }
    }
    let (best, perm) = best.expect("at least one assignment");

    let pieces_on_board = board(0.0, 1.0, &best.cuts);
    let mut trace: Vec<Step> = best
        .cuts
        .iter()
        .map(|&at| Step::Cut { agent: None, at })
        .collect();
    let mut pieces = Vec::with_capacity(n);
    for (agent, &k) in perm.iter().enumerate() {
        trace.push(Step::Choose { agent, piece: k });
        let (lo, hi) = pieces_on_board[k];
        pieces.push(Piece::from_interval(segment(lo, hi)));
    }
    let payoffs: Vec<f64> = valuations
        .iter()
        .zip(&pieces)
        .map(|(v, p)| v.measure(p))
        .collect();
    let agents = valuations.iter().map(|v| v.label().to_string()).collect();
    let mut outcome =
        ProtocolOutcome::new("maximin", Allocation::new(agents, pieces), payoffs, trace);
    outcome.objective = Some(best.sorted[0]);
    Ok(outcome)
}

#[derive(Debug, Clone)]
struct Candidate {
    cuts: Vec<f64>,
    sorted: Vec<f64>,
}

fn evaluate(valuations: &[Valuation], perm: &[usize], cuts: &[f64]) -> Candidate {
    let pieces = board(0.0, 1.0, cuts);
    let mut values: Vec<f64> = perm
        .iter()
        .enumerate()
        .map(|(agent, &k)| valuations[agent].measure_interval(pieces[k].0, pieces[k].1))
        .collect();
    values.sort_by(f64::total_cmp);
    Candidate {
        cuts: cuts.to_vec(),
        sorted: values,
    }
}

fn leximin_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn coarse_grid(valuations: &[Valuation], perm: &[usize]) -> Candidate {
    let steps = MAXIMIN_GRID_POINTS - 1;
    let at = |k: usize| k as f64 / steps as f64;
    let mut best: Option<Candidate> = None;
    let mut consider = |c: Candidate| {
        if best
            .as_ref()
            .is_none_or(|b| leximin_cmp(&c.sorted, &b.sorted) == Ordering::Greater)
        {
            best = Some(c);
        }
    };
    match perm.len() {
        2 => {
            for i in 0..=steps {
                consider(evaluate(valuations, perm, &[at(i)]));
            }
        }
        _ => {
            for i in 0..=steps {
                for j in i..=steps {
                    consider(evaluate(valuations, perm, &[at(i), at(j)]));
                }
            }
        }
    }
    best.expect("grid is nonempty")
}

fn refine(valuations: &[Valuation], perm: &[usize], start: Candidate) -> Candidate {
    let mut current = start;
    let mut step = 1.0 / (MAXIMIN_GRID_POINTS - 1) as f64;
    let dims = current.cuts.len();
    loop {
        let mut improved = false;
        'moves: for delta in [step, -step] {
            let mut shifts: Vec<Vec<f64>> = (0..dims)
                .map(|d| {
                    let mut s = vec![0.0; dims];
                    s[d] = delta;
                    s
                })
                .collect();
            if dims > 1 {
                shifts.push(vec![delta; dims]);
            }
            for shift in shifts {
                let mut cuts: Vec<f64> = current
                    .cuts
                    .iter()
                    .zip(&shift)
                    .map(|(c, s)| (c + s).clamp(0.0, 1.0))
                    .collect();
                for d in 1..dims {
                    if cuts[d] < cuts[d - 1] {
                        cuts[d] = cuts[d - 1];
                    }
                }
                if cuts == current.cuts {
                    continue;
                }
                let cand = evaluate(valuations, perm, &cuts);
                if leximin_cmp(&cand.sorted, &current.sorted) == Ordering::Greater {
                    current = cand;
                    improved = true;
                    break 'moves;
                }
            }
        }
        if !improved {
            if step <= MAXIMIN_MIN_STEP {
                break;
            }
            step /= 2.0;
        }
    }
    current
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for k in 0..n {
            if !prefix.contains(&k) {
                prefix.push(k);
                go(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), n, &mut out);
    out
}
