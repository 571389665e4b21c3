use crate::cake::{Allocation, Piece};
use crate::valuation::Valuation;

use super::{
    best_piece, board, labels_distinct, payoffs_of, segment, ProtocolError, ProtocolOutcome, Step,
};

/// Two-agent cut and choose. Agent 0 of the outcome is the cutter.
///
/// The cutter halves the cake by its own measure; the chooser takes the half
/// it values more, the left half on a tie.
pub fn cut_and_choose_2(
    v_cutter: &Valuation,
    v_chooser: &Valuation,
) -> Result<ProtocolOutcome, ProtocolError> {
    let valuations = [v_cutter, v_chooser];
    labels_distinct(&valuations)?;
    let cut = v_cutter.quantile(0.5);
    let halves = board(0.0, 1.0, &[cut]);
    let pick = best_piece(v_chooser, &halves, &[false; 2]).expect("two halves available");
    let rest = 1 - pick;

    let mut pieces = vec![Piece::empty(), Piece::empty()];
    pieces[1] = Piece::from_interval(segment(halves[pick].0, halves[pick].1));
    pieces[0] = Piece::from_interval(segment(halves[rest].0, halves[rest].1));
    let trace = vec![
        Step::Cut {
            agent: Some(0),
            at: cut,
        },
        Step::Choose {
            agent: 1,
            piece: pick,
        },
        Step::Choose {
            agent: 0,
            piece: rest,
        },
    ];
    let agents = valuations.iter().map(|v| v.label().to_string()).collect();
    let payoffs = payoffs_of(&valuations, &pieces);
    Ok(ProtocolOutcome::new(
        "cut-and-choose-2",
        Allocation::new(agents, pieces),
        payoffs,
        trace,
    ))
}

/// Three-agent "I cut, you choose".
///
/// The cutter splits the cake into thirds by its own measure. The choosers
/// pick in `chooser_priority` order, so when both want the same third the
/// first one gets it and the second falls back to its best remaining third.
/// The cutter keeps what is left. Agent order follows `valuations`.
pub fn cut_and_choose_3(
    valuations: &[Valuation],
    cutter: usize,
    chooser_priority: (usize, usize),
) -> Result<ProtocolOutcome, ProtocolError> {
    if valuations.len() != 3 {
        return Err(ProtocolError::WrongArity {
            expected: "3".into(),
            found: valuations.len(),
        });
    }
    let (first, second) = chooser_priority;
    for a in [cutter, first, second] {
        if a >= 3 {
            return Err(ProtocolError::UnknownAgent(a));
        }
    }
    if cutter == first || cutter == second || first == second {
        let dup = if cutter == first || cutter == second {
            cutter
        } else {
            first
        };
        return Err(ProtocolError::DuplicateAgent(
            valuations[dup].label().to_string(),
        ));
    }
    let refs: Vec<&Valuation> = valuations.iter().collect();
    labels_distinct(&refs)?;

    let vc = &valuations[cutter];
    let cuts = [vc.quantile(1.0 / 3.0), vc.quantile(2.0 / 3.0)];
    let thirds = board(0.0, 1.0, &cuts);
    let mut taken = [false; 3];
    let mut trace = vec![
        Step::Cut {
            agent: Some(cutter),
            at: cuts[0],
        },
        Step::Cut {
            agent: Some(cutter),
            at: cuts[1],
        },
    ];

    let mut owner = [0usize; 3];
    let mut notes = Vec::new();
    let wanted_by_second = best_piece(&valuations[second], &thirds, &taken).expect("thirds");
    for agent in [first, second, cutter] {
        let k = best_piece(&valuations[agent], &thirds, &taken).expect("a third remains");
        taken[k] = true;
        owner[agent] = k;
        trace.push(Step::Choose { agent, piece: k });
    }
    if wanted_by_second == owner[first] {
        notes.push(format!(
            "conflict: {} and {} both preferred piece {}; resolved by chooser priority",
            valuations[first].label(),
            valuations[second].label(),
            owner[first]
        ));
    }

    let pieces: Vec<Piece> = owner
        .iter()
        .map(|&k| Piece::from_interval(segment(thirds[k].0, thirds[k].1)))
        .collect();
    let payoffs = payoffs_of(&refs, &pieces);
    let agents = valuations.iter().map(|v| v.label().to_string()).collect();
    let mut outcome = ProtocolOutcome::new(
        "i-cut-you-choose",
        Allocation::new(agents, pieces),
        payoffs,
        trace,
    );
    outcome.notes = notes;
    Ok(outcome)
}

/// Runs [`cut_and_choose_3`] once per cutter, with the other two choosing in
/// agent order. Row `c` holds every agent's payoff when agent `c` cuts.
pub fn payoffs_by_cutter(valuations: &[Valuation]) -> Result<Vec<Vec<f64>>, ProtocolError> {
    (0..valuations.len())
        .map(|cutter| {
            let others: Vec<usize> = (0..valuations.len()).filter(|a| *a != cutter).collect();
            let priority = match others.as_slice() {
                [a, b] => (*a, *b),
                _ => {
                    return Err(ProtocolError::WrongArity {
                        expected: "3".into(),
                        found: valuations.len(),
                    })
                }
            };
            cut_and_choose_3(valuations, cutter, priority).map(|o| o.payoffs)
        })
        .collect()
}
