use crate::cake::{Allocation, Interval, Piece};
use crate::valuation::Valuation;

use super::{
    best_piece, board, labels_distinct, payoffs_of, segment, ProtocolError, ProtocolOutcome, Step,
};

/// Largest-vs-second gap below which the trimmer leaves its pieces alone.
const TRIM_THRESHOLD: f64 = 1e-9;

/// Selfridge–Conway envy-free division for three agents.
///
/// Roles follow argument order: `v1` divides, `v2` trims, `v3` chooses.
///
/// Phase one: the divider cuts the cake into thirds by its own measure. The
/// trimmer shaves its favourite third down to the value of its second
/// favourite and sets the trimming aside. Choices go chooser, trimmer,
/// divider, and the trimmer must take the trimmed third if it is still there.
///
/// Phase two: whoever of trimmer and chooser did not get the trimmed third
/// cuts the trimming into thirds by its own measure; the holder of the
/// trimmed third picks first, then the divider, then the cutter.
pub fn selfridge_conway(
    v1: &Valuation,
    v2: &Valuation,
    v3: &Valuation,
) -> Result<ProtocolOutcome, ProtocolError> {
    let vs = [v1, v2, v3];
    labels_distinct(&vs)?;
    let (divider, trimmer, chooser) = (0usize, 1usize, 2usize);

    let cuts = [v1.quantile(1.0 / 3.0), v1.quantile(2.0 / 3.0)];
    let mut thirds = board(0.0, 1.0, &cuts);
    let mut trace = vec![
        Step::Cut {
            agent: Some(divider),
            at: cuts[0],
        },
        Step::Cut {
            agent: Some(divider),
            at: cuts[1],
        },
    ];

    let mut ranked: Vec<(usize, f64)> = thirds
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| (k, v2.measure_interval(lo, hi)))
        .collect();
    // stable: equal values keep piece order
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (largest, top) = ranked[0];
    let second = ranked[1].1;

    let mut trimmed: Option<usize> = None;
    let mut trimming: Option<(f64, f64)> = None;
    if top - second > TRIM_THRESHOLD {
        let (lo, hi) = thirds[largest];
        let at = v2.quantile(v2.cdf(hi) - second).clamp(lo, hi);
        trace.push(Step::Trim {
            agent: trimmer,
            piece: largest,
            at,
            amount: v2.measure_interval(lo, at),
        });
        thirds[largest].0 = at;
        trimmed = Some(largest);
        trimming = Some((lo, at));
    }

    let mut holdings: Vec<Vec<Interval>> = vec![Vec::new(); 3];
    let mut taken = [false; 3];
    let mut take = |agent: usize, k: usize, taken: &mut [bool; 3], trace: &mut Vec<Step>| {
        taken[k] = true;
        holdings[agent].push(segment(thirds[k].0, thirds[k].1));
        trace.push(Step::Choose { agent, piece: k });
    };

    let pick = best_piece(v3, &thirds, &taken).expect("three pieces");
    take(chooser, pick, &mut taken, &mut trace);
    let pick = match trimmed {
        Some(k) if !taken[k] => k,
        _ => best_piece(v2, &thirds, &taken).expect("two pieces"),
    };
    take(trimmer, pick, &mut taken, &mut trace);
    let pick = best_piece(v1, &thirds, &taken).expect("one piece");
    take(divider, pick, &mut taken, &mut trace);

    if let (Some(k), Some((lo, hi))) = (trimmed, trimming) {
        let holder = if trace.contains(&Step::Choose {
            agent: chooser,
            piece: k,
        }) {
            chooser
        } else {
            trimmer
        };
        let cutter = if holder == chooser { trimmer } else { chooser };
        let vc = vs[cutter];
        let mass = vc.measure_interval(lo, hi);
        let sub_cuts = [
            vc.advance(lo, mass / 3.0, hi),
            vc.advance(lo, 2.0 * mass / 3.0, hi),
        ];
        for at in sub_cuts {
            trace.push(Step::Cut {
                agent: Some(cutter),
                at,
            });
        }
        let parts = board(lo, hi, &sub_cuts);
        let mut taken = [false; 3];
        for agent in [holder, divider, cutter] {
            let k = best_piece(vs[agent], &parts, &taken).expect("a part remains");
            taken[k] = true;
            holdings[agent].push(segment(parts[k].0, parts[k].1));
            trace.push(Step::Choose { agent, piece: k });
        }
    }

    let pieces: Vec<Piece> = holdings.into_iter().map(Piece::from_intervals).collect();
    let payoffs = payoffs_of(&vs, &pieces);
    let agents = vs.iter().map(|v| v.label().to_string()).collect();
    Ok(ProtocolOutcome::new(
        "selfridge-conway",
        Allocation::new(agents, pieces),
        payoffs,
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cake::validate_allocation;
    use crate::protocols::replay;
    use crate::valuation::{normalize, RampDirection, ValuationSpec};

    fn uniform(label: &str) -> Valuation {
        normalize(ValuationSpec::uniform(label)).unwrap()
    }

    fn envy(vs: &[&Valuation], o: &ProtocolOutcome) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, v) in vs.iter().enumerate() {
            for p in &o.allocation.pieces {
                worst = worst.max(v.measure(p) - o.payoffs[i]);
            }
        }
        worst
    }

    #[test]
    fn identical_uniform_agents_need_no_trim() {
        let (a, b, c) = (uniform("a"), uniform("b"), uniform("c"));
        let o = selfridge_conway(&a, &b, &c).unwrap();
        assert!(!o.trace.iter().any(|s| matches!(s, Step::Trim { .. })));
        assert_eq!(o.trace.len(), 5);
        for p in &o.payoffs {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
        // chooser takes the first third on the tie, trimmer the next, divider the last
        let lo = |i: usize| o.allocation.pieces[i].intervals()[0].lo();
        assert!((lo(2) - 0.0).abs() < 1e-12);
        assert!((lo(1) - 1.0 / 3.0).abs() < 1e-11);
        assert!((lo(0) - 2.0 / 3.0).abs() < 1e-11);
    }

    /// Hand replay with closed forms: v1 = 1, v2 = 2x, v3 = 2(1 - x).
    #[test]
    fn ramps_match_hand_replay() {
        let v1 = uniform("divider");
        let v2 = normalize(ValuationSpec::ramp("trimmer", RampDirection::Increasing)).unwrap();
        let v3 = normalize(ValuationSpec::ramp("chooser", RampDirection::Decreasing)).unwrap();
        let o = selfridge_conway(&v1, &v2, &v3).unwrap();

        // trimmer values the thirds 1/9, 3/9, 5/9 and trims [2/3, 1] to 1/3
        let t_hi = (2.0f64 / 3.0).sqrt();
        let t_lo = 2.0 / 3.0;
        match o.trace[2] {
            Step::Trim {
                agent, piece, at, ..
            } => {
                assert_eq!((agent, piece), (1, 2));
                assert!((at - t_hi).abs() < 1e-11);
            }
            ref s => panic!("expected trim, got {s:?}"),
        }
        // chooser takes [0, 1/3] (5/9), trimmer the trimmed third, divider the middle
        let g = |x: f64| 2.0 * x - x * x;
        let mass = g(t_hi) - g(t_lo);
        let inv_g = |y: f64| 1.0 - (1.0 - y).sqrt();
        let c1 = inv_g(g(t_lo) + mass / 3.0);
        let c2 = inv_g(g(t_lo) + 2.0 * mass / 3.0);
        // phase two: trimmer takes [c2, t_hi], divider [c1, c2], chooser [t_lo, c1]
        let expected = [
            1.0 / 3.0 + (c2 - c1),
            1.0 / 3.0 + (t_hi * t_hi - c2 * c2),
            5.0 / 9.0 + mass / 3.0,
        ];
        for (got, want) in o.payoffs.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!(envy(&[&v1, &v2, &v3], &o) <= 1e-9);
        assert!(validate_allocation(&o.allocation).passed);
        assert_eq!(
            replay(&o.allocation.agents, &o.trace, None).unwrap(),
            o.allocation
        );
    }

    #[test]
    fn trimmed_piece_taken_by_chooser() {
        // chooser and trimmer share a taste for the right end
        let v1 = uniform("divider");
        let v2 = normalize(ValuationSpec::ramp("trimmer", RampDirection::Increasing)).unwrap();
        let v3 = normalize(ValuationSpec::piecewise_constant(
            "chooser",
            vec![(0.0, 0.0), (0.9, 1.0), (1.0, 0.0)],
        ))
        .unwrap();
        let o = selfridge_conway(&v1, &v2, &v3).unwrap();
        assert!(o.trace.contains(&Step::Choose { agent: 2, piece: 2 }));
        // so the trimmer divides the trimming
        assert!(matches!(o.trace[6], Step::Cut { agent: Some(1), .. }));
        assert!(envy(&[&v1, &v2, &v3], &o) <= 1e-9);
        assert_eq!(
            replay(&o.allocation.agents, &o.trace, None).unwrap(),
            o.allocation
        );
    }

    #[test]
    fn duplicate_labels_rejected() {
        let a = uniform("a");
        assert!(matches!(
            selfridge_conway(&a, &a, &uniform("c")),
            Err(ProtocolError::DuplicateAgent(_))
        ));
    }
}
