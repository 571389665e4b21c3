use std::f64::consts::PI;

use cakeshare_core::cake::{canonicalize, validate_allocation};
use cakeshare_core::fairness::{
    audit, pareto_efficient_discrete, perfect_division_search, DiscreteInstance, Property,
};
use cakeshare_core::games::{best_responses, improving_path, pure_nash, PathStatus, PayoffMatrix};
use cakeshare_core::protocols::{
    adjusted_winner_2, cut_and_choose_2, replay, selfridge_conway, DiscreteCake, Step,
};
use cakeshare_core::valuation::{normalize, RampDirection, Valuation, ValuationSpec};
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = ValuationSpec> {
    prop_oneof![
        Just(ValuationSpec::uniform("v")),
        prop_oneof![
            Just(RampDirection::Increasing),
            Just(RampDirection::Decreasing)
        ]
        .prop_map(|d| ValuationSpec::ramp("v", d)),
        (0.2f64..3.0, 0.0f64..1.0, 1u32..7, 0.0f64..2.0 * PI)
            .prop_map(|(o, a, k, p)| ValuationSpec::sinusoid("v", o, a * o, k, p)),
        steps_strategy().prop_map(|b| ValuationSpec::piecewise_constant("v", b)),
        knots_strategy().prop_map(|k| ValuationSpec::piecewise_linear("v", k)),
    ]
}

/// Sorted interior points, distinct by a margin, with one height each.
fn grid_strategy(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max).prop_flat_map(|k| {
        (
            proptest::collection::btree_set(1u32..1000, k - 1),
            proptest::collection::vec(0.0f64..5.0, k + 1),
        )
            .prop_map(|(xs, hs)| {
                let mut grid = vec![0.0];
                grid.extend(xs.into_iter().map(|x| f64::from(x) / 1000.0));
                grid.push(1.0);
                let mut hs = hs;
                hs[0] += 0.1;
                (grid, hs)
            })
    })
}

fn steps_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    grid_strategy(8).prop_map(|(xs, hs)| xs.into_iter().zip(hs).collect())
}

fn knots_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    grid_strategy(7).prop_map(|(xs, hs)| xs.into_iter().zip(hs).collect())
}

fn labeled(spec: ValuationSpec, label: &str) -> Valuation {
    let mut spec = spec;
    spec.label = label.to_string();
    normalize(spec).unwrap()
}

/// Composite Simpson over each smooth segment, 8192 panels per segment.
fn simpson(v: &Valuation, a: f64, b: f64) -> f64 {
    let mut edges = vec![a];
    edges.extend(v.smooth_breaks().into_iter().filter(|x| *x > a && *x < b));
    edges.push(b);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = 8192;
        let h = (hi - lo) / n as f64;
        // stay strictly inside the segment so jumps never leak in
        let inset = h * 1e-9;
        let f = |k: usize| {
            let x = lo + h * k as f64;
            v.density(x.clamp(lo + inset, hi - inset))
        };
        let mut acc = f(0) + f(n);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
        }
        total += acc * h / 3.0;
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn whole_cake_is_worth_one(spec in spec_strategy()) {
        let v = normalize(spec).unwrap();
        prop_assert!((v.measure_interval(0.0, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_is_additive(spec in spec_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let v = normalize(spec).unwrap();
        let mut p = [a, b, c];
        p.sort_by(f64::total_cmp);
        let whole = v.measure_interval(p[0], p[2]);
        let parts = v.measure_interval(p[0], p[1]) + v.measure_interval(p[1], p[2]);
        prop_assert!((whole - parts).abs() < 1e-12);
        prop_assert!(whole >= -1e-15);
    }

    #[test]
    fn measure_agrees_with_simpson(spec in spec_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let v = normalize(spec).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!((v.measure_interval(lo, hi) - simpson(&v, lo, hi)).abs() <= 1e-8);
    }

    #[test]
    fn cumulative_is_monotone_and_inverts(spec in spec_strategy(), x in 0.0f64..1.0, y in 0.0f64..1.0, t in 0.0f64..=1.0) {
        let v = normalize(spec).unwrap();
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(v.cumulative(lo).unwrap() <= v.cumulative(hi).unwrap() + 1e-15);
        let q = v.inverse_cumulative(t).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert!((v.cumulative(q).unwrap() - t).abs() <= 1e-9);
    }

    #[test]
    fn canonicalize_is_idempotent_and_keeps_union_length(
        raw in proptest::collection::vec((0u32..=1000, 0u32..=1000), 0..8)
    ) {
        let raw: Vec<(f64, f64)> = raw
            .into_iter()
            .map(|(a, b)| {
                let (a, b) = (f64::from(a.min(b)) / 1000.0, f64::from(a.max(b)) / 1000.0);
                (a, b)
            })
            .collect();
        let p = canonicalize(&raw).unwrap();
        let pairs: Vec<(f64, f64)> = p.intervals().iter().map(|i| (i.lo(), i.hi())).collect();
        prop_assert_eq!(canonicalize(&pairs).unwrap(), p.clone());
        prop_assert!(pairs.windows(2).all(|w| w[0].1 < w[1].0));

        // sweep oracle: length covered by at least one raw interval
        let mut events: Vec<(f64, i32)> = raw
            .iter()
            .flat_map(|&(a, b)| [(a, 1), (b, -1)])
            .collect();
        events.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
        let (mut depth, mut last, mut covered) = (0, 0.0, 0.0);
        for (x, d) in events {
            if depth > 0 {
                covered += x - last;
            }
            depth += d;
            last = x;
        }
        prop_assert!((p.length() - covered).abs() < 1e-12);
    }

    #[test]
    fn cut_and_choose_is_proportional_and_envy_free(a in spec_strategy(), b in spec_strategy()) {
        let (va, vb) = (labeled(a, "cutter"), labeled(b, "chooser"));
        let o = cut_and_choose_2(&va, &vb).unwrap();
        prop_assert!(validate_allocation(&o.allocation).passed);
        let r = audit(&o.allocation, &[va, vb]).unwrap();
        prop_assert!(r.envy_free, "{:?}", r.envy);
        prop_assert!(r.proportional.iter().all(|p| *p));
        prop_assert_eq!(replay(&o.allocation.agents, &o.trace, None).unwrap(), o.allocation);
    }

    #[test]
    fn selfridge_conway_is_envy_free(a in steps_strategy(), b in steps_strategy(), c in steps_strategy()) {
        let vs = [
            normalize(ValuationSpec::piecewise_constant("p", a)).unwrap(),
            normalize(ValuationSpec::piecewise_constant("q", b)).unwrap(),
            normalize(ValuationSpec::piecewise_constant("r", c)).unwrap(),
        ];
        let o = selfridge_conway(&vs[0], &vs[1], &vs[2]).unwrap();
        let check = validate_allocation(&o.allocation);
        prop_assert!(check.passed, "{:?}", check);
        let r = audit(&o.allocation, &vs).unwrap();
        prop_assert!(r.max_envy() <= 1e-9, "{:?}", r.envy);
        prop_assert!(r.proportional.iter().all(|p| *p));
        for (i, p) in o.payoffs.iter().enumerate() {
            prop_assert!((p - r.values[i][i]).abs() < 1e-12);
        }
        prop_assert_eq!(replay(&o.allocation.agents, &o.trace, None).unwrap(), o.allocation);
    }

    #[test]
    fn adjusted_winner_equalizes(bids in (1usize..=10).prop_flat_map(|m| {
        proptest::collection::vec(proptest::collection::vec(0u32..100, m), 2)
    })) {
        let rows: Vec<Vec<f64>> = bids
            .iter()
            .map(|r| {
                let s: u32 = r.iter().sum::<u32>() + r.len() as u32;
                r.iter().map(|&b| 100.0 * f64::from(b + 1) / f64::from(s)).collect()
            })
            .collect();
        let cake = DiscreteCake::new(vec!["x".into(), "y".into()], rows).unwrap();
        let o = adjusted_winner_2(&cake).unwrap();
        // payoffs are points / 100
        prop_assert!(100.0 * (o.payoffs[0] - o.payoffs[1]).abs() <= 1e-9);
        let split = o.trace.iter().filter(|s| matches!(s, Step::Transfer { fraction, .. } if *fraction < 1.0)).count();
        prop_assert!(split <= 1);
        let r = audit(&o.allocation, &cake.bid_valuations()).unwrap();
        prop_assert!(r.max_envy() <= 1e-9, "{:?}", r.envy);
        prop_assert!(validate_allocation(&o.allocation).passed);
    }
}

fn random_matrix(cells: &[u8]) -> PayoffMatrix {
    let s = |p: &str| vec![format!("{p}1"), format!("{p}2")];
    PayoffMatrix::new(
        vec!["E".into(), "A".into(), "S".into()],
        vec![s("E"), s("A"), s("S")],
        cells
            .chunks(3)
            .map(|c| c.iter().map(|&x| f64::from(x)).collect())
            .collect(),
    )
    .unwrap()
}

/// Every profile, every player, every alternative strategy.
fn nash_oracle(m: &PayoffMatrix) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for e in 0..2 {
        for a in 0..2 {
            for s in 0..2 {
                let p = vec![e, a, s];
                let stable = (0..3).all(|player| {
                    (0..2).all(|alt| {
                        let mut q = p.clone();
                        q[player] = alt;
                        m.payoff(&q)[player] <= m.payoff(&p)[player]
                    })
                });
                if stable {
                    out.push(p);
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pure_nash_matches_oracle(cells in proptest::collection::vec(0u8..10, 24)) {
        let m = random_matrix(&cells);
        let ne = pure_nash(&m);
        prop_assert_eq!(&ne, &nash_oracle(&m));
        for p in m.profiles() {
            let all_best = (0..3).all(|pl| best_responses(&m, &p, pl).unwrap().contains(&p[pl]));
            prop_assert_eq!(all_best, ne.contains(&p));
        }
    }

    #[test]
    fn structure_survives_affine_maps(
        cells in proptest::collection::vec(0u8..10, 24),
        scale in 1u8..5,
        shift in -5i8..5,
        player in 0usize..3,
    ) {
        let m = random_matrix(&cells);
        let t = m.affine(player, f64::from(scale), f64::from(shift));
        prop_assert_eq!(pure_nash(&m), pure_nash(&t));
        for p in m.profiles() {
            for pl in 0..3 {
                prop_assert_eq!(best_responses(&m, &p, pl).unwrap(), best_responses(&t, &p, pl).unwrap());
            }
            prop_assert_eq!(improving_path(&m, &p, 20).unwrap(), improving_path(&t, &p, 20).unwrap());
        }
    }

    #[test]
    fn improving_paths_end_definitely(cells in proptest::collection::vec(0u8..10, 24), start in 0usize..8) {
        let m = random_matrix(&cells);
        let start = vec![start >> 2 & 1, start >> 1 & 1, start & 1];
        let path = improving_path(&m, &start, 100).unwrap();
        prop_assert!(path.steps.len() <= m.profile_count() + 1);
        let mut at = start.clone();
        for s in &path.steps {
            prop_assert_eq!(at[s.player], s.from);
            let before = m.payoff(&at)[s.player];
            at[s.player] = s.to;
            prop_assert!(m.payoff(&at)[s.player] > before);
            prop_assert_eq!(&at, &s.profile);
        }
        match path.status {
            PathStatus::AtEquilibrium => prop_assert!(pure_nash(&m).contains(&at)),
            PathStatus::Cycle => {
                prop_assert!(pure_nash(&m).is_empty() || !pure_nash(&m).contains(&at));
                prop_assert_eq!(&path.cycle[0], &at);
            }
            PathStatus::MaxSteps => prop_assert!(false, "100 steps cannot be exhausted on 8 profiles"),
        }
    }
}

fn normalized_rows(raw: &[Vec<u32>]) -> Vec<Vec<f64>> {
    raw.iter()
        .map(|r| {
            let s: u32 = r.iter().map(|x| x + 1).sum();
            r.iter().map(|&x| f64::from(x + 1) / f64::from(s)).collect()
        })
        .collect()
}

/// Double loop: every alternative assignment against every agent.
fn dominated_oracle(values: &[Vec<f64>], assignment: &[usize]) -> bool {
    let (n, m) = (values.len(), values[0].len());
    let totals = |asg: &[usize]| {
        let mut t = vec![0.0; n];
        for g in 0..m {
            t[asg[g]] += values[asg[g]][g];
        }
        t
    };
    let base = totals(assignment);
    let count = n.pow(m as u32);
    for code in 0..count {
        let mut asg = vec![0; m];
        let mut c = code;
        for slot in asg.iter_mut() {
            *slot = c % n;
            c /= n;
        }
        let t = totals(&asg);
        let mut weakly = true;
        let mut strictly = false;
        for i in 0..n {
            weakly &= t[i] >= base[i];
            strictly |= t[i] > base[i];
        }
        if weakly && strictly {
            return true;
        }
    }
    false
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn pareto_matches_dominance_oracle(
        (raw, assignment) in (2usize..=3, 1usize..=8).prop_flat_map(|(n, m)| (
            proptest::collection::vec(proptest::collection::vec(0u32..10, m), n),
            proptest::collection::vec(0..n, m),
        ))
    ) {
        let values = normalized_rows(&raw);
        let inst = DiscreteInstance::new(values.clone()).unwrap();
        prop_assert_eq!(
            pareto_efficient_discrete(&inst, &assignment).unwrap(),
            !dominated_oracle(&values, &assignment)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perfect_witness_serves_every_subset(
        raw in (1usize..=3).prop_flat_map(|m| proptest::collection::vec(proptest::collection::vec(0u32..4, m), 2))
    ) {
        let inst = DiscreteInstance::new(normalized_rows(&raw)).unwrap();
        let r = perfect_division_search(&inst).unwrap();
        prop_assert_eq!(r.subsets.len(), 7);
        let all = [Property::Efficient, Property::EnvyFree, Property::Equitable];
        let top = r.subset(&all).unwrap().clone();
        prop_assert_eq!(top.satisfiable, r.perfect_found);
        for s in &r.subsets {
            let w = s.witness.as_ref();
            prop_assert_eq!(w.is_some(), s.satisfiable);
            if let Some(w) = w {
                let holds = s.properties.iter().all(|p| match p {
                    Property::Efficient => w.efficient,
                    Property::EnvyFree => w.envy_free,
                    Property::Equitable => w.equitable,
                });
                prop_assert!(holds);
                if r.perfect_found {
                    prop_assert!(w.efficient && w.envy_free && w.equitable);
                }
            }
            // anything satisfying a superset satisfies the subset
            for t in &r.subsets {
                if t.satisfiable && s.properties.iter().all(|p| t.properties.contains(p)) {
                    prop_assert!(s.satisfiable);
                }
            }
        }
    }
}

#[test]
fn envy_free_audits_are_proportional() {
    let vs = [
        labeled(ValuationSpec::uniform("a"), "a"),
        labeled(ValuationSpec::ramp("b", RampDirection::Increasing), "b"),
        labeled(ValuationSpec::sinusoid("c", 1.0, 0.5, 3, 0.0), "c"),
    ];
    let o = selfridge_conway(&vs[0], &vs[1], &vs[2]).unwrap();
    let r = audit(&o.allocation, &vs).unwrap();
    assert!(r.envy_free);
    assert!(r.proportional.iter().all(|p| *p));

    // permuting agents permutes the envy sign pattern
    let perm = [2usize, 0, 1];
    let mut a = o.allocation.clone();
    a.agents = perm
        .iter()
        .map(|&i| o.allocation.agents[i].clone())
        .collect();
    a.pieces = perm
        .iter()
        .map(|&i| o.allocation.pieces[i].clone())
        .collect();
    let pv: Vec<Valuation> = perm.iter().map(|&i| vs[i].clone()).collect();
    let rp = audit(&a, &pv).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(rp.envy[i][j] > rp.tol, r.envy[perm[i]][perm[j]] > r.tol);
        }
    }
}
