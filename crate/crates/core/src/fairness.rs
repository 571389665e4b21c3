//! Fairness audits of continuous allocations and exhaustive property
//! searches over small discrete instances.

use serde::Serialize;
use thiserror::Error;

use crate::cake::Allocation;
use crate::valuation::Valuation;

/// Tolerance for proportionality, envy and equitability in audits.
pub const AUDIT_TOLERANCE: f64 = 1e-9;
/// Largest number of whole-good assignments enumerated exhaustively.
pub const MAX_ASSIGNMENTS: u64 = 2_000_000;
/// Largest candidate space `perfect_division_search` will walk.
pub const MAX_CANDIDATES: u64 = 5_000_000;
/// Fraction grid for the single split good.
pub const SPLIT_GRID: u32 = 100;
/// Equitability tolerance in the discrete search.
pub const EQUITABLE_TOLERANCE: f64 = 1e-6;
/// Values are compared on this integer grid when testing dominance.
const DOMINANCE_QUANTUM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FairnessError {
    #[error("{agents} agents but {valuations} valuations")]
    ArityMismatch { agents: usize, valuations: usize },
    #[error("search space of {size} candidates exceeds the limit of {limit}")]
    TooLarge { size: u64, limit: u64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub agents: Vec<String>,
    /// `values[i][j]`: agent `i`'s value of agent `j`'s piece.
    pub values: Vec<Vec<f64>>,
    pub proportional: Vec<bool>,
    /// `envy[i][j] = values[i][j] - values[i][i]`.
    pub envy: Vec<Vec<f64>>,
    pub envy_free: bool,
    pub equitable: bool,
    pub utilitarian_total: f64,
    pub tol: f64,
}

impl FairnessReport {
    pub fn own_values(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.values[i][i]).collect()
    }

    pub fn max_envy(&self) -> f64 {
        self.envy
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Proportionality, envy, equitability and utilitarian welfare of an allocation.
pub fn audit(
    allocation: &Allocation,
    valuations: &[Valuation],
) -> Result<FairnessReport, FairnessError> {
    let n = allocation.pieces.len();
    if valuations.len() != n || allocation.agents.len() != n {
        return Err(FairnessError::ArityMismatch {
            agents: n,
            valuations: valuations.len(),
        });
    }
    let tol = AUDIT_TOLERANCE;
    let values: Vec<Vec<f64>> = valuations
        .iter()
        .map(|v| allocation.pieces.iter().map(|p| v.measure(p)).collect())
        .collect();
    let envy: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        values[i][j] - values[i][i]
                    }
                })
                .collect()
        })
        .collect();
    let own: Vec<f64> = (0..n).map(|i| values[i][i]).collect();
    let share = 1.0 / n as f64;
    let proportional = own.iter().map(|v| *v >= share - tol).collect();
    let envy_free = envy.iter().flatten().all(|e| *e <= tol);
    let hi = own.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = own.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FairnessReport {
        agents: allocation.agents.clone(),
        values,
        proportional,
        envy,
        envy_free,
        equitable: n == 0 || hi - lo <= tol,
        utilitarian_total: own.iter().sum(),
        tol,
    })
}

/// Agents' values for a set of indivisible goods; each row sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteInstance {
    values: Vec<Vec<f64>>,
}

impl DiscreteInstance {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self, FairnessError> {
        let bad = |m: String| Err(FairnessError::InvalidInstance(m));
        let m = values.first().map_or(0, Vec::len);
        if values.is_empty() || m == 0 {
            return bad("need at least one agent and one good".into());
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != m {
                return bad(format!("row {i} has {} goods, expected {m}", row.len()));
            }
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return bad(format!("row {i} has a negative or non-finite value"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return bad(format!("row {i} sums to {s}"));
            }
        }
        Ok(Self { values })
    }

    pub fn agents(&self) -> usize {
        self.values.len()
    }

    pub fn goods(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    fn bundle_values(&self, shares: &[Vec<f64>]) -> Vec<Vec<f64>> {
        // [i][j]: agent i's value of agent j's bundle
        let n = self.agents();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        shares
                            .iter()
                            .enumerate()
                            .map(|(g, row)| row[j] * self.values[i][g])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

fn assignment_count(n: usize, m: usize) -> u64 {
    (0..m).fold(1u64, |acc, _| acc.saturating_mul(n as u64))
}

/// Decodes the `index`-th assignment in mixed radix, good 0 least significant.
fn decode(index: u64, n: usize, m: usize, out: &mut [usize]) {
    let mut rest = index;
    for slot in out.iter_mut().take(m) {
        *slot = (rest % n as u64) as usize;
        rest /= n as u64;
    }
}

/// True when no whole-good reassignment makes some agent better off
/// without making anyone worse off. Decided by enumerating all `n^m`
/// assignments.
pub fn pareto_efficient_discrete(
    instance: &DiscreteInstance,
    assignment: &[usize],
) -> Result<bool, FairnessError> {
    let (n, m) = (instance.agents(), instance.goods());
    if assignment.len() != m || assignment.iter().any(|&a| a >= n) {
        return Err(FairnessError::InvalidInstance(
            "assignment must name one existing agent per good".into(),
        ));
    }
    let size = assignment_count(n, m);
    if size > MAX_ASSIGNMENTS {
        return Err(FairnessError::TooLarge {
            size,
            limit: MAX_ASSIGNMENTS,
        });
    }
    let totals_of = |asg: &[usize]| {
        let mut t = vec![0.0; n];
        for (g, &a) in asg.iter().enumerate() {
            t[a] += instance.values[a][g];
        }
        t
    };
    let base = totals_of(assignment);
    let mut alt = vec![0usize; m];
    for idx in 0..size {
        decode(idx, n, m, &mut alt);
        let t = totals_of(&alt);
        let weakly = t.iter().zip(&base).all(|(x, b)| *x >= *b);
        let strictly = t.iter().zip(&base).any(|(x, b)| *x > *b);
        if weakly && strictly {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Efficient,
    EnvyFree,
    Equitable,
}

/// One candidate division: `shares[g][i]` is agent `i`'s fraction of good `g`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub shares: Vec<Vec<f64>>,
    /// Each agent's value of its own bundle.
    pub values: Vec<f64>,
    pub efficient: bool,
    pub envy_free: bool,
    pub equitable: bool,
}

impl Witness {
    fn has(&self, p: Property) -> bool {
        match p {
            Property::Efficient => self.efficient,
            Property::EnvyFree => self.envy_free,
            Property::Equitable => self.equitable,
        }
    }

    fn count(&self) -> usize {
        [self.efficient, self.envy_free, self.equitable]
            .iter()
            .filter(|b| **b)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetResult {
    pub properties: Vec<Property>,
    pub satisfiable: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfectionReport {
    pub candidates: u64,
    /// Description of the searched space; efficiency is relative to it.
    pub scope: String,
    /// The seven nonempty subsets of {efficient, envy-free, equitable}.
    pub subsets: Vec<SubsetResult>,
    pub perfect_found: bool,
}

impl PerfectionReport {
    pub fn subset(&self, props: &[Property]) -> Option<&SubsetResult> {
        self.subsets.iter().find(|s| {
            s.properties.len() == props.len() && props.iter().all(|p| s.properties.contains(p))
        })
    }
}

/// Candidate space: every whole-good assignment, plus every assignment in
/// which exactly one good is divided among the agents in multiples of
/// `1 / SPLIT_GRID`.
fn enumerate_candidates(instance: &DiscreteInstance) -> Vec<Vec<Vec<f64>>> {
    let (n, m) = (instance.agents(), instance.goods());
    let mut out = Vec::new();
    let mut asg = vec![0usize; m];
    for idx in 0..assignment_count(n, m) {
        decode(idx, n, m, &mut asg);
        out.push(whole_shares(&asg, n));
    }
    let splits = compositions(SPLIT_GRID, n);
    for split_good in 0..m {
        let others = m - 1;
        let mut rest = vec![0usize; others];
        for idx in 0..assignment_count(n, others) {
            decode(idx, n, others, &mut rest);
            for split in &splits {
                // whole-good assignments are already in the space
                if split.iter().filter(|&&k| k > 0).count() < 2 {
                    continue;
                }
                let mut shares = vec![vec![0.0; n]; m];
                let mut r = rest.iter();
                for (g, row) in shares.iter_mut().enumerate() {
                    if g == split_good {
                        for (i, &k) in split.iter().enumerate() {
                            row[i] = f64::from(k) / f64::from(SPLIT_GRID);
                        }
                    } else {
                        row[*r.next().expect("one owner per other good")] = 1.0;
                    }
                }
                out.push(shares);
            }
        }
    }
    out
}

fn whole_shares(asg: &[usize], n: usize) -> Vec<Vec<f64>> {
    asg.iter()
        .map(|&a| {
            let mut row = vec![0.0; n];
            row[a] = 1.0;
            row
        })
        .collect()
}

/// All ways to write `total` as an ordered sum of `parts` nonnegative integers.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut tail in compositions(total - first, parts - 1) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

fn candidate_count(n: usize, m: usize) -> u64 {
    let whole = assignment_count(n, m);
    // compositions of SPLIT_GRID into n parts with at least two nonzero
    let all = binomial(u64::from(SPLIT_GRID) + n as u64 - 1, n as u64 - 1);
    let multi = all - n as u64;
    whole.saturating_add(
        (m as u64)
            .saturating_mul(assignment_count(n, m - 1))
            .saturating_mul(multi),
    )
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Marks which points are not strictly dominated by another point.
///
/// Points are quantized to integers first. Sorting lexicographically in
/// descending order puts every dominator before the points it dominates, so
/// each point only needs to be checked against what came before; a
/// Fenwick tree over the second coordinate answers "largest third
/// coordinate among earlier points whose second coordinate is at least
/// mine". Handles up to three agents.
fn pareto_flags(points: &[Vec<f64>]) -> Vec<bool> {
    let q: Vec<[i64; 3]> = points
        .iter()
        .map(|p| {
            let mut k = [0i64; 3];
            for (slot, v) in k.iter_mut().zip(p) {
                *slot = (v / DOMINANCE_QUANTUM).round() as i64;
            }
            k
        })
        .collect();
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[b].cmp(&q[a]));

    let mut ys: Vec<i64> = q.iter().map(|k| k[1]).collect();
    ys.sort_unstable_by(|a, b| b.cmp(a));
    ys.dedup();
    // rank 1 = largest second coordinate
    let rank = |y: i64| ys.partition_point(|&v| v > y) + 1;
    let mut tree = vec![i64::MIN; ys.len() + 1];

    let mut efficient = vec![false; q.len()];
    let mut i = 0;
    while i < order.len() {
        // identical points share a verdict and never dominate each other
        let mut j = i;
        while j < order.len() && q[order[j]] == q[order[i]] {
            j += 1;
        }
        let k = q[order[i]];
        let r = rank(k[1]);
        let mut best = i64::MIN;
        let mut idx = r;
        while idx > 0 {
            best = best.max(tree[idx]);
            idx -= idx & idx.wrapping_neg();
        }
        let dominated = best >= k[2];
        for &o in &order[i..j] {
            efficient[o] = !dominated;
        }
        let mut idx = r;
        while idx < tree.len() {
            tree[idx] = tree[idx].max(k[2]);
            idx += idx & idx.wrapping_neg();
        }
        i = j;
    }
    efficient
}

/// Searches the candidate space for divisions that are efficient (among the
/// candidates), envy-free and equitable, in every combination.
///
/// Each subset's witness is the candidate satisfying it that has the most
/// properties overall, earliest in enumeration order on ties; so when a
/// perfect division exists it is the witness for every subset.
pub fn perfect_division_search(
    instance: &DiscreteInstance,
) -> Result<PerfectionReport, FairnessError> {
    let (n, m) = (instance.agents(), instance.goods());
    if n > 3 {
        return Err(FairnessError::TooLarge {
            size: n as u64,
            limit: 3,
        });
    }
    let size = assignment_count(n, m);
    if size > MAX_ASSIGNMENTS {
        return Err(FairnessError::TooLarge {
            size,
            limit: MAX_ASSIGNMENTS,
        });
    }
    let count = candidate_count(n, m);
    if count > MAX_CANDIDATES {
        return Err(FairnessError::TooLarge {
            size: count,
            limit: MAX_CANDIDATES,
        });
    }

    let candidates = enumerate_candidates(instance);
    let bundle: Vec<Vec<Vec<f64>>> = candidates
        .iter()
        .map(|s| instance.bundle_values(s))
        .collect();
    let own: Vec<Vec<f64>> = bundle
        .iter()
        .map(|b| (0..n).map(|i| b[i][i]).collect())
        .collect();
    let efficient = pareto_flags(&own);

    let witnesses = candidates.into_iter().enumerate().map(|(c, shares)| {
        let b = &bundle[c];
        let envy_free = (0..n).all(|i| (0..n).all(|j| b[i][j] <= b[i][i] + AUDIT_TOLERANCE));
        let hi = own[c].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = own[c].iter().copied().fold(f64::INFINITY, f64::min);
        Witness {
            shares,
            values: own[c].clone(),
            efficient: efficient[c],
            envy_free,
            equitable: hi - lo <= EQUITABLE_TOLERANCE,
        }
    });

    let subsets_props: Vec<Vec<Property>> = (1u8..8)
        .map(|mask| {
            [Property::Efficient, Property::EnvyFree, Property::Equitable]
                .into_iter()
                .enumerate()
                .filter(|(bit, _)| mask & (1 << bit) != 0)
                .map(|(_, p)| p)
                .collect()
        })
        .collect();
    let mut best: Vec<Option<Witness>> = vec![None; subsets_props.len()];
    for w in witnesses {
        for (s, props) in subsets_props.iter().enumerate() {
            if props.iter().all(|p| w.has(*p))
                && best[s].as_ref().is_none_or(|b| w.count() > b.count())
            {
                best[s] = Some(w.clone());
            }
        }
    }
    let subsets: Vec<SubsetResult> = subsets_props
        .into_iter()
        .zip(best)
        .map(|(properties, witness)| SubsetResult {
            properties,
            satisfiable: witness.is_some(),
            witness,
        })
        .collect();
    let perfect_found = subsets
        .iter()
        .find(|s| s.properties.len() == 3)
        .is_some_and(|s| s.satisfiable);
    Ok(PerfectionReport {
        candidates: count,
        scope: format!(
            "{n}^{m} whole-good assignments plus single-good splits on a 1/{SPLIT_GRID} grid; \
             efficiency is relative to this space"
        ),
        subsets,
        perfect_found,
    })
}

/// Three agents and four goods with no division in the searched space that
/// is efficient, envy-free and equitable at once, while efficient+equitable
/// and envy-free+equitable divisions both exist. Found by random search over
/// rows with entries in tenths; no such instance turned up with three goods.
pub fn no_perfect_division_instance() -> DiscreteInstance {
    DiscreteInstance::new(NO_PERFECT_ROWS.iter().map(|r| r.to_vec()).collect()).expect("valid rows")
}

const NO_PERFECT_ROWS: [[f64; 4]; 3] = [
    [0.6, 0.0, 0.1, 0.3],
    [0.6, 0.1, 0.0, 0.3],
    [0.2, 0.1, 0.3, 0.4],
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cake::canonicalize;
    use crate::valuation::{normalize, ValuationSpec};

    fn uniform(n: usize) -> Vec<Valuation> {
        (0..n)
            .map(|i| normalize(ValuationSpec::uniform(format!("a{i}"))).unwrap())
            .collect()
    }

    fn alloc(pieces: &[&[(f64, f64)]]) -> Allocation {
        Allocation::new(
            (0..pieces.len()).map(|i| format!("a{i}")).collect(),
            pieces.iter().map(|p| canonicalize(p).unwrap()).collect(),
        )
    }

    #[test]
    fn equal_thirds_are_fair() {
        let a = alloc(&[
            &[(0.0, 1.0 / 3.0)],
            &[(1.0 / 3.0, 2.0 / 3.0)],
            &[(2.0 / 3.0, 1.0)],
        ]);
        let r = audit(&a, &uniform(3)).unwrap();
        assert_eq!(r.proportional, vec![true; 3]);
        assert!(r.envy_free && r.equitable);
        assert!((r.utilitarian_total - 1.0).abs() < 1e-12);
        for i in 0..3 {
            assert_eq!(r.envy[i][i], 0.0);
        }
    }

    #[test]
    fn one_agent_takes_all() {
        let a = alloc(&[&[(0.0, 1.0)], &[], &[]]);
        let r = audit(&a, &uniform(3)).unwrap();
        assert_eq!(r.proportional, vec![true, false, false]);
        assert!(!r.envy_free && !r.equitable);
        assert!((r.max_envy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn audit_arity() {
        let a = alloc(&[&[(0.0, 1.0)], &[]]);
        assert!(matches!(
            audit(&a, &uniform(3)),
            Err(FairnessError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn pareto_examples() {
        let inst = DiscreteInstance::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        assert!(pareto_efficient_discrete(&inst, &[0, 1]).unwrap());
        assert!(!pareto_efficient_discrete(&inst, &[1, 0]).unwrap());
        assert!(pareto_efficient_discrete(&inst, &[0, 2]).is_err());
    }

    #[test]
    fn pareto_too_large() {
        let row = vec![1.0 / 14.0; 14];
        let inst = DiscreteInstance::new(vec![row.clone(), row.clone(), row]).unwrap();
        assert!(matches!(
            pareto_efficient_discrete(&inst, &[0; 14]),
            Err(FairnessError::TooLarge { .. })
        ));
        assert!(perfect_division_search(&inst).is_err());
    }

    #[test]
    fn instance_validation() {
        assert!(DiscreteInstance::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(DiscreteInstance::new(vec![vec![1.2, -0.2]]).is_err());
        assert!(DiscreteInstance::new(vec![vec![1.0], vec![0.5, 0.5]]).is_err());
        assert!(DiscreteInstance::new(vec![]).is_err());
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(100, 3).len(), 5151);
        assert_eq!(binomial(102, 2), 5151);
        assert_eq!(candidate_count(3, 3), 27 + 3 * 9 * (5151 - 3));
    }

    #[test]
    fn pareto_flags_small() {
        let pts = vec![
            vec![1.0, 0.0],
            vec![0.5, 0.5],
            vec![0.4, 0.4],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        ];
        assert_eq!(pareto_flags(&pts), vec![true, true, false, true, true]);
    }

    #[test]
    fn pareto_flags_match_pairwise_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for dims in 1..=3 {
            let pts: Vec<Vec<f64>> = (0..400)
                .map(|_| {
                    (0..dims)
                        .map(|_| f64::from(rng.gen_range(0..8u8)) / 8.0)
                        .collect()
                })
                .collect();
            let brute: Vec<bool> = pts
                .iter()
                .map(|p| {
                    !pts.iter().any(|q| {
                        q.iter().zip(p).all(|(a, b)| a >= b) && q.iter().zip(p).any(|(a, b)| a > b)
                    })
                })
                .collect();
            assert_eq!(pareto_flags(&pts), brute, "dims {dims}");
        }
    }

    #[test]
    fn identical_rows_split_a_single_good() {
        let inst = DiscreteInstance::new(vec![vec![1.0], vec![1.0]]).unwrap();
        let r = perfect_division_search(&inst).unwrap();
        assert!(r.perfect_found);
        let w = r
            .subset(&[Property::Efficient])
            .unwrap()
            .witness
            .as_ref()
            .unwrap();
        assert_eq!(w.shares, vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn identical_rows_whole_goods() {
        let inst = DiscreteInstance::new(vec![vec![0.2, 0.3, 0.5], vec![0.2, 0.3, 0.5]]).unwrap();
        assert!(perfect_division_search(&inst).unwrap().perfect_found);
    }

    #[test]
    fn disjoint_supports_are_perfect() {
        let inst = DiscreteInstance::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let r = perfect_division_search(&inst).unwrap();
        assert!(r.perfect_found);
        let w = r.subsets[6].witness.as_ref().unwrap();
        assert_eq!(w.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn shipped_instance_has_no_perfect_division() {
        let r = perfect_division_search(&no_perfect_division_instance()).unwrap();
        assert!(!r.perfect_found);
        for props in [
            &[Property::Efficient, Property::Equitable][..],
            &[Property::EnvyFree, Property::Equitable][..],
        ] {
            assert!(r.subset(props).unwrap().satisfiable, "{props:?}");
        }
        let ee = r
            .subset(&[Property::Efficient, Property::Equitable])
            .unwrap();
        let w = ee.witness.as_ref().unwrap();
        assert!(!w.envy_free);
        assert!(
            w.values.iter().all(|v| (v - 0.42).abs() < 1e-9),
            "{:?}",
            w.values
        );
        let fe = r
            .subset(&[Property::EnvyFree, Property::Equitable])
            .unwrap();
        let w = fe.witness.as_ref().unwrap();
        assert!(!w.efficient);
        assert!(
            w.values.iter().all(|v| (v - 0.4).abs() < 1e-9),
            "{:?}",
            w.values
        );
    }
}
