use serde::Serialize;

use crate::valuation::{normalize, Valuation, ValuationSpec};

use super::{goods_allocation, ProtocolError, ProtocolOutcome, Step};

/// Points every agent distributes over the goods.
pub const POINT_BUDGET: f64 = 100.0;
const BUDGET_TOLERANCE: f64 = 1e-9;
/// Point totals this close count as equal for two agents.
const EQUAL_POINTS: f64 = 1e-9;
/// Spread at which the n-agent heuristic stops.
const HEURISTIC_SPREAD: f64 = 1e-6;
const HEURISTIC_MAX_ROUNDS: usize = 10_000;

/// Point bids of each agent over `m` equal-width goods of the cake.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteCake {
    agents: Vec<String>,
    bids: Vec<Vec<f64>>,
}

impl DiscreteCake {
    pub fn new(agents: Vec<String>, bids: Vec<Vec<f64>>) -> Result<Self, ProtocolError> {
        let invalid = |msg: String| Err(ProtocolError::InvalidBids(msg));
        if agents.len() != bids.len() {
            return invalid(format!(
                "{} agents but {} bid rows",
                agents.len(),
                bids.len()
            ));
        }
        let m = bids.first().map_or(0, Vec::len);
        if m == 0 {
            return invalid("at least one good is required".into());
        }
        for (name, row) in agents.iter().zip(&bids) {
            if row.len() != m {
                return invalid(format!("{name} bids on {} goods, expected {m}", row.len()));
            }
            if row.iter().any(|b| !b.is_finite() || *b < 0.0) {
                return invalid(format!("{name} has a negative or non-finite bid"));
            }
            let total: f64 = row.iter().sum();
            if (total - POINT_BUDGET).abs() > BUDGET_TOLERANCE {
                return invalid(format!("{name} bids sum to {total}, not {POINT_BUDGET}"));
            }
        }
        Ok(Self { agents, bids })
    }

    /// Bids each agent derives from its density over `m` equal intervals.
    pub fn from_valuations(valuations: &[Valuation], m: usize) -> Result<Self, ProtocolError> {
        Self::new(
            valuations.iter().map(|v| v.label().to_string()).collect(),
            valuations.iter().map(|v| discretize(v, m)).collect(),
        )
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn bids(&self) -> &[Vec<f64>] {
        &self.bids
    }

    pub fn goods(&self) -> usize {
        self.bids[0].len()
    }

    /// Piecewise-constant densities whose measure of a good is its bid / 100.
    pub fn bid_valuations(&self) -> Vec<Valuation> {
        let m = self.goods();
        self.agents
            .iter()
            .zip(&self.bids)
            .map(|(name, row)| {
                let mut breakpoints: Vec<(f64, f64)> = row
                    .iter()
                    .enumerate()
                    .map(|(g, b)| (g as f64 / m as f64, b * m as f64 / POINT_BUDGET))
                    .collect();
                breakpoints.push((1.0, 0.0));
                normalize(ValuationSpec::piecewise_constant(name.clone(), breakpoints))
                    .expect("bids sum to the budget")
            })
            .collect()
    }
}

/// Point bids over `m` equal intervals: `100 · v([(k-1)/m, k/m])`.
pub fn discretize(v: &Valuation, m: usize) -> Vec<f64> {
    let m = m.max(1);
    (0..m)
        .map(|k| {
            let lo = k as f64 / m as f64;
            let hi = (k + 1) as f64 / m as f64;
            POINT_BUDGET * v.measure_interval(lo, hi)
        })
        .collect()
}

struct Ledger<'a> {
    bids: &'a [Vec<f64>],
    /// `shares[g][i]`: fraction of good `g` held by agent `i`.
    shares: Vec<Vec<f64>>,
    trace: Vec<Step>,
}

impl<'a> Ledger<'a> {
    fn new(cake: &'a DiscreteCake) -> Self {
        Self {
            bids: &cake.bids,
            shares: vec![vec![0.0; cake.agents.len()]; cake.goods()],
            trace: Vec::new(),
        }
    }

    fn points(&self, agent: usize) -> f64 {
        self.shares
            .iter()
            .enumerate()
            .map(|(g, row)| row[agent] * self.bids[agent][g])
            .sum()
    }

    fn totals(&self) -> Vec<f64> {
        (0..self.bids.len()).map(|i| self.points(i)).collect()
    }

    /// Each good to its highest bidder. Tied goods are settled after the
    /// clear ones, each going to the tied agent with fewer points so far,
    /// then the lower index.
    fn award_initial(&mut self) {
        let n = self.bids.len();
        let mut running = vec![0.0; n];
        let mut ties = Vec::new();
        for g in 0..self.shares.len() {
            let top = (0..n)
                .map(|i| self.bids[i][g])
                .fold(f64::NEG_INFINITY, f64::max);
            let leaders: Vec<usize> = (0..n).filter(|&i| self.bids[i][g] == top).collect();
            if let [only] = leaders[..] {
                self.award(only, g, &mut running);
            } else {
                ties.push((g, leaders));
            }
        }
        for (g, leaders) in ties {
            let winner = leaders
                .into_iter()
                .min_by(|&a, &b| running[a].total_cmp(&running[b]).then(a.cmp(&b)))
                .expect("at least one leader");
            self.award(winner, g, &mut running);
        }
    }

    fn award(&mut self, agent: usize, good: usize, running: &mut [f64]) {
        self.shares[good][agent] = 1.0;
        running[agent] += self.bids[agent][good];
        self.trace.push(Step::Award { agent, good });
    }

    fn transfer(&mut self, good: usize, fraction: f64, from: usize, to: usize) {
        self.shares[good][from] -= fraction;
        self.shares[good][to] += fraction;
        self.trace.push(Step::Transfer {
            good,
            fraction,
            from,
            to,
        });
    }

    /// Goods `from` holds that `to` values, cheapest ratio `from/to` first;
    /// ties keep good order.
    fn transfer_order(&self, from: usize, to: usize) -> Vec<usize> {
        let mut goods: Vec<usize> = (0..self.shares.len())
            .filter(|&g| self.shares[g][from] > 0.0)
            .filter(|&g| self.bids[from][g] + self.bids[to][g] > 0.0)
            .collect();
        goods.sort_by(|&a, &b| {
            self.ratio(from, to, a)
                .total_cmp(&self.ratio(from, to, b))
                .then(a.cmp(&b))
        });
        goods
    }

    fn ratio(&self, from: usize, to: usize, g: usize) -> f64 {
        let (w, l) = (self.bids[from][g], self.bids[to][g]);
        if l > 0.0 {
            w / l
        } else {
            f64::INFINITY
        }
    }

    fn into_outcome(self, cake: &DiscreteCake, protocol: &str) -> ProtocolOutcome {
        let payoffs = self
            .totals()
            .into_iter()
            .map(|t| t / POINT_BUDGET)
            .collect();
        let allocation = goods_allocation(cake.agents.clone(), &self.shares);
        let mut outcome = ProtocolOutcome::new(protocol, allocation, payoffs, self.trace);
        outcome.goods = Some(cake.goods());
        outcome
    }
}

/// Two-party Adjusted Winner.
///
/// Goods go to the higher bidder; the agent with more points then hands
/// goods to the other in increasing order of (own bid / other's bid), whole
/// while that keeps it ahead and fractionally for the one good that makes
/// the totals equal. Outcome payoffs are point totals / 100.
pub fn adjusted_winner_2(cake: &DiscreteCake) -> Result<ProtocolOutcome, ProtocolError> {
    if cake.agents.len() != 2 {
        return Err(ProtocolError::WrongArity {
            expected: "2".into(),
            found: cake.agents.len(),
        });
    }
    let mut ledger = Ledger::new(cake);
    ledger.award_initial();
    let (a, b) = (ledger.points(0), ledger.points(1));
    if (a - b).abs() > EQUAL_POINTS {
        let (rich, poor) = if a > b { (0, 1) } else { (1, 0) };
        for g in ledger.transfer_order(rich, poor) {
            let (r, p) = (ledger.points(rich), ledger.points(poor));
            if r - p <= EQUAL_POINTS {
                break;
            }
            let (w, l) = (ledger.bids[rich][g], ledger.bids[poor][g]);
            if r - w >= p + l {
                ledger.transfer(g, 1.0, rich, poor);
            } else {
                ledger.transfer(g, (r - p) / (w + l), rich, poor);
                break;
            }
        }
    }
    Ok(ledger.into_outcome(cake, "adjusted-winner"))
}

/// Max-to-min transfer extension of Adjusted Winner to three or more agents.
///
/// After the highest-bidder award, the agent with the most points repeatedly
/// passes (part of) a good to the agent with the fewest, cheapest bid ratio
/// first, moving just enough to level the pair when possible. Stops once the
/// spread is at most 1e-6 or no transfer narrows it. Carries no envy-freeness
/// guarantee; the outcome is flagged heuristic.
pub fn adjusted_winner_n(cake: &DiscreteCake) -> Result<ProtocolOutcome, ProtocolError> {
    let n = cake.agents.len();
    if n < 3 {
        return Err(ProtocolError::WrongArity {
            expected: "at least 3".into(),
            found: n,
        });
    }
    let mut ledger = Ledger::new(cake);
    ledger.award_initial();
    for _ in 0..HEURISTIC_MAX_ROUNDS {
        let totals = ledger.totals();
        let (max_agent, min_agent) = extremes(&totals);
        let spread = totals[max_agent] - totals[min_agent];
        if spread <= HEURISTIC_SPREAD {
            break;
        }
        let mut moved = false;
        for g in ledger.transfer_order(max_agent, min_agent) {
            let (w, l) = (ledger.bids[max_agent][g], ledger.bids[min_agent][g]);
            let held = ledger.shares[g][max_agent];
            let level = (totals[max_agent] - totals[min_agent]) / (w + l);
            let fraction = level.min(held);
            let mut after = totals.clone();
            after[max_agent] -= fraction * w;
            after[min_agent] += fraction * l;
            let (hi, lo) = extremes(&after);
            if after[hi] - after[lo] < spread {
                ledger.transfer(g, fraction, max_agent, min_agent);
                moved = true;
                break;
            }
        }
        if !moved {
            break;
        }
    }
    let mut outcome = ledger.into_outcome(cake, "adjusted-winner-heuristic");
    outcome.heuristic = true;
    Ok(outcome)
}

/// (index of max, index of min), lowest index on ties.
fn extremes(totals: &[f64]) -> (usize, usize) {
    let mut hi = 0;
    let mut lo = 0;
    for (i, &t) in totals.iter().enumerate() {
        if t > totals[hi] {
            hi = i;
        }
        if t < totals[lo] {
            lo = i;
        }
    }
    (hi, lo)
}
