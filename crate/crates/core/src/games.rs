//! Finite strategic-form games, water-split payoff curves and proposal tables.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row sums of a proposal table must match the total within this.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;
/// Entries this close to a row's maximum share the argmax.
pub const ARGMAX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("unknown player index {0}")]
    UnknownPlayer(usize),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid payoff matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid payoff curve: {0}")]
    InvalidCurve(String),
    #[error("proposal row {row} sums to {sum}, expected {total}")]
    BadRowSum { row: usize, sum: f64, total: f64 },
    #[error("invalid proposal table: {0}")]
    InvalidTable(String),
}

/// A profile lists one strategy index per player.
pub type Profile = Vec<usize>;

/// Payoffs for every strategy profile of a finite game.
///
/// Profiles are stored in mixed radix with the last player varying fastest,
/// so for three binary players the order is `0/0/0, 0/0/1, 0/1/0, ...`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffMatrix {
    players: Vec<String>,
    strategies: Vec<Vec<String>>,
    payoffs: Vec<Vec<f64>>,
}

impl PayoffMatrix {
    pub fn new(
        players: Vec<String>,
        strategies: Vec<Vec<String>>,
        payoffs: Vec<Vec<f64>>,
    ) -> Result<Self, GameError> {
        let bad = |m: String| Err(GameError::InvalidMatrix(m));
        if players.is_empty() {
            return bad("no players".into());
        }
        if strategies.len() != players.len() {
            return bad(format!(
                "{} players but {} strategy sets",
                players.len(),
                strategies.len()
            ));
        }
        for (p, s) in players.iter().zip(&strategies) {
            if s.is_empty() {
                return bad(format!("player {p} has no strategies"));
            }
        }
        let size: usize = strategies.iter().map(Vec::len).product();
        if payoffs.len() != size {
            return bad(format!(
                "{size} profiles but {} payoff vectors",
                payoffs.len()
            ));
        }
        if let Some(v) = payoffs.iter().find(|v| v.len() != players.len()) {
            return bad(format!(
                "payoff vector {v:?} does not have one entry per player"
            ));
        }
        if payoffs.iter().flatten().any(|x| !x.is_finite()) {
            return bad("non-finite payoff".into());
        }
        Ok(Self {
            players,
            strategies,
            payoffs,
        })
    }

    /// Builds a matrix from payoffs keyed by strategy labels joined with `/`.
    pub fn from_labeled(
        players: Vec<String>,
        strategies: Vec<Vec<String>>,
        entries: &BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, GameError> {
        let shell = Self::new(
            players.clone(),
            strategies.clone(),
            vec![vec![0.0; players.len()]; strategies.iter().map(Vec::len).product()],
        )?;
        let mut payoffs: Vec<Option<Vec<f64>>> = vec![None; shell.profile_count()];
        for (key, value) in entries {
            let profile = shell.parse_profile(key)?;
            payoffs[shell.index_of(&profile)] = Some(value.clone());
        }
        let mut full = Vec::with_capacity(payoffs.len());
        for (i, p) in payoffs.into_iter().enumerate() {
            match p {
                Some(v) => full.push(v),
                None => {
                    return Err(GameError::InvalidMatrix(format!(
                        "missing payoffs for {}",
                        shell.profile_label(&shell.profile_at(i))
                    )))
                }
            }
        }
        Self::new(players, strategies, full)
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn strategies(&self) -> &[Vec<String>] {
        &self.strategies
    }

    pub fn profile_count(&self) -> usize {
        self.payoffs.len()
    }

    pub fn player_index(&self, name: &str) -> Option<usize> {
        self.players.iter().position(|p| p == name)
    }

    pub fn payoff(&self, profile: &[usize]) -> &[f64] {
        &self.payoffs[self.index_of(profile)]
    }

    /// All profiles in storage order.
    pub fn profiles(&self) -> impl Iterator<Item = Profile> + '_ {
        (0..self.profile_count()).map(|i| self.profile_at(i))
    }

    pub fn profile_label(&self, profile: &[usize]) -> String {
        profile
            .iter()
            .enumerate()
            .map(|(p, &s)| self.strategies[p][s].as_str())
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn parse_profile(&self, label: &str) -> Result<Profile, GameError> {
        let parts: Vec<&str> = label.split('/').map(str::trim).collect();
        if parts.len() != self.players.len() {
            return Err(GameError::InvalidProfile(format!(
                "{label:?} names {} strategies, expected {}",
                parts.len(),
                self.players.len()
            )));
        }
        parts
            .iter()
            .enumerate()
            .map(|(p, part)| {
                self.strategies[p]
                    .iter()
                    .position(|s| s == part)
                    .ok_or_else(|| {
                        GameError::InvalidProfile(format!(
                            "{part:?} is not a strategy of {}",
                            self.players[p]
                        ))
                    })
            })
            .collect()
    }

    /// Applies `x -> a * x + b` to one player's payoffs.
    pub fn affine(&self, player: usize, a: f64, b: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.payoffs {
            v[player] = a * v[player] + b;
        }
        out
    }

    fn index_of(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.strategies)
            .fold(0, |acc, (&s, set)| acc * set.len() + s)
    }

    fn profile_at(&self, mut index: usize) -> Profile {
        let mut out = vec![0; self.players.len()];
        for (p, set) in self.strategies.iter().enumerate().rev() {
            out[p] = index % set.len();
            index /= set.len();
        }
        out
    }

    fn check_profile(&self, profile: &[usize]) -> Result<(), GameError> {
        if profile.len() != self.players.len()
            || profile
                .iter()
                .zip(&self.strategies)
                .any(|(&s, set)| s >= set.len())
        {
            return Err(GameError::InvalidProfile(format!("{profile:?}")));
        }
        Ok(())
    }

    fn best_set(&self, profile: &[usize], player: usize) -> Vec<usize> {
        let mut alt = profile.to_vec();
        let values: Vec<f64> = (0..self.strategies[player].len())
            .map(|s| {
                alt[player] = s;
                self.payoff(&alt)[player]
            })
            .collect();
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..values.len()).filter(|&s| values[s] == top).collect()
    }
}

/// The strategies maximizing `player`'s payoff with everyone else fixed.
pub fn best_responses(
    m: &PayoffMatrix,
    profile: &[usize],
    player: usize,
) -> Result<Vec<usize>, GameError> {
    if player >= m.players.len() {
        return Err(GameError::UnknownPlayer(player));
    }
    m.check_profile(profile)?;
    Ok(m.best_set(profile, player))
}

/// Profiles where no player has a strictly improving unilateral deviation.
///
/// Each player's best-response sets are computed once per context (the
/// strategies of everyone else); a profile is an equilibrium when every
/// player's strategy lies in its set.
pub fn pure_nash(m: &PayoffMatrix) -> Vec<Profile> {
    let n = m.players.len();
    let mut best: Vec<HashMap<Vec<usize>, Vec<usize>>> = vec![HashMap::new(); n];
    for profile in m.profiles() {
        for (p, table) in best.iter_mut().enumerate() {
            let mut ctx = profile.clone();
            ctx[p] = usize::MAX;
            table.entry(ctx).or_insert_with(|| m.best_set(&profile, p));
        }
    }
    m.profiles()
        .filter(|profile| {
            (0..n).all(|p| {
                let mut ctx = profile.clone();
                ctx[p] = usize::MAX;
                best[p][&ctx].contains(&profile[p])
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathStatus {
    AtEquilibrium,
    Cycle,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub player: usize,
    pub from: usize,
    pub to: usize,
    /// The profile after the move.
    pub profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovingPath {
    pub start: Profile,
    pub steps: Vec<Deviation>,
    pub status: PathStatus,
    /// For a cycle, the profiles on it starting from the first repeated one.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cycle: Vec<Profile>,
}

/// Strict best-response dynamics from `start`.
///
/// At each step the first player (in matrix order) that can strictly improve
/// switches to its lowest-index best response. Stops at an equilibrium, on
/// revisiting a profile, or after `max_steps` moves.
pub fn improving_path(
    m: &PayoffMatrix,
    start: &[usize],
    max_steps: usize,
) -> Result<ImprovingPath, GameError> {
    m.check_profile(start)?;
    let mut current = start.to_vec();
    let mut visited: Vec<Profile> = vec![current.clone()];
    let mut steps = Vec::new();
    loop {
        let mover = (0..m.players.len()).find_map(|p| {
            let best = m.best_set(&current, p);
            let mut alt = current.clone();
            alt[p] = best[0];
            (m.payoff(&alt)[p] > m.payoff(&current)[p]).then_some((p, best[0]))
        });
        let Some((player, to)) = mover else {
            return Ok(ImprovingPath {
                start: start.to_vec(),
                steps,
                status: PathStatus::AtEquilibrium,
                cycle: Vec::new(),
            });
        };
        if steps.len() >= max_steps {
            return Ok(ImprovingPath {
                start: start.to_vec(),
                steps,
                status: PathStatus::MaxSteps,
                cycle: Vec::new(),
            });
        }
        let from = current[player];
        current[player] = to;
        steps.push(Deviation {
            player,
            from,
            to,
            profile: current.clone(),
        });
        if let Some(first) = visited.iter().position(|p| *p == current) {
            return Ok(ImprovingPath {
                start: start.to_vec(),
                steps,
                status: PathStatus::Cycle,
                cycle: visited[first..].to_vec(),
            });
        }
        visited.push(current.clone());
    }
}

/// Which side of the split a payoff function reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// The upstream agent's share.
    Share,
    /// What is left for everyone else: `total - share`.
    Remainder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveFn {
    /// `intercept + slope * x`.
    Affine {
        #[serde(default)]
        intercept: f64,
        slope: f64,
        side: Side,
    },
    /// `scale * (x / total)^exponent`.
    Power {
        scale: f64,
        exponent: f64,
        side: Side,
    },
}

impl CurveFn {
    pub fn eval(&self, share: f64, total: f64) -> f64 {
        let pick = |side: Side| match side {
            Side::Share => share,
            Side::Remainder => total - share,
        };
        match *self {
            CurveFn::Affine {
                intercept,
                slope,
                side,
            } => intercept + slope * pick(side),
            CurveFn::Power {
                scale,
                exponent,
                side,
            } => scale * (pick(side) / total).max(0.0).powf(exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterSplitCurve {
    pub total: f64,
    /// Upstream shares, ascending, within `[0, total]`.
    pub grid: Vec<f64>,
    pub agents: Vec<String>,
    pub payoffs: Vec<CurveFn>,
}

impl WaterSplitCurve {
    /// `points` evenly spaced shares from 0 to `total`.
    pub fn even_grid(total: f64, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => (0..points)
                .map(|i| total * i as f64 / (points - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Monotonicity {
    pub nondecreasing: bool,
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTable {
    pub agents: Vec<String>,
    pub shares: Vec<f64>,
    /// `values[k][a]`: agent `a`'s payoff at `shares[k]`.
    pub values: Vec<Vec<f64>>,
    pub monotonicity: Vec<Monotonicity>,
}

pub fn payoff_curve(c: &WaterSplitCurve) -> Result<CurveTable, GameError> {
    let bad = |m: String| Err(GameError::InvalidCurve(m));
    if !(c.total > 0.0 && c.total.is_finite()) {
        return bad(format!("total must be positive, got {}", c.total));
    }
    if c.agents.len() != c.payoffs.len() {
        return bad(format!(
            "{} agents but {} payoff functions",
            c.agents.len(),
            c.payoffs.len()
        ));
    }
    if c.grid.windows(2).any(|w| w[1] < w[0]) {
        return bad("grid is not ascending".into());
    }
    if c.grid.iter().any(|s| !(0.0..=c.total).contains(s)) {
        return bad(format!("grid leaves [0, {}]", c.total));
    }
    let values: Vec<Vec<f64>> = c
        .grid
        .iter()
        .map(|&s| c.payoffs.iter().map(|f| f.eval(s, c.total)).collect())
        .collect();
    let monotonicity = (0..c.agents.len())
        .map(|a| Monotonicity {
            nondecreasing: values.windows(2).all(|w| w[1][a] >= w[0][a]),
            nonincreasing: values.windows(2).all(|w| w[1][a] <= w[0][a]),
        })
        .collect();
    Ok(CurveTable {
        agents: c.agents.clone(),
        shares: c.grid.clone(),
        values,
        monotonicity,
    })
}

/// Row `i` is what agent `i` proposes each agent receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalTable {
    pub agents: Vec<String>,
    pub total: f64,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatedProposals {
    pub agents: Vec<String>,
    pub total: f64,
    pub rows: Vec<Vec<f64>>,
    /// Columns attaining each row's maximum.
    pub argmax: Vec<Vec<usize>>,
    /// Rows whose entries are all tied.
    pub all_tie: Vec<bool>,
    /// `rows[i][j] / total`.
    pub intensities: Vec<Vec<f64>>,
}

pub fn proposal_table(t: &ProposalTable) -> Result<AnnotatedProposals, GameError> {
    let n = t.agents.len();
    if t.rows.len() != n || t.rows.iter().any(|r| r.len() != n) {
        return Err(GameError::InvalidTable(format!(
            "expected a {n}x{n} table of proposals"
        )));
    }
    if t.total.is_nan() || t.total <= 0.0 {
        return Err(GameError::InvalidTable(format!(
            "total must be positive, got {}",
            t.total
        )));
    }
    for (row, r) in t.rows.iter().enumerate() {
        let sum: f64 = r.iter().sum();
        if (sum - t.total).abs() > ROW_SUM_TOLERANCE || r.iter().any(|x| *x < 0.0) {
            return Err(GameError::BadRowSum {
                row,
                sum,
                total: t.total,
            });
        }
    }
    let argmax: Vec<Vec<usize>> = t
        .rows
        .iter()
        .map(|r| {
            let top = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..n).filter(|&j| top - r[j] <= ARGMAX_TOLERANCE).collect()
        })
        .collect();
    Ok(AnnotatedProposals {
        agents: t.agents.clone(),
        total: t.total,
        rows: t.rows.clone(),
        all_tie: argmax.iter().map(|a| a.len() == n).collect(),
        argmax,
        intensities: t
            .rows
            .iter()
            .map(|r| r.iter().map(|x| x / t.total).collect())
            .collect(),
    })
}
