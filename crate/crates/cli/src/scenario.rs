//! Scenario files: agents, valuations, protocol defaults and optional game
//! data, in TOML.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use cakeshare_core::cake::{canonicalize, Allocation};
use cakeshare_core::games::{CurveFn, PayoffMatrix, ProposalTable, WaterSplitCurve};
use cakeshare_core::valuation::{normalize, DensityFamily, Valuation, ValuationSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Scenarios shipped inside the binary, by name.
pub const BUILTIN: [(&str, &str); 3] = [
    ("nile", include_str!("../scenarios/nile.toml")),
    ("nile-sine", include_str!("../scenarios/nile-sine.toml")),
    ("identical", include_str!("../scenarios/identical.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub resource: Resource,
    #[serde(default)]
    pub defaults: Defaults,
    pub agents: Vec<AgentConfig>,
    /// Pieces per agent id, for auditing a given division.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<BTreeMap<String, Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub water_curve: Option<CurveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposals: Option<ProposalConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resource {
    pub total: f64,
    pub unit: String,
}

impl Default for Resource {
    fn default() -> Self {
        Self {
            total: 100.0,
            unit: "BCM".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chooser_priority: Option<Vec<String>>,
    /// Number of equal intervals for Adjusted Winner.
    #[serde(default = "default_intervals")]
    pub intervals: usize,
}

fn default_intervals() -> usize {
    10
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            cutter: None,
            chooser_priority: None,
            intervals: default_intervals(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub valuation: DensityFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub players: Vec<String>,
    pub strategies: Vec<Vec<String>>,
    /// Payoff vectors keyed by strategy labels joined with `/`.
    pub payoffs: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    /// The agent whose share runs along the grid.
    pub upstream: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<f64>,
    #[serde(default = "default_curve_points")]
    pub points: usize,
    pub payoffs: BTreeMap<String, CurveFn>,
}

fn default_curve_points() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Row per proposing agent, keyed by agent id, in agent order.
    pub rows: BTreeMap<String, Vec<f64>>,
}

/// A validated scenario with normalized valuations.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub valuations: Vec<Valuation>,
    /// The bytes the scenario was read from.
    pub source: String,
}

impl Loaded {
    pub fn ids(&self) -> Vec<String> {
        self.scenario.agents.iter().map(|a| a.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Result<usize, CliError> {
        self.scenario
            .agents
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| CliError::Validation {
                field: "agent".into(),
                message: format!("no agent with id {id:?}"),
            })
    }

    pub fn valuation(&self, id: &str) -> Option<&Valuation> {
        self.valuations.iter().find(|v| v.label() == id)
    }

    pub fn allocation(&self) -> Result<Option<Allocation>, CliError> {
        let Some(pieces) = &self.scenario.allocation else {
            return Ok(None);
        };
        let ids = self.ids();
        let pieces = ids
            .iter()
            .map(|id| {
                let raw: Vec<(f64, f64)> = pieces
                    .get(id)
                    .map(|p| p.iter().map(|[a, b]| (*a, *b)).collect())
                    .unwrap_or_default();
                canonicalize(&raw).map_err(|e| CliError::Validation {
                    field: format!("allocation.{id}"),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(Allocation::new(ids, pieces)))
    }

    pub fn game(&self) -> Result<Option<PayoffMatrix>, CliError> {
        let Some(g) = &self.scenario.game else {
            return Ok(None);
        };
        PayoffMatrix::from_labeled(g.players.clone(), g.strategies.clone(), &g.payoffs)
            .map(Some)
            .map_err(|e| CliError::Validation {
                field: "game".into(),
                message: e.to_string(),
            })
    }

    pub fn water_curve(&self) -> Option<WaterSplitCurve> {
        let c = self.scenario.water_curve.as_ref()?;
        let total = c.total.unwrap_or(self.scenario.resource.total);
        let agents: Vec<String> = self
            .ids()
            .into_iter()
            .filter(|id| c.payoffs.contains_key(id))
            .collect();
        Some(WaterSplitCurve {
            total,
            grid: WaterSplitCurve::even_grid(total, c.points),
            payoffs: agents.iter().map(|id| c.payoffs[id].clone()).collect(),
            agents,
        })
    }

    pub fn proposal_table(&self) -> Option<ProposalTable> {
        let p = self.scenario.proposals.as_ref()?;
        let ids = self.ids();
        Some(ProposalTable {
            rows: ids.iter().map(|id| p.rows[id].clone()).collect(),
            agents: ids,
            total: self.scenario.resource.total,
        })
    }
}

/// Loads a built-in scenario by name, or a TOML file by path.
pub fn load_scenario(path_or_name: &str) -> Result<Loaded, CliError> {
    if let Some((_, text)) = BUILTIN.iter().find(|(name, _)| *name == path_or_name) {
        return parse_scenario(text, path_or_name);
    }
    let path = Path::new(path_or_name);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Read {
        path: path_or_name.to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, path_or_name)
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Loaded, CliError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .unwrap_or((0, 0));
        CliError::Parse {
            origin: origin.to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let valuations = validate(&scenario)?;
    Ok(Loaded {
        scenario,
        valuations,
        source: text.to_string(),
    })
}

/// TOML text that parses back to the same scenario.
pub fn to_toml(scenario: &Scenario) -> Result<String, CliError> {
    toml::to_string(scenario).map_err(|e| CliError::Validation {
        field: "scenario".into(),
        message: e.to_string(),
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

fn validate(s: &Scenario) -> Result<Vec<Valuation>, CliError> {
    if s.agents.is_empty() {
        return Err(invalid("agents", "at least one agent is required"));
    }
    let mut seen = HashSet::new();
    for a in &s.agents {
        if a.id.trim().is_empty() {
            return Err(invalid("agents.id", "agent ids must be nonempty"));
        }
        if !seen.insert(a.id.as_str()) {
            return Err(invalid(
                "agents.id",
                format!("duplicate agent id {:?}", a.id),
            ));
        }
    }
    let known = |field: &str, id: &str| {
        if seen.contains(id) {
            Ok(())
        } else {
            Err(invalid(field, format!("unknown agent {id:?}")))
        }
    };
    if !(s.resource.total > 0.0 && s.resource.total.is_finite()) {
        return Err(invalid("resource.total", "must be a positive number"));
    }
    if s.defaults.intervals == 0 {
        return Err(invalid("defaults.intervals", "must be at least 1"));
    }
    if let Some(c) = &s.defaults.cutter {
        known("defaults.cutter", c)?;
    }
    if let Some(order) = &s.defaults.chooser_priority {
        for id in order {
            known("defaults.chooser_priority", id)?;
        }
    }
    if let Some(pieces) = &s.allocation {
        for id in pieces.keys() {
            known("allocation", id)?;
        }
    }
    if let Some(c) = &s.water_curve {
        known("water_curve.upstream", &c.upstream)?;
        for id in c.payoffs.keys() {
            known("water_curve.payoffs", id)?;
        }
        if c.points < 2 {
            return Err(invalid("water_curve.points", "must be at least 2"));
        }
    }
    if let Some(p) = &s.proposals {
        for id in p.rows.keys() {
            known("proposals.rows", id)?;
        }
        for a in &s.agents {
            if !p.rows.contains_key(&a.id) {
                return Err(invalid(
                    "proposals.rows",
                    format!("missing row for {:?}", a.id),
                ));
            }
        }
    }
    if let Some(g) = &s.game {
        PayoffMatrix::from_labeled(g.players.clone(), g.strategies.clone(), &g.payoffs)
            .map_err(|e| invalid("game", e.to_string()))?;
    }
    s.agents
        .iter()
        .map(|a| {
            normalize(ValuationSpec::new(a.id.clone(), a.valuation.clone())).map_err(|source| {
                CliError::Valuation {
                    agent: a.id.clone(),
                    source,
                }
            })
        })
        .collect()
}
