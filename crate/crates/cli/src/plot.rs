//! Comma-separated tables for plotting, one header line then one row per sample.

use cakeshare_core::games::{AnnotatedProposals, CurveTable};
use cakeshare_core::valuation::Valuation;
use clap::ValueEnum;
use serde::Serialize;

use crate::report::fmt_num;

/// Density samples per valuation.
pub const DENSITY_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Densities,
    PayoffsByCutter,
    WaterCurve,
    ProposalHeatmap,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::Densities,
        PlotKind::PayoffsByCutter,
        PlotKind::WaterCurve,
        PlotKind::ProposalHeatmap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Densities => "densities",
            PlotKind::PayoffsByCutter => "payoffs-by-cutter",
            PlotKind::WaterCurve => "water-curve",
            PlotKind::ProposalHeatmap => "proposal-heatmap",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

fn table(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn header(first: &str, agents: &[String]) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain(agents.iter().cloned())
        .collect()
}

/// Densities at `DENSITY_SAMPLES` evenly spaced points from 0 to 1.
pub fn densities(valuations: &[Valuation]) -> String {
    let agents: Vec<String> = valuations.iter().map(|v| v.label().to_string()).collect();
    let last = (DENSITY_SAMPLES - 1) as f64;
    table(
        &header("x", &agents),
        (0..DENSITY_SAMPLES).map(|k| {
            let x = k as f64 / last;
            std::iter::once(fmt_num(x))
                .chain(valuations.iter().map(|v| fmt_num(v.density(x))))
                .collect()
        }),
    )
}

/// Row per cutter: every agent's payoff fraction.
pub fn payoffs_by_cutter(agents: &[String], rows: &[Vec<f64>]) -> String {
    table(
        &header("cutter", agents),
        agents.iter().zip(rows).map(|(cutter, row)| {
            std::iter::once(cutter.clone())
                .chain(row.iter().map(|x| fmt_num(*x)))
                .collect()
        }),
    )
}

pub fn water_curve(t: &CurveTable) -> String {
    table(
        &header("share", &t.agents),
        t.shares.iter().zip(&t.values).map(|(s, row)| {
            std::iter::once(fmt_num(*s))
                .chain(row.iter().map(|x| fmt_num(*x)))
                .collect()
        }),
    )
}

/// Row per proposer: proposed amounts as fractions of the total.
pub fn proposal_heatmap(p: &AnnotatedProposals) -> String {
    table(
        &header("proposer", &p.agents),
        p.agents.iter().zip(&p.intensities).map(|(a, row)| {
            std::iter::once(a.clone())
                .chain(row.iter().map(|x| fmt_num(*x)))
                .collect()
        }),
    )
}
