use cakeshare_core::cake::{validate_allocation, Allocation};
use cakeshare_core::fairness::{audit, FairnessReport};
use cakeshare_core::games::{
    best_responses, improving_path, payoff_curve, proposal_table, pure_nash, PathStatus,
    PayoffMatrix,
};
use cakeshare_core::protocols::{
    adjusted_winner_2, adjusted_winner_n, cut_and_choose_2, cut_and_choose_3, maximin_split,
    payoffs_by_cutter, selfridge_conway, DiscreteCake, ProtocolOutcome,
};
use cakeshare_core::valuation::Valuation;
use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use crate::plot::{self, PlotKind};
use crate::report::{fmt_num, Report};
use crate::scenario::Loaded;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Cut-based division (cut and choose, Selfridge-Conway).
    Divide,
    /// Fairness audit of the scenario allocation, or of `divide` output.
    Audit,
    /// Adjusted Winner over equal intervals.
    Aw,
    /// Contiguous division maximizing the smallest value.
    Maximin,
    /// Pure Nash equilibria and best responses.
    Nash,
    /// Improving path from a starting profile.
    Path,
    /// Water-split payoff curves.
    Curve,
    /// Proposal table with each agent's preferred proposal.
    Proposals,
    /// Write plot tables as CSV.
    PlotData,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Divide,
        Command::Audit,
        Command::Aw,
        Command::Maximin,
        Command::Nash,
        Command::Path,
        Command::Curve,
        Command::Proposals,
        Command::PlotData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Divide => "divide",
            Command::Audit => "audit",
            Command::Aw => "aw",
            Command::Maximin => "maximin",
            Command::Nash => "nash",
            Command::Path => "path",
            Command::Curve => "curve",
            Command::Proposals => "proposals",
            Command::PlotData => "plot-data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Three-agent "I cut, you choose".
    Icyc,
    /// Two-agent cut and choose.
    Cutchoose2,
    SelfridgeConway,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub protocol: Option<Protocol>,
    pub cutter: Option<String>,
    pub m: Option<usize>,
    pub start: Option<String>,
    pub max_steps: Option<usize>,
    pub kind: Option<PlotKind>,
    pub fixed_order: bool,
}

/// A report plus any plot files (name, contents) it produced.
#[derive(Debug, Clone)]
pub struct Output {
    pub report: Report,
    pub files: Vec<(String, String)>,
}

pub const DEFAULT_MAX_STEPS: usize = 100;

pub fn run(command: Command, loaded: &Loaded, opts: &Options) -> Result<Output, CliError> {
    let mut report = Report::new(&loaded.scenario.name, command.name(), &loaded.source);
    let mut files = Vec::new();
    match command {
        Command::Divide => {
            let (outcome, role) = divide(loaded, opts, &mut report)?;
            report.line(role);
            outcome_section(loaded, &outcome, &mut report)?;
        }
        Command::Audit => {
            let allocation = match loaded.allocation()? {
                Some(a) => {
                    report.option("source", "scenario allocation");
                    report.line("allocation: from scenario");
                    a
                }
                None => {
                    let (outcome, role) = divide(loaded, opts, &mut report)?;
                    report.line(role);
                    outcome.allocation
                }
            };
            report.section("allocation", &allocation)?;
            let r = audit_against(loaded, &allocation)?;
            audit_lines(&r, &mut report);
            report.section("audit", &r)?;
        }
        Command::Aw => {
            let m = opts.m.unwrap_or(loaded.scenario.defaults.intervals);
            if m == 0 {
                return Err(CliError::BadOption("--m must be at least 1".into()));
            }
            report.option("m", m);
            let cake = DiscreteCake::from_valuations(&loaded.valuations, m)?;
            let outcome = if cake.agents().len() == 2 {
                adjusted_winner_2(&cake)?
            } else {
                adjusted_winner_n(&cake)?
            };
            report.line(format!(
                "{} over {m} intervals{}",
                outcome.protocol,
                if outcome.heuristic {
                    " (heuristic)"
                } else {
                    ""
                }
            ));
            report.section("bids", &cake)?;
            let bid_audit = audit(&outcome.allocation, &cake.bid_valuations())?;
            report.line(format!(
                "under bid measures: envy-free {}, equitable {}",
                bid_audit.envy_free, bid_audit.equitable
            ));
            report.section("audit_bids", &bid_audit)?;
            outcome_section(loaded, &outcome, &mut report)?;
        }
        Command::Maximin => {
            report.option("assignment_search", !opts.fixed_order);
            let outcome = maximin_split(&loaded.valuations, !opts.fixed_order)?;
            report.line(format!(
                "maximin objective {}",
                fmt_num(outcome.objective.unwrap_or(f64::NAN))
            ));
            outcome_section(loaded, &outcome, &mut report)?;
        }
        Command::Nash => {
            let m = require_game(loaded)?;
            let ne = pure_nash(&m);
            let labels: Vec<String> = ne.iter().map(|p| m.profile_label(p)).collect();
            report.line(if labels.is_empty() {
                "pure Nash equilibria: none".to_string()
            } else {
                format!("pure Nash equilibria: {}", labels.join(", "))
            });
            let table: Vec<_> = m
                .profiles()
                .map(|p| {
                    let best: serde_json::Map<String, serde_json::Value> = m
                        .players()
                        .iter()
                        .enumerate()
                        .map(|(pl, name)| {
                            let set = best_responses(&m, &p, pl).expect("valid profile");
                            let names: Vec<&str> = set
                                .iter()
                                .map(|&s| m.strategies()[pl][s].as_str())
                                .collect();
                            (name.clone(), json!(names))
                        })
                        .collect();
                    json!({
                        "profile": m.profile_label(&p),
                        "payoffs": m.payoff(&p),
                        "best_responses": best,
                    })
                })
                .collect();
            report.section("equilibria", &labels)?;
            report.section("profiles", &table)?;
        }
        Command::Path => {
            let m = require_game(loaded)?;
            let start = match &opts.start {
                Some(label) => m
                    .parse_profile(label)
                    .map_err(|e| CliError::BadOption(format!("--start: {e}")))?,
                None => vec![0; m.players().len()],
            };
            let max_steps = opts.max_steps.unwrap_or(DEFAULT_MAX_STEPS);
            if max_steps == 0 {
                return Err(CliError::BadOption("--max-steps must be at least 1".into()));
            }
            report.option("start", m.profile_label(&start));
            report.option("max_steps", max_steps);
            let path = improving_path(&m, &start, max_steps)?;
            report.line(format!(
                "start {} {}",
                m.profile_label(&start),
                tuple(m.payoff(&start))
            ));
            let steps: Vec<_> = path
                .steps
                .iter()
                .map(|s| {
                    report.line(format!(
                        "  {} {} -> {}: {} {}",
                        m.players()[s.player],
                        m.strategies()[s.player][s.from],
                        m.strategies()[s.player][s.to],
                        m.profile_label(&s.profile),
                        tuple(m.payoff(&s.profile))
                    ));
                    json!({
                        "player": m.players()[s.player],
                        "from": m.strategies()[s.player][s.from],
                        "to": m.strategies()[s.player][s.to],
                        "profile": m.profile_label(&s.profile),
                        "payoffs": m.payoff(&s.profile),
                    })
                })
                .collect();
            let status = match path.status {
                PathStatus::AtEquilibrium => "at-equilibrium",
                PathStatus::Cycle => "cycle",
                PathStatus::MaxSteps => "max-steps",
            };
            report.line(format!("status: {status}"));
            let cycle: Vec<String> = path.cycle.iter().map(|p| m.profile_label(p)).collect();
            if !cycle.is_empty() {
                report.line(format!("cycle: {}", cycle.join(" -> ")));
            }
            report.section(
                "path",
                json!({
                    "start": m.profile_label(&start),
                    "steps": steps,
                    "status": status,
                    "cycle": cycle,
                }),
            )?;
        }
        Command::Curve => {
            let c = loaded
                .water_curve()
                .ok_or_else(|| CliError::MissingSection("water_curve".into()))?;
            let t = payoff_curve(&c)?;
            for (a, f) in t.agents.iter().zip(&t.monotonicity) {
                let shape = match (f.nondecreasing, f.nonincreasing) {
                    (true, true) => "constant",
                    (true, false) => "nondecreasing",
                    (false, true) => "nonincreasing",
                    (false, false) => "neither",
                };
                report.line(format!("{a}: {shape}"));
            }
            report.section("curve", &t)?;
        }
        Command::Proposals => {
            let t = loaded
                .proposal_table()
                .ok_or_else(|| CliError::MissingSection("proposals".into()))?;
            let a = proposal_table(&t)?;
            for (i, row) in a.argmax.iter().enumerate() {
                let best: Vec<&str> = row.iter().map(|&j| a.agents[j].as_str()).collect();
                report.line(format!(
                    "{} proposes {}: best for {}{}",
                    a.agents[i],
                    tuple(&a.rows[i]),
                    best.join(", "),
                    if a.all_tie[i] { " (all tied)" } else { "" }
                ));
            }
            report.section("proposals", &a)?;
        }
        Command::PlotData => {
            let kinds: Vec<PlotKind> = match opts.kind {
                Some(k) => vec![k],
                None => PlotKind::ALL
                    .into_iter()
                    .filter(|k| plot_available(loaded, *k))
                    .collect(),
            };
            let mut listing = Vec::new();
            for k in kinds {
                let text = plot_data(loaded, k)?;
                let name = k.file_name();
                report.line(format!("{name}: {} rows", text.lines().count() - 1));
                listing.push(json!({
                    "kind": k.name(),
                    "file": name,
                    "rows": text.lines().count() - 1,
                    "sha256": crate::report::sha256_hex(text.as_bytes()),
                }));
                files.push((name, text));
            }
            report.section("files", &listing)?;
        }
    }
    Ok(Output { report, files })
}

fn tuple(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| fmt_num(*x)).collect();
    format!("({})", parts.join(", "))
}

fn require_game(loaded: &Loaded) -> Result<PayoffMatrix, CliError> {
    loaded
        .game()?
        .ok_or_else(|| CliError::MissingSection("game".into()))
}

fn plot_available(loaded: &Loaded, kind: PlotKind) -> bool {
    match kind {
        PlotKind::Densities => true,
        PlotKind::PayoffsByCutter => loaded.valuations.len() == 3,
        PlotKind::WaterCurve => loaded.scenario.water_curve.is_some(),
        PlotKind::ProposalHeatmap => loaded.scenario.proposals.is_some(),
    }
}

pub fn plot_data(loaded: &Loaded, kind: PlotKind) -> Result<String, CliError> {
    match kind {
        PlotKind::Densities => Ok(plot::densities(&loaded.valuations)),
        PlotKind::PayoffsByCutter => {
            if loaded.valuations.len() != 3 {
                return Err(CliError::MissingSection(
                    "payoffs-by-cutter needs exactly three agents".into(),
                ));
            }
            Ok(plot::payoffs_by_cutter(
                &loaded.ids(),
                &payoffs_by_cutter(&loaded.valuations)?,
            ))
        }
        PlotKind::WaterCurve => {
            let c = loaded
                .water_curve()
                .ok_or_else(|| CliError::MissingSection("water_curve".into()))?;
            Ok(plot::water_curve(&payoff_curve(&c)?))
        }
        PlotKind::ProposalHeatmap => {
            let t = loaded
                .proposal_table()
                .ok_or_else(|| CliError::MissingSection("proposals".into()))?;
            Ok(plot::proposal_heatmap(&proposal_table(&t)?))
        }
    }
}

/// Runs the selected cut-based protocol; returns the outcome and a summary line.
fn divide(
    loaded: &Loaded,
    opts: &Options,
    report: &mut Report,
) -> Result<(ProtocolOutcome, String), CliError> {
    let n = loaded.valuations.len();
    let protocol = match (opts.protocol, n) {
        (Some(p), _) => p,
        (None, 2) => Protocol::Cutchoose2,
        (None, 3) => Protocol::Icyc,
        (None, _) => {
            return Err(CliError::BadOption(format!(
                "no cut-and-choose protocol for {n} agents"
            )))
        }
    };
    let expected = if protocol == Protocol::Cutchoose2 {
        2
    } else {
        3
    };
    if n != expected {
        return Err(CliError::BadOption(format!(
            "{} needs {expected} agents, scenario has {n}",
            protocol_name(protocol)
        )));
    }
    let cutter_id = opts
        .cutter
        .clone()
        .or_else(|| loaded.scenario.defaults.cutter.clone())
        .unwrap_or_else(|| loaded.scenario.agents[0].id.clone());
    let cutter = loaded
        .index_of(&cutter_id)
        .map_err(|_| CliError::BadOption(format!("--cutter: no agent {cutter_id:?}")))?;
    let others = chooser_order(loaded, cutter);
    report.option("protocol", protocol);
    report.option("cutter", &cutter_id);

    let vs = &loaded.valuations;
    let outcome = match protocol {
        Protocol::Cutchoose2 => cut_and_choose_2(&vs[cutter], &vs[others[0]])?,
        Protocol::Icyc => {
            report.option(
                "chooser_priority",
                [&vs[others[0]].label(), &vs[others[1]].label()],
            );
            cut_and_choose_3(vs, cutter, (others[0], others[1]))?
        }
        Protocol::SelfridgeConway => selfridge_conway(&vs[cutter], &vs[others[0]], &vs[others[1]])?,
    };
    let role = match protocol {
        Protocol::SelfridgeConway => format!(
            "{}: {} divides, {} trims, {} chooses",
            outcome.protocol,
            cutter_id,
            vs[others[0]].label(),
            vs[others[1]].label()
        ),
        _ => format!("{}: {} cuts", outcome.protocol, cutter_id),
    };
    Ok((outcome, role))
}

fn protocol_name(p: Protocol) -> &'static str {
    match p {
        Protocol::Icyc => "icyc",
        Protocol::Cutchoose2 => "cutchoose2",
        Protocol::SelfridgeConway => "selfridge-conway",
    }
}

/// The non-cutters: configured priority first, then agent order.
fn chooser_order(loaded: &Loaded, cutter: usize) -> Vec<usize> {
    let mut order: Vec<usize> = loaded
        .scenario
        .defaults
        .chooser_priority
        .iter()
        .flatten()
        .filter_map(|id| loaded.index_of(id).ok())
        .filter(|&i| i != cutter)
        .collect();
    for i in 0..loaded.valuations.len() {
        if i != cutter && !order.contains(&i) {
            order.push(i);
        }
    }
    order
}

fn audit_against(loaded: &Loaded, allocation: &Allocation) -> Result<FairnessReport, CliError> {
    let vs: Vec<Valuation> = allocation
        .agents
        .iter()
        .map(|id| {
            loaded
                .valuation(id)
                .cloned()
                .ok_or_else(|| CliError::Validation {
                    field: "allocation".into(),
                    message: format!("no valuation for {id:?}"),
                })
        })
        .collect::<Result<_, _>>()?;
    Ok(audit(allocation, &vs)?)
}

fn audit_lines(r: &FairnessReport, report: &mut Report) {
    let proportional = r.proportional.iter().all(|p| *p);
    report.line(format!(
        "proportional {proportional}, envy-free {}, equitable {}, utilitarian total {}",
        r.envy_free,
        r.equitable,
        fmt_num(r.utilitarian_total)
    ));
    if !r.envy_free {
        report.line(format!("max envy {}", fmt_num(r.max_envy())));
    }
}

fn outcome_section(
    loaded: &Loaded,
    outcome: &ProtocolOutcome,
    report: &mut Report,
) -> Result<(), CliError> {
    let total = loaded.scenario.resource.total;
    let unit = &loaded.scenario.resource.unit;
    let check = validate_allocation(&outcome.allocation);
    if !check.passed {
        return Err(CliError::Compute(format!(
            "allocation failed validation: {check:?}"
        )));
    }
    for (i, id) in outcome.allocation.agents.iter().enumerate() {
        let piece: Vec<String> = outcome.allocation.pieces[i]
            .intervals()
            .iter()
            .map(|iv| format!("[{}, {}]", short(iv.lo()), short(iv.hi())))
            .collect();
        report.line(format!(
            "  {id:<12} {:>8}  {:>8} {unit}  {}",
            format!("{:.4}", outcome.payoffs[i]),
            format!("{:.2}", outcome.payoffs[i] * total),
            if piece.is_empty() {
                "(nothing)".to_string()
            } else {
                piece.join(" ")
            }
        ));
    }
    for note in &outcome.notes {
        report.line(format!("note: {note}"));
    }
    let scaled: serde_json::Map<String, serde_json::Value> = outcome
        .allocation
        .agents
        .iter()
        .zip(&outcome.payoffs)
        .map(|(id, p)| (id.clone(), json!(p * total)))
        .collect();
    let r = audit_against(loaded, &outcome.allocation)?;
    audit_lines(&r, report);
    report.section("outcome", outcome)?;
    report.section("scaled_payoffs", json!({ "unit": unit, "values": scaled }))?;
    report.section("validation", &check)?;
    report.section("audit", &r)?;
    Ok(())
}

fn short(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}
