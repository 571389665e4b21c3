use std::path::PathBuf;
use std::process::ExitCode;

use cakeshare_cli::commands::{run, Command, Options, Protocol};
use cakeshare_cli::plot::PlotKind;
use cakeshare_cli::scenario::load_scenario;
use cakeshare_cli::CliError;
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Machine,
}

/// Fair division of a shared resource.
#[derive(Debug, Parser)]
#[command(name = "cakeshare", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long, global = true, default_value = "nile")]
    scenario: String,
    #[arg(long, global = true, value_enum, default_value = "human")]
    format: Format,
    /// Directory for plot-data files.
    #[arg(long, global = true, default_value = "plot-data")]
    out: PathBuf,
    #[arg(long, value_enum)]
    protocol: Option<Protocol>,
    #[arg(long)]
    cutter: Option<String>,
    /// Number of equal intervals for adjusted winner.
    #[arg(long)]
    m: Option<usize>,
    /// Starting profile for `path`, e.g. E1/A1/S1.
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, value_enum)]
    kind: Option<PlotKind>,
    /// Keep agents in scenario order left to right in `maximin`.
    #[arg(long)]
    fixed_order: bool,
}

fn execute(args: &Args) -> Result<String, CliError> {
    let loaded = load_scenario(&args.scenario)?;
    let opts = Options {
        protocol: args.protocol,
        cutter: args.cutter.clone(),
        m: args.m,
        start: args.start.clone(),
        max_steps: args.max_steps,
        kind: args.kind,
        fixed_order: args.fixed_order,
    };
    let out = run(args.command, &loaded, &opts)?;
    if !out.files.is_empty() {
        let write_err = |e: std::io::Error| CliError::Write {
            path: args.out.display().to_string(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(&args.out).map_err(write_err)?;
        for (name, contents) in &out.files {
            let path = args.out.join(name);
            std::fs::write(&path, contents).map_err(|e| CliError::Write {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
    }
    Ok(match args.format {
        Format::Human => out.report.human(),
        Format::Machine => out.report.machine(),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
