//! `protofield`: config-driven runner for the effective-potential pipeline.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical or I/O failure,
//! 4 verification failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod failure;
mod output;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use protofield_core::ProbMode;

use failure::{io, Failure, Kind};
use output::OutDir;
use run::{Flags, Loaded, Overrides};

/// Output directory used when neither `--out-dir` nor the environment sets one.
const DEFAULT_OUT_DIR: &str = "out";
const OUT_DIR_ENV: &str = "PROTOFIELD_OUT_DIR";

#[derive(Parser)]
#[command(name = "protofield", version, about = "Effective-potential workbench for two coupled fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Beat length T.
    #[arg(long, global = true)]
    cycles: Option<u64>,
    #[arg(long, global = true, value_enum)]
    prob_mode: Option<ModeArg>,
    /// EP hierarchy depth.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..=2))]
    depth: Option<u32>,
    /// Defaults to $PROTOFIELD_OUT_DIR, then `out`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Spectrum, states, realisations and density tables.
    Solve,
    /// `solve` plus a reduction-event trajectory.
    Beat,
    /// Oracle comparisons, count accounting and rule checks.
    Verify,
    /// EP of depth 2 (or `--depth`).
    Hierarchy,
    /// Aggregate the JSON summaries already in the output directory.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Beat => "beat",
            Command::Verify => "verify",
            Command::Hierarchy => "hierarchy",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Uniform,
    Grouped,
    Born,
}

impl From<ModeArg> for ProbMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Uniform => ProbMode::Uniform,
            ModeArg::Grouped => ProbMode::Grouped,
            ModeArg::Born => ProbMode::Born,
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn load(cli: &Cli) -> Result<Loaded, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::new("config", Kind::Config, "--config is required"))?;
    let ov = Overrides {
        seed: cli.seed,
        cycles: cli.cycles,
        prob_mode: cli.prob_mode.map(Into::into),
        depth: cli.depth,
    };
    run::load(path, &ov)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cmd = cli.command;
    let mut out = OutDir::create(&out_dir(cli)).map_err(io("output directory"))?;
    let mut flags = Flags::new();
    if let Command::Report = cmd {
        let summary = run::report(&out)?;
        out.json("report.json", &summary).map_err(io("write report"))?;
        return run::write_manifest(cmd.name(), None, &mut out, &flags);
    }

    let loaded = load(cli)?;
    let run = &loaded.config.run;
    let sol = run::solve_config(&loaded.config)?;
    let mut verdict = Ok(());
    match cmd {
        Command::Solve | Command::Beat => {
            run::write_solution(&sol, run, &mut out)?;
            if run.depth == 2 {
                let h = run::hierarchy(&sol, run, 2)?;
                out.json("hierarchy.json", &h).map_err(io("write hierarchy"))?;
            }
            if let Command::Beat = cmd {
                run::write_beat(&sol, run, &mut out, &mut flags)?;
            } else {
                flags.insert("beat".into(), "not run".into());
            }
        }
        Command::Verify => {
            let (report, accounting) = verify::verify(&sol, run)?;
            out.json("verify.json", &report).map_err(io("write verify"))?;
            out.json("accounting.json", &accounting).map_err(io("write accounting"))?;
            for c in &report.checks {
                let v = match (c.pass, c.enforced) {
                    (true, _) => "pass",
                    (false, true) => "fail",
                    (false, false) => "fail (informational)",
                };
                flags.insert(c.name.to_string(), v.into());
                println!("{:<22} {}", c.name, v.to_uppercase());
            }
            if !report.pass {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| c.enforced && !c.pass)
                    .map(|c| c.name)
                    .collect();
                verdict = Err(Failure::new(
                    "verify",
                    Kind::Verification,
                    format!("failed checks: {}", failed.join(", ")),
                ));
            }
        }
        Command::Hierarchy => {
            let depth = cli.depth.unwrap_or(2);
            let h = run::hierarchy(&sol, run, depth)?;
            if let Some(c) = h.truncated_check() {
                flags.insert("truncated_check".into(), if c.pass { "pass" } else { "fail" }.into());
            }
            out.json("hierarchy.json", &h).map_err(io("write hierarchy"))?;
        }
        Command::Report => unreachable!(),
    }
    run::write_manifest(cmd.name(), Some(&loaded), &mut out, &flags)?;
    verdict
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
