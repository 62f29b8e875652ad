//! The `influence` command-line tool: argument parsing and dispatch.

pub mod commands;
pub mod config;
pub mod inputs;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::inputs::Failure;
use crate::output::{OutputDir, Provenance, Table};

#[derive(Debug, Parser)]
#[command(name = "influence", version, about = "Influence dynamics in small teams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate a dynamics model and optionally write synthetic sessions.
    Simulate(CommonArgs),
    /// Forecast errors of the models and baselines on recorded sessions.
    Forecast(CommonArgs),
    /// Fit the estimators on a team split and report held-out errors.
    Fit(CommonArgs),
    /// Correlations, regressions and Granger tests over members.
    Analyze(CommonArgs),
    /// Interaction networks per team and round.
    Networks(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Root seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Session directory (overrides `data.sessions_dir`).
    #[arg(long)]
    pub sessions: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Forecast(_) => "forecast",
            Command::Fit(_) => "fit",
            Command::Analyze(_) => "analyze",
            Command::Networks(_) => "networks",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::Forecast(a)
            | Command::Fit(a)
            | Command::Analyze(a)
            | Command::Networks(a) => a,
        }
    }
}

/// Files written and teams that failed.
#[derive(Debug)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub failures: Vec<Failure>,
}

/// Resolves the configuration with command-line overrides applied.
pub fn resolve_config(args: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.sessions {
        cfg.data.sessions_dir = Some(d.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = resolve_config(cli.command.args())?;
    run_command(cli.command.name(), &cfg)
}

pub fn run_command(name: &'static str, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let mut out = OutputDir::new(cfg.out_dir.clone(), Provenance { command: name, config: cfg.clone() });
    let failures = match name {
        "simulate" => commands::simulate::run(cfg, &mut out)?,
        "forecast" => commands::forecast::run(cfg, &mut out)?,
        "fit" => commands::fit::run(cfg, &mut out)?,
        "analyze" => commands::analyze::run(cfg, &mut out)?,
        "networks" => commands::networks::run(cfg, &mut out)?,
        other => anyhow::bail!("unknown command {other}"),
    };
    if !failures.is_empty() {
        let mut t = Table::new(["team", "error"]);
        for f in &failures {
            t.push(vec![f.team.clone(), f.error.clone()]);
        }
        out.csv("failures.csv", &t)?;
    }
    Ok(Outcome { written: out.written().to_vec(), failures })
}
