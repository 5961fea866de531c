//! `circalloc`: fit utilities, allocate circuits and simulate a backbone.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "circalloc", version, allow_negative_numbers = true, about = "Fair circuit allocation and fluid simulation for backbone networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fit concave PWL utilities from historical snapshots.
    Fit,
    /// Solve the fair allocation and build circuits.
    Allocate,
    /// Turn destination flows and demands into per-pair circuits.
    Disaggregate,
    /// Sweep strategies over normalized loads.
    Simulate,
    /// Print a saved simulation report.
    Report,
    /// Write a synthetic backbone with traffic and a matching config.
    Synth,
}

/// Every flag overrides the config file key of the same name.
#[derive(Args)]
struct Overrides {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Set any configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long, global = true, value_name = "FILE")]
    topology: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    traffic_dir: Option<String>,
    #[arg(long, global = true)]
    units_scale: Option<String>,
    /// `FROM:INTO` node merge (repeatable).
    #[arg(long, global = true)]
    merge: Vec<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    segments: Option<String>,
    /// `realtime` or `history`.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// e.g. `Wed 15:00-15:30`.
    #[arg(long, global = true)]
    window: Option<String>,
    /// YYYY-MM-DD; history before, test from this date.
    #[arg(long, global = true)]
    split: Option<String>,
    #[arg(long, global = true)]
    snapshot: Option<String>,
    /// `greedy` or `proportional`.
    #[arg(long, global = true)]
    disaggregation: Option<String>,
    #[arg(long, global = true, value_name = "FILE")]
    utilities: Option<String>,
    #[arg(long, global = true, value_name = "FILE")]
    flows: Option<String>,
    #[arg(long, global = true, value_name = "FILE")]
    demand: Option<String>,
    #[arg(long, global = true, value_name = "FILE")]
    circuits: Option<String>,
    #[arg(long, global = true, value_name = "FILE")]
    input: Option<String>,
    /// Comma-separated load multiples.
    #[arg(long, global = true)]
    loads: Option<String>,
    /// Comma-separated labels such as `OSPF,RT-OptRR,HIST-NoRR`.
    #[arg(long, global = true)]
    strategies: Option<String>,
    #[arg(long, global = true)]
    trace_load: Option<String>,
    #[arg(long, global = true)]
    plots: bool,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    utilization: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text, &path.display().to_string())?;
        }
        let flags = [
            ("topology", &self.topology),
            ("traffic-dir", &self.traffic_dir),
            ("units-scale", &self.units_scale),
            ("alpha", &self.alpha),
            ("segments", &self.segments),
            ("mode", &self.mode),
            ("window", &self.window),
            ("split", &self.split),
            ("snapshot", &self.snapshot),
            ("disaggregation", &self.disaggregation),
            ("utilities", &self.utilities),
            ("flows", &self.flows),
            ("demand", &self.demand),
            ("circuits", &self.circuits),
            ("input", &self.input),
            ("loads", &self.loads),
            ("strategies", &self.strategies),
            ("trace-load", &self.trace_load),
            ("seed", &self.seed),
            ("utilization", &self.utilization),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{key}"))?;
            }
        }
        for m in &self.merge {
            cfg.set("merge", m).context("--merge")?;
        }
        if self.plots {
            cfg.plots = true;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set {kv:?}: expected KEY=VALUE"))?;
            cfg.set(k.trim(), v).with_context(|| format!("--set {kv}"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.opts.resolve()?;
    if cli.opts.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    match cli.command {
        Command::Fit => commands::fit(&cfg),
        Command::Allocate => commands::allocate(&cfg),
        Command::Disaggregate => commands::disaggregate_cmd(&cfg),
        Command::Simulate => commands::simulate_cmd(&cfg),
        Command::Report => commands::report(&cfg),
        Command::Synth => commands::synth(&cfg),
    }
}

/// 3 for solver failures, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let solver = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<circalloc::Error>(), Some(circalloc::Error::Solver(_))));
    if solver {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.opts.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
