use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cxflow_core::config::{parse_config, ScenarioConfig};
use cxflow_core::experiment::{
    curves_csv, geh_csv, rollout_csv, run_eval, run_sweep, run_validate_demand, summary_csv, sweep_csv, write_atomic,
    DEMAND_WINDOW_S,
};
use cxflow_core::learn::checkpoint;
use cxflow_core::training::train;
use cxflow_core::{Error, Result};

#[derive(Parser)]
#[command(name = "cxflow", version, about = "Mixed-autonomy intersection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `run.repeats`.
    #[arg(long)]
    repeats: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the shared Stop/Go policy; writes checkpoint.cxf and curves.csv.
    Train(Common),
    /// Evaluate a controller; writes rollout_<k>.csv and summary.csv.
    Eval(Common),
    /// Evaluate each value of `sweep.values`; writes sweep.csv.
    Sweep(Common),
    /// Evaluate a scenario with events; like eval with an event column.
    Scenario(Common),
    /// Compare simulated entrance counts with the configured demand; writes geh.csv.
    ValidateDemand(Common),
}

fn load(c: &Common) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(&c.config)?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(r) = c.repeats {
        if r == 0 {
            return Err(Error::InvalidArgument("--repeats must be positive".into()));
        }
        cfg.repeats = r;
    }
    fs::create_dir_all(&c.out)?;
    fs::write(c.out.join("manifest.txt"), cfg.manifest())?;
    Ok(cfg)
}

fn eval(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let rollouts = run_eval(cfg)?;
    for (k, r) in rollouts.iter().enumerate() {
        fs::write(out.join(format!("rollout_{k}.csv")), rollout_csv(cfg, &r.log))?;
    }
    let rows: Vec<_> = rollouts.into_iter().map(|r| r.summary).collect();
    write_atomic(&out.join("summary.csv"), &summary_csv(&rows))?;
    for (k, r) in rows.iter().enumerate() {
        eprintln!(
            "rollout {k} seed {}: awt {:.2} s, congested {}, conflict rate {}",
            r.seed,
            r.awt,
            r.congested,
            r.conflict_rate.map_or("n/a".to_string(), |c| format!("{c:.4}"))
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = load(&c)?;
            let out = train(&cfg.sim_config(), &cfg.learn, cfg.seed, None, |e| {
                eprintln!(
                    "epoch {}: cumulative wait {:.0}, conflicts {}/{}, epsilon {:.3}{}",
                    e.epoch,
                    e.cumulative_wait,
                    e.conflicts,
                    e.decisions,
                    e.epsilon,
                    if e.early_stop { ", stopped early" } else { "" }
                );
            })?;
            checkpoint::save(&c.out.join("checkpoint.cxf"), cfg.mode.directions() as u32, &out.learner.online)?;
            write_atomic(&c.out.join("curves.csv"), &curves_csv(&out.curves))?;
        }
        Command::Eval(c) | Command::Scenario(c) => {
            let cfg = load(&c)?;
            eval(&cfg, &c.out)?;
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let rows = run_sweep(&cfg)?;
            write_atomic(&c.out.join("sweep.csv"), &sweep_csv(&rows))?;
        }
        Command::ValidateDemand(c) => {
            let cfg = load(&c)?;
            let report = run_validate_demand(&cfg, DEMAND_WINDOW_S)?;
            write_atomic(&c.out.join("geh.csv"), &geh_csv(&report))?;
            eprintln!("mean GEH {:.3}, {}", report.mean, if report.passes() { "pass" } else { "fail" });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
