//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config_with, ConfigDefaults, RunConfig};
use crate::error::{Error, Result};
use crate::integrate::ControlTrajectory;
use crate::octl::simulate;
use crate::output::{
    cost_history_table, costate_table, gnuplot_script, heat_table, summary_table, trajectory_table,
    OutputSet,
};
use crate::scenarios::{run_scenario_full, run_scenarios, DrugMask};
use crate::validate::{doubling_metric, heat_sweep, DEFAULT_DOUBLING_TOLERANCE};

pub const THREADS_ENV: &str = "LEPRA_OCTL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "lepra-octl",
    version,
    about = "Leprosy cytokine model and multi-drug optimal control"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Parameter preset name or parameter file; overrides the config.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "PATH")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the untreated model.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the optimal control problem for one regimen.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Drugs to administer, e.g. `rifampin,dapsone`.
        #[arg(long)]
        drugs: Option<DrugMask>,
    },
    /// Sweep two parameters and record B on the observation day.
    Heatmap {
        #[command(flatten)]
        common: Common,
        /// Parameter pair `X,Y`.
        #[arg(long, default_value = "alpha,gamma")]
        pair: String,
    },
    /// Run all eight regimens and summarise them.
    Compare {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, defaults: ConfigDefaults) -> Result<RunConfig> {
    let (text, base) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (text, base)
        }
        None => (String::new(), PathBuf::from(".")),
    };
    let mut cfg = parse_config_with(&text, defaults, common.preset.as_deref(), &base)?;
    if let Some(dir) = &common.out_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn parse_pair(pair: &str) -> Result<(String, String)> {
    match pair.split_once(',') {
        Some((x, y)) if !x.trim().is_empty() && !y.trim().is_empty() => {
            Ok((x.trim().to_string(), y.trim().to_string()))
        }
        _ => Err(Error::Invalid(format!(
            "--pair expects `X,Y`, got `{pair}`"
        ))),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            Error::Invalid(format!(
                "{THREADS_ENV} must be a positive integer, got `{raw}`"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))
}

/// Executes a parsed command and returns the files it wrote.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let pool = thread_pool()?;
    pool.install(|| execute(cli.command))
}

fn execute(command: Command) -> Result<Vec<PathBuf>> {
    match command {
        Command::Simulate { common } => {
            let cfg = load(&common, ConfigDefaults::SIMULATION)?;
            let controls = ControlTrajectory::zeros(cfg.mesh()?);
            let state = simulate(&cfg.initial_state, &cfg.params, &controls)?;
            let mut out = OutputSet::create(&cfg.output_dir)?;
            out.text("config.echo", &cfg.to_config_text())?;
            let (h, rows) = trajectory_table(&state, None)?;
            out.csv("simulate.csv", &h, &rows)?;
            Ok(out.commit())
        }
        Command::Optimize { common, drugs } => {
            let mut cfg = load(&common, ConfigDefaults::SIMULATION)?;
            if let Some(mask) = drugs {
                cfg.drugs = mask;
            }
            let octl = cfg.octl()?;
            let result =
                run_scenario_full(cfg.drugs, &cfg.initial_state, &cfg.params, &octl)?.result;
            if !result.converged {
                eprintln!(
                    "warning: optimizer stopped after {} iterations without meeting the tolerance",
                    result.iterations
                );
            }
            println!(
                "regimen {}: J = {} after {} iterations (converged: {})",
                cfg.drugs.id(),
                result.final_cost(),
                result.iterations,
                result.converged
            );
            let mut out = OutputSet::create(&cfg.output_dir)?;
            out.text("config.echo", &cfg.to_config_text())?;
            let (h, rows) = trajectory_table(&result.state, Some(&result.controls))?;
            out.csv("optimize_state.csv", &h, &rows)?;
            let (h, rows) = costate_table(&result.costate);
            out.csv("optimize_costate.csv", &h, &rows)?;
            let (h, rows) = cost_history_table(&result);
            out.csv("optimize_cost_history.csv", &h, &rows)?;
            Ok(out.commit())
        }
        Command::Heatmap { common, pair } => {
            let cfg = load(&common, ConfigDefaults::VALIDATION)?;
            let (x, y) = parse_pair(&pair)?;
            let spec = cfg.sweep_spec(&x, &y)?;
            let matrix = heat_sweep(&spec)?;
            let b0 = spec.initial_state.b();
            if b0 > 0.0 {
                let s = doubling_metric(&matrix, b0, DEFAULT_DOUBLING_TOLERANCE)?;
                println!(
                    "{x} x {y}: B(day {}) in [{}, {}], {:.1}% of cells within {}% of 2*B0 = {}",
                    spec.observe_day,
                    s.min,
                    s.max,
                    100.0 * s.fraction,
                    100.0 * DEFAULT_DOUBLING_TOLERANCE,
                    2.0 * b0
                );
            }
            let stem = format!("heatmap_{x}_{y}");
            let mut out = OutputSet::create(&cfg.output_dir)?;
            out.text("config.echo", &cfg.to_config_text())?;
            let (h, rows) = heat_table(&matrix);
            out.csv(&format!("{stem}.csv"), &h, &rows)?;
            out.text(
                &format!("{stem}.gp"),
                &gnuplot_script(&matrix, &format!("{stem}.csv"), &format!("{stem}.png")),
            )?;
            Ok(out.commit())
        }
        Command::Compare { common } => {
            let cfg = load(&common, ConfigDefaults::SIMULATION)?;
            let octl = cfg.octl()?;
            let runs = run_scenarios(
                &DrugMask::all_regimens(),
                &cfg.initial_state,
                &cfg.params,
                &octl,
            )?;
            let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
            for r in &reports {
                if !r.converged {
                    eprintln!(
                        "warning: {} did not converge in {} iterations",
                        r.id, r.iterations
                    );
                }
                println!(
                    "{:<30} J = {:<14.6} I(T) = {:<12.6} B(T) = {:.6}",
                    r.id,
                    r.cost,
                    r.final_state.i(),
                    r.final_state.b()
                );
            }
            let mut out = OutputSet::create(&cfg.output_dir)?;
            out.text("config.echo", &cfg.to_config_text())?;
            let (h, rows) = summary_table(&reports)?;
            out.csv("compare_summary.csv", &h, &rows)?;
            for run in &runs {
                let (h, rows) = trajectory_table(run.state(), Some(run.controls()))?;
                out.csv(&format!("scenario_{}.csv", run.report.id), &h, &rows)?;
            }
            Ok(out.commit())
        }
    }
}
