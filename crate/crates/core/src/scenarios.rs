//! Drug-regimen scenarios: masks over the three drugs, per-scenario
//! summaries, rankings and sign comparisons against the untreated baseline.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrate::{cost_integral, ControlTrajectory, StateTrajectory};
use crate::model::{Control, Drug, ModelParams, StateVec, N_STATE};
use crate::octl::{fbsm_solve, simulate, OctlConfig, OctlResult};

/// Which drugs are administered. A drug's controls switch together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DrugMask {
    pub rifampin: bool,
    pub dapsone: bool,
    pub clofazimine: bool,
}

impl DrugMask {
    pub const NONE: DrugMask = DrugMask {
        rifampin: false,
        dapsone: false,
        clofazimine: false,
    };

    pub const ALL: DrugMask = DrugMask {
        rifampin: true,
        dapsone: true,
        clofazimine: true,
    };

    pub fn only(drug: Drug) -> Self {
        Self::NONE.with(drug)
    }

    pub fn with(mut self, drug: Drug) -> Self {
        match drug {
            Drug::Rifampin => self.rifampin = true,
            Drug::Dapsone => self.dapsone = true,
            Drug::Clofazimine => self.clofazimine = true,
        }
        self
    }

    pub fn has(&self, drug: Drug) -> bool {
        match drug {
            Drug::Rifampin => self.rifampin,
            Drug::Dapsone => self.dapsone,
            Drug::Clofazimine => self.clofazimine,
        }
    }

    pub fn is_active(&self, c: Control) -> bool {
        self.has(c.drug())
    }

    pub fn is_none(&self) -> bool {
        *self == Self::NONE
    }

    /// `none`, a single drug name, or drug names joined by `+`.
    pub fn id(&self) -> String {
        let names: Vec<_> = Drug::ALL
            .into_iter()
            .filter(|d| self.has(*d))
            .map(Drug::name)
            .collect();
        if names.is_empty() {
            "none".to_string()
        } else {
            names.join("+")
        }
    }

    /// The eight regimens: none, three singles, three pairs, full therapy.
    pub fn all_regimens() -> [DrugMask; 8] {
        use Drug::*;
        [
            Self::NONE,
            Self::only(Rifampin),
            Self::only(Dapsone),
            Self::only(Clofazimine),
            Self::only(Rifampin).with(Dapsone),
            Self::only(Rifampin).with(Clofazimine),
            Self::only(Dapsone).with(Clofazimine),
            Self::ALL,
        ]
    }
}

impl fmt::Display for DrugMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Parses `none` or drug names separated by `,` or `+`.
impl FromStr for DrugMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "none" || s.is_empty() {
            return Ok(Self::NONE);
        }
        s.split([',', '+'])
            .map(|name| name.trim().parse::<Drug>())
            .try_fold(Self::NONE, |mask, drug| Ok(mask.with(drug?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trend {
    Increasing,
    Decreasing,
    Flat,
}

impl Trend {
    pub const FLAT_THRESHOLD: f64 = 1e-9;

    pub fn of_change(change: f64) -> Self {
        if change.abs() < Self::FLAT_THRESHOLD {
            Trend::Flat
        } else if change > 0.0 {
            Trend::Increasing
        } else {
            Trend::Decreasing
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Trend::Increasing => "+",
            Trend::Decreasing => "-",
            Trend::Flat => "0",
        }
    }
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub id: String,
    pub mask: DrugMask,
    pub final_state: StateVec,
    pub avg_i: f64,
    pub avg_b: f64,
    pub cost: f64,
    /// Final minus initial for the six cytokines, in state order.
    pub cytokine_trends: [Trend; 6],
    pub converged: bool,
    pub iterations: usize,
}

impl ScenarioReport {
    pub fn trend(&self, state_index: usize) -> Trend {
        assert!((StateVec::IFN_GAMMA..N_STATE).contains(&state_index));
        self.cytokine_trends[state_index - StateVec::IFN_GAMMA]
    }

    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::FinalI => self.final_state.i(),
            Metric::FinalB => self.final_state.b(),
            Metric::AvgI => self.avg_i,
            Metric::AvgB => self.avg_b,
        }
    }

    fn from_run(mask: DrugMask, run: &OctlResult) -> Self {
        let first = run.state.first();
        let last = run.state.last();
        let cytokine_trends = std::array::from_fn(|k| Trend::of_change(last[k + 3] - first[k + 3]));
        ScenarioReport {
            id: mask.id(),
            mask,
            final_state: StateVec(*last),
            avg_i: run.state.time_average(StateVec::I),
            avg_b: run.state.time_average(StateVec::B),
            cost: run.final_cost(),
            cytokine_trends,
            converged: run.converged,
            iterations: run.iterations,
        }
    }
}

/// A scenario's summary plus the trajectories it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub result: OctlResult,
}

impl ScenarioRun {
    pub fn state(&self) -> &StateTrajectory {
        &self.result.state
    }

    pub fn controls(&self) -> &ControlTrajectory {
        &self.result.controls
    }
}

/// Simulates one regimen. The untreated regimen bypasses the optimizer.
pub fn run_scenario_full(
    mask: DrugMask,
    x0: &StateVec,
    p: &ModelParams,
    cfg: &OctlConfig,
) -> Result<ScenarioRun> {
    let cfg = OctlConfig {
        mask,
        ..cfg.clone()
    };
    let result = if mask.is_none() {
        cfg.validate()?;
        let controls = ControlTrajectory::zeros(cfg.mesh);
        let state = simulate(x0, p, &controls)?;
        let costate = crate::octl::solve_costate(&state, &controls, p, cfg.adjoint)?;
        let cost = cost_integral(&state, &controls, &cfg.weights)?;
        OctlResult {
            state,
            costate,
            controls,
            cost_history: vec![cost],
            thetas: Vec::new(),
            converged: true,
            iterations: 0,
        }
    } else {
        fbsm_solve(x0, p, &cfg)?
    };
    Ok(ScenarioRun {
        report: ScenarioReport::from_run(mask, &result),
        result,
    })
}

pub fn run_scenario(
    mask: DrugMask,
    x0: &StateVec,
    p: &ModelParams,
    cfg: &OctlConfig,
) -> Result<ScenarioReport> {
    run_scenario_full(mask, x0, p, cfg).map(|r| r.report)
}

/// Runs several regimens concurrently; output order follows `masks`.
pub fn run_scenarios(
    masks: &[DrugMask],
    x0: &StateVec,
    p: &ModelParams,
    cfg: &OctlConfig,
) -> Result<Vec<ScenarioRun>> {
    masks
        .par_iter()
        .map(|&mask| run_scenario_full(mask, x0, p, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    FinalI,
    FinalB,
    AvgI,
    AvgB,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final_I" => Ok(Metric::FinalI),
            "final_B" => Ok(Metric::FinalB),
            "avg_I" => Ok(Metric::AvgI),
            "avg_B" => Ok(Metric::AvgB),
            other => Err(Error::Invalid(format!("unknown metric `{other}`"))),
        }
    }
}

/// Scenario ids ordered by `metric`, lowest (most effective) first; ties by id.
pub fn compare_scenarios(reports: &[ScenarioReport], metric: Metric) -> Vec<String> {
    let mut order: Vec<&ScenarioReport> = reports.iter().collect();
    order.sort_by(|a, b| {
        a.metric(metric)
            .partial_cmp(&b.metric(metric))
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    order.into_iter().map(|r| r.id.clone()).collect()
}

/// Sign of `S(T) − S_untreated(T)` for every report, the baseline included.
pub fn susceptible_direction(reports: &[ScenarioReport]) -> Result<Vec<(String, Trend)>> {
    let baseline = reports
        .iter()
        .find(|r| r.mask.is_none())
        .ok_or(Error::MissingBaseline)?;
    let s_ref = baseline.final_state.s();
    Ok(reports
        .iter()
        .map(|r| (r.id.clone(), Trend::of_change(r.final_state.s() - s_ref)))
        .collect())
}
