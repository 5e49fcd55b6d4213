//! Two-parameter sweeps of the untreated model, recording the bacterial load
//! on a fixed observation day, and the doubling summary computed from them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrate::{ControlTrajectory, TimeMesh};
use crate::model::{InitialPreset, ModelParams, StateVec};
use crate::octl::simulate;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Abscissa parameter (matrix columns).
    pub param_x: String,
    /// Ordinate parameter (matrix rows).
    pub param_y: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub grid_n: usize,
    pub observe_day: f64,
    /// Integration step in days.
    pub step: f64,
    pub initial_state: StateVec,
    pub base_params: ModelParams,
}

impl SweepSpec {
    pub const DEFAULT_GRID: usize = 50;
    pub const DEFAULT_OBSERVE_DAY: f64 = 14.0;
    pub const DEFAULT_STEP: f64 = 0.001;

    /// Sweep of `x` against `y` over their published ranges, with the
    /// tabulated parameters and the validation initial state.
    pub fn published(param_x: &str, param_y: &str) -> Result<Self> {
        let x_range = default_range(param_x)?;
        let y_range = default_range(param_y)?;
        Ok(SweepSpec {
            param_x: param_x.to_string(),
            param_y: param_y.to_string(),
            x_range,
            y_range,
            grid_n: Self::DEFAULT_GRID,
            observe_day: Self::DEFAULT_OBSERVE_DAY,
            step: Self::DEFAULT_STEP,
            initial_state: InitialPreset::Validation.state(),
            base_params: ModelParams::table_1(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for name in [&self.param_x, &self.param_y] {
            if self.base_params.get(name).is_none() {
                return Err(Error::UnknownParameter(name.clone()));
            }
        }
        if self.param_x == self.param_y {
            return Err(Error::Invalid(format!(
                "sweep axes must differ, both are `{}`",
                self.param_x
            )));
        }
        if self.grid_n < 2 {
            return Err(Error::Invalid(
                "grid needs at least 2 points per axis".into(),
            ));
        }
        for (lo, hi) in [self.x_range, self.y_range] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Invalid(format!("empty sweep range [{lo}, {hi}]")));
            }
        }
        if !(self.observe_day.is_finite() && self.observe_day > 0.0) {
            return Err(Error::Invalid("observation day must be positive".into()));
        }
        self.initial_state.ensure_finite()
    }
}

/// Published sweep range for the parameters that have one.
pub fn default_range(name: &str) -> Result<(f64, f64)> {
    match name {
        "alpha" => Ok((0.0563, 0.0763)),
        "gamma" => Ok((0.15, 0.2090)),
        "y" => Ok((0.0002, 0.5003)),
        other => Err(Error::Invalid(format!(
            "no default sweep range for `{other}`; set it in the config"
        ))),
    }
}

/// `n` uniformly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Bacterial load on the observation day over the grid. Rows follow the
/// ordinate parameter, columns the abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMatrix {
    pub x_name: String,
    pub y_name: String,
    pub x_coords: Vec<f64>,
    pub y_coords: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl HeatMatrix {
    pub fn cells(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    pub fn from_constant(n: usize, value: f64) -> Self {
        HeatMatrix {
            x_name: "x".into(),
            y_name: "y".into(),
            x_coords: linspace(0.0, 1.0, n),
            y_coords: linspace(0.0, 1.0, n),
            values: vec![vec![value; n]; n],
        }
    }
}

pub fn heat_sweep(spec: &SweepSpec) -> Result<HeatMatrix> {
    spec.validate()?;
    let mesh = TimeMesh::with_step(0.0, spec.observe_day, spec.step)?;
    let zero = ControlTrajectory::zeros(mesh);
    let x_coords = linspace(spec.x_range.0, spec.x_range.1, spec.grid_n);
    let y_coords = linspace(spec.y_range.0, spec.y_range.1, spec.grid_n);

    let cells: Vec<(usize, usize)> = (0..spec.grid_n)
        .flat_map(|r| (0..spec.grid_n).map(move |c| (r, c)))
        .collect();
    let loads = cells
        .par_iter()
        .map(|&(r, c)| {
            let mut p = spec.base_params;
            p.set(&spec.param_x, x_coords[c])?;
            p.set(&spec.param_y, y_coords[r])?;
            let traj = simulate(&spec.initial_state, &p, &zero)?;
            Ok(traj.last()[StateVec::B])
        })
        .collect::<Result<Vec<f64>>>()?;

    let values = loads.chunks(spec.grid_n).map(<[f64]>::to_vec).collect();
    Ok(HeatMatrix {
        x_name: spec.param_x.clone(),
        y_name: spec.param_y.clone(),
        x_coords,
        y_coords,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingSummary {
    /// Fraction of cells with the load within `tol` of twice the initial load.
    pub fraction: f64,
    pub min: f64,
    pub max: f64,
}

pub const DEFAULT_DOUBLING_TOLERANCE: f64 = 0.15;

pub fn doubling_metric(matrix: &HeatMatrix, b0: f64, tol: f64) -> Result<DoublingSummary> {
    if !(b0.is_finite() && b0 > 0.0) {
        return Err(Error::Invalid(format!(
            "initial load must be positive, got {b0}"
        )));
    }
    let target = 2.0 * b0;
    let (lo, hi) = (target * (1.0 - tol), target * (1.0 + tol));
    let mut hits = 0usize;
    let mut total = 0usize;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in matrix.cells() {
        total += 1;
        if (lo..=hi).contains(&v) {
            hits += 1;
        }
        min = min.min(v);
        max = max.max(v);
    }
    Ok(DoublingSummary {
        fraction: if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        },
        min,
        max,
    })
}
