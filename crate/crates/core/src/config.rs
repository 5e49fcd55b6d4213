//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! preset = section-5-2        # or table-1, or a path to a parameter file
//! initial = simulation        # or validation
//! beta = 0.25                 # any model parameter by name
//! mesh.h = 0.01
//! bounds.D33 = 0.2
//! weights.R = 7.1
//! ```
//!
//! The preset is applied first and every other key overrides it, whatever
//! the line order. A parameter file named by `preset` holds model parameter
//! lines only and is applied on top of `section-5-2`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrate::TimeMesh;
use crate::model::{
    AdjointForm, Control, ControlBounds, CostWeights, InitialPreset, ModelParams, ParamPreset,
    StateVec, N_STATE, STATE_LABELS,
};
use crate::octl::{OctlConfig, StepObjective};
use crate::scenarios::DrugMask;
use crate::validate::{default_range, SweepSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PresetSource {
    Named(ParamPreset),
    File(PathBuf),
}

impl PresetSource {
    fn label(&self) -> String {
        match self {
            PresetSource::Named(p) => p.name().to_string(),
            PresetSource::File(path) => path.display().to_string(),
        }
    }
}

/// Presets a command falls back to when the config names none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigDefaults {
    pub preset: ParamPreset,
    pub initial: InitialPreset,
}

impl ConfigDefaults {
    pub const SIMULATION: ConfigDefaults = ConfigDefaults {
        preset: ParamPreset::Section52,
        initial: InitialPreset::Simulation,
    };

    pub const VALIDATION: ConfigDefaults = ConfigDefaults {
        preset: ParamPreset::Table1,
        initial: InitialPreset::Validation,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub grid_n: usize,
    pub observe_day: f64,
    pub step: f64,
    /// Explicit ranges; parameters absent here use their published range.
    pub ranges: BTreeMap<String, (f64, f64)>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            grid_n: SweepSpec::DEFAULT_GRID,
            observe_day: SweepSpec::DEFAULT_OBSERVE_DAY,
            step: SweepSpec::DEFAULT_STEP,
            ranges: BTreeMap::new(),
        }
    }
}

/// Fully resolved configuration: every value is explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: PresetSource,
    pub initial: InitialPreset,
    pub params: ModelParams,
    pub initial_state: StateVec,
    pub mesh_h: f64,
    pub mesh_t: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub theta_max: f64,
    pub adjoint: AdjointForm,
    pub objective: StepObjective,
    pub bounds: ControlBounds,
    pub weights: CostWeights,
    pub drugs: DrugMask,
    pub sweep: SweepSettings,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn mesh(&self) -> Result<TimeMesh> {
        TimeMesh::with_step(0.0, self.mesh_t, self.mesh_h)
    }

    pub fn octl(&self) -> Result<OctlConfig> {
        let cfg = OctlConfig {
            mesh: self.mesh()?,
            bounds: self.bounds,
            mask: self.drugs,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            theta_max: self.theta_max,
            weights: self.weights,
            adjoint: self.adjoint,
            objective: self.objective,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweep_spec(&self, param_x: &str, param_y: &str) -> Result<SweepSpec> {
        let range = |name: &str| match self.sweep.ranges.get(name) {
            Some(r) => Ok(*r),
            None => default_range(name),
        };
        let spec = SweepSpec {
            param_x: param_x.to_string(),
            param_y: param_y.to_string(),
            x_range: range(param_x)?,
            y_range: range(param_y)?,
            grid_n: self.sweep.grid_n,
            observe_day: self.sweep.observe_day,
            step: self.sweep.step,
            initial_state: self.initial_state,
            base_params: self.params,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Renders the configuration so that parsing it back yields an equal value.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "preset = {}", self.preset.label());
        let _ = writeln!(out, "initial = {}", self.initial.name());
        for (name, value) in self.params.entries() {
            let _ = writeln!(out, "{name} = {value}");
        }
        for (label, value) in STATE_LABELS.iter().zip(self.initial_state.0) {
            let _ = writeln!(out, "x0.{label} = {value}");
        }
        let _ = writeln!(out, "mesh.h = {}", self.mesh_h);
        let _ = writeln!(out, "mesh.T = {}", self.mesh_t);
        let _ = writeln!(out, "octl.tolerance = {}", self.tolerance);
        let _ = writeln!(out, "octl.max_iterations = {}", self.max_iterations);
        let _ = writeln!(out, "octl.theta_max = {}", self.theta_max);
        let _ = writeln!(out, "octl.adjoint = {}", self.adjoint.name());
        let _ = writeln!(
            out,
            "octl.step_objective = {}",
            objective_name(self.objective)
        );
        for c in Control::ALL {
            let _ = writeln!(out, "bounds.{} = {}", c.name(), self.bounds.max(c));
        }
        let _ = writeln!(out, "weights.P = {}", self.weights.p);
        let _ = writeln!(out, "weights.Q = {}", self.weights.q);
        let _ = writeln!(out, "weights.R = {}", self.weights.r);
        let _ = writeln!(out, "drugs = {}", self.drugs.id());
        let _ = writeln!(out, "sweep.grid_n = {}", self.sweep.grid_n);
        let _ = writeln!(out, "sweep.observe_day = {}", self.sweep.observe_day);
        let _ = writeln!(out, "sweep.h = {}", self.sweep.step);
        for (name, (lo, hi)) in &self.sweep.ranges {
            let _ = writeln!(out, "sweep.min.{name} = {lo}");
            let _ = writeln!(out, "sweep.max.{name} = {hi}");
        }
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        out
    }
}

fn objective_name(o: StepObjective) -> &'static str {
    match o {
        StepObjective::Cost => "cost",
        StepObjective::Hamiltonian => "hamiltonian",
    }
}

fn parse_objective(s: &str) -> Result<StepObjective> {
    match s {
        "cost" => Ok(StepObjective::Cost),
        "hamiltonian" => Ok(StepObjective::Hamiltonian),
        other => Err(Error::Invalid(format!("unknown step objective `{other}`"))),
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn config_error(e: &Entry, message: impl Into<String>) -> Error {
    Error::Config {
        line: e.line,
        key: e.key.clone(),
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                key: content.to_string(),
                message: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() {
            return Err(Error::Config {
                line,
                key,
                message: "empty key".into(),
            });
        }
        if let Some(first) = seen.insert(key.clone(), line) {
            return Err(Error::Config {
                line,
                key,
                message: format!("duplicate key, first set on line {first}"),
            });
        }
        entries.push(Entry { line, key, value });
    }
    Ok(entries)
}

fn number(e: &Entry) -> Result<f64> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| config_error(e, format!("`{}` is not a number", e.value)))?;
    if !v.is_finite() {
        return Err(config_error(e, "value must be finite"));
    }
    Ok(v)
}

fn nonnegative(e: &Entry) -> Result<f64> {
    let v = number(e)?;
    if v < 0.0 {
        return Err(config_error(
            e,
            format!("{v} is out of range (must be >= 0)"),
        ));
    }
    Ok(v)
}

fn positive(e: &Entry) -> Result<f64> {
    let v = number(e)?;
    if v <= 0.0 {
        return Err(config_error(
            e,
            format!("{v} is out of range (must be > 0)"),
        ));
    }
    Ok(v)
}

fn count(e: &Entry, min: usize) -> Result<usize> {
    let v: usize = e
        .value
        .parse()
        .map_err(|_| config_error(e, format!("`{}` is not a whole number", e.value)))?;
    if v < min {
        return Err(config_error(
            e,
            format!("{v} is out of range (must be >= {min})"),
        ));
    }
    Ok(v)
}

fn parsed<T: FromStr<Err = Error>>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|err: Error| config_error(e, err.to_string()))
}

fn load_parameter_file(path: &Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut params = ModelParams::section_5_2();
    for e in tokenize(&text)? {
        let v = nonnegative(&e)?;
        params
            .set(&e.key, v)
            .map_err(|_| config_error(&e, "unknown parameter in preset file"))?;
    }
    Ok(params)
}

/// Parses a config with the simulation defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, ConfigDefaults::SIMULATION, None, Path::new("."))
}

/// Parses a config. `preset_override` replaces any `preset` line; relative
/// preset file paths resolve against `base_dir`.
pub fn parse_config_with(
    text: &str,
    defaults: ConfigDefaults,
    preset_override: Option<&str>,
    base_dir: &Path,
) -> Result<RunConfig> {
    let entries = tokenize(text)?;

    let preset_entry = entries.iter().find(|e| e.key == "preset");
    let preset_value = preset_override.or(preset_entry.map(|e| e.value.as_str()));
    let preset = match preset_value {
        None => PresetSource::Named(defaults.preset),
        Some(v) => match v.parse::<ParamPreset>() {
            Ok(p) => PresetSource::Named(p),
            Err(_) => PresetSource::File(PathBuf::from(v)),
        },
    };
    let params = match &preset {
        PresetSource::Named(p) => ModelParams::preset(*p),
        PresetSource::File(path) => {
            let full = if path.is_absolute() {
                path.clone()
            } else {
                base_dir.join(path)
            };
            load_parameter_file(&full).map_err(|err| match (preset_entry, preset_override) {
                (Some(e), None) => config_error(e, err.to_string()),
                _ => err,
            })?
        }
    };

    let initial = match entries.iter().find(|e| e.key == "initial") {
        Some(e) => parsed::<InitialPreset>(e)?,
        None => defaults.initial,
    };

    let octl_defaults = OctlConfig::default();
    let mut cfg = RunConfig {
        preset,
        initial,
        params,
        initial_state: initial.state(),
        mesh_h: octl_defaults.mesh.step(),
        mesh_t: octl_defaults.mesh.t_end,
        tolerance: octl_defaults.tolerance,
        max_iterations: octl_defaults.max_iterations,
        theta_max: octl_defaults.theta_max,
        adjoint: octl_defaults.adjoint,
        objective: octl_defaults.objective,
        bounds: ControlBounds::default(),
        weights: CostWeights::default(),
        drugs: DrugMask::ALL,
        sweep: SweepSettings::default(),
        output_dir: PathBuf::from("out"),
    };
    let mut range_min: BTreeMap<String, (f64, &Entry)> = BTreeMap::new();
    let mut range_max: BTreeMap<String, (f64, &Entry)> = BTreeMap::new();

    for e in &entries {
        let key = e.key.as_str();
        match key {
            "preset" | "initial" => {}
            "mesh.h" => cfg.mesh_h = positive(e)?,
            "mesh.T" => cfg.mesh_t = positive(e)?,
            "octl.tolerance" => cfg.tolerance = positive(e)?,
            "octl.max_iterations" => cfg.max_iterations = count(e, 1)?,
            "octl.theta_max" => cfg.theta_max = positive(e)?,
            "octl.adjoint" => cfg.adjoint = parsed(e)?,
            "octl.step_objective" => {
                cfg.objective =
                    parse_objective(&e.value).map_err(|err| config_error(e, err.to_string()))?
            }
            "weights.P" => cfg.weights.p = nonnegative(e)?,
            "weights.Q" => cfg.weights.q = nonnegative(e)?,
            "weights.R" => cfg.weights.r = nonnegative(e)?,
            "drugs" => cfg.drugs = parsed(e)?,
            "sweep.grid_n" => cfg.sweep.grid_n = count(e, 2)?,
            "sweep.observe_day" => cfg.sweep.observe_day = positive(e)?,
            "sweep.h" => cfg.sweep.step = positive(e)?,
            "output_dir" => cfg.output_dir = PathBuf::from(&e.value),
            _ => {
                if let Some(name) = key.strip_prefix("bounds.") {
                    let c: Control = name.parse().map_err(|_| config_error(e, "unknown key"))?;
                    cfg.bounds.0[c.index()] = nonnegative(e)?;
                } else if let Some(label) = key.strip_prefix("x0.") {
                    let idx = STATE_LABELS
                        .iter()
                        .position(|l| *l == label)
                        .ok_or_else(|| config_error(e, "unknown key"))?;
                    debug_assert!(idx < N_STATE);
                    cfg.initial_state.0[idx] = number(e)?;
                } else if let Some(name) = key.strip_prefix("sweep.min.") {
                    check_param_name(e, name)?;
                    range_min.insert(name.to_string(), (number(e)?, e));
                } else if let Some(name) = key.strip_prefix("sweep.max.") {
                    check_param_name(e, name)?;
                    range_max.insert(name.to_string(), (number(e)?, e));
                } else if cfg.params.get(key).is_some() {
                    let v = nonnegative(e)?;
                    if let Some(slot) = cfg.params.get_mut(key) {
                        *slot = v;
                    }
                } else {
                    return Err(config_error(e, "unknown key"));
                }
            }
        }
    }

    for (name, &(lo, e)) in &range_min {
        let hi = match range_max.get(name) {
            Some(&(hi, _)) => hi,
            None => {
                default_range(name)
                    .map_err(|_| config_error(e, format!("sweep.max.{name} is also required")))?
                    .1
            }
        };
        if lo > hi {
            return Err(config_error(e, format!("empty range [{lo}, {hi}]")));
        }
        cfg.sweep.ranges.insert(name.clone(), (lo, hi));
    }
    for (name, &(hi, e)) in &range_max {
        if range_min.contains_key(name) {
            continue;
        }
        let lo = default_range(name)
            .map_err(|_| config_error(e, format!("sweep.min.{name} is also required")))?
            .0;
        if lo > hi {
            return Err(config_error(e, format!("empty range [{lo}, {hi}]")));
        }
        cfg.sweep.ranges.insert(name.clone(), (lo, hi));
    }

    TimeMesh::with_step(0.0, cfg.mesh_t, cfg.mesh_h)?;
    Ok(cfg)
}

fn check_param_name(e: &Entry, name: &str) -> Result<()> {
    if ModelParams::NAMES.contains(&name) {
        Ok(())
    } else {
        Err(config_error(e, format!("unknown parameter `{name}`")))
    }
}
