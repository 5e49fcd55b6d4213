//! Rate constants, baseline cytokine levels, cost weights and the named
//! presets they ship with.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::StateVec;

macro_rules! model_params {
    ($( $(#[$doc:meta])* $field:ident => $key:literal ),+ $(,)?) => {
        /// Every rate constant and baseline level appearing in the state and
        /// costate equations. Values are plain numbers per day.
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct ModelParams {
            $( $(#[$doc])* pub $field: f64, )+
        }

        impl ModelParams {
            /// Canonical parameter names, in declaration order.
            pub const NAMES: &'static [&'static str] = &[$($key),+];

            pub fn get(&self, name: &str) -> Option<f64> {
                match name {
                    $( $key => Some(self.$field), )+
                    _ => None,
                }
            }

            pub fn get_mut(&mut self, name: &str) -> Option<&mut f64> {
                match name {
                    $( $key => Some(&mut self.$field), )+
                    _ => None,
                }
            }

            /// `(name, value)` pairs in canonical order.
            pub fn entries(&self) -> Vec<(&'static str, f64)> {
                vec![$( ($key, self.$field) ),+]
            }
        }
    };
}

model_params! {
    /// Birth rate of susceptible Schwann cells.
    omega => "omega",
    /// Infection rate (mass action between S and B).
    beta => "beta",
    /// Cytokine-driven death rate of S.
    gamma => "gamma",
    /// Natural death rate of S and I.
    mu1 => "mu1",
    /// Cytokine-driven death rate of I.
    delta => "delta",
    /// Bacterial release rate from infected cells.
    alpha => "alpha",
    /// Cytokine-driven clearance rate of B.
    y => "y",
    /// Natural death rate of B.
    mu2 => "mu2",
    alpha_igamma => "alpha_Igamma",
    delta_igamma_talpha => "delta_Igamma_Talpha",
    delta_igamma_i12 => "delta_Igamma_I12",
    delta_igamma_i15 => "delta_Igamma_I15",
    delta_igamma_i17 => "delta_Igamma_I17",
    mu_igamma => "mu_Igamma",
    beta_talpha => "beta_Talpha",
    mu_talpha => "mu_Talpha",
    alpha_i10 => "alpha_I10",
    delta_i10_igamma => "delta_I10_Igamma",
    mu_i10 => "mu_I10",
    beta_i12 => "beta_I12",
    mu_i12 => "mu_I12",
    beta_i15 => "beta_I15",
    mu_i15 => "mu_I15",
    beta_i17 => "beta_I17",
    mu_i17 => "mu_I17",
    q_igamma => "Q_Igamma",
    q_talpha => "Q_Talpha",
    q_i10 => "Q_I10",
    q_i12 => "Q_I12",
    q_i15 => "Q_I15",
    q_i17 => "Q_I17",
}

impl ModelParams {
    /// Values used for the optimal-control simulations.
    pub fn section_5_2() -> Self {
        ModelParams {
            omega: 20.9,
            beta: 0.3,
            gamma: 0.01795,
            mu1: 0.00018,
            delta: 0.2681,
            alpha: 0.2,
            y: 0.3,
            mu2: 0.57,
            alpha_igamma: 0.0003,
            delta_igamma_talpha: 0.00554,
            delta_igamma_i12: 0.00903,
            delta_igamma_i15: 0.00625,
            delta_igamma_i17: 0.00499,
            mu_igamma: 2.16,
            beta_talpha: 0.004,
            mu_talpha: 1.112,
            alpha_i10: 0.044,
            delta_i10_igamma: 0.00146,
            mu_i10: 16.0,
            beta_i12: 0.011,
            mu_i12: 1.88,
            beta_i15: 0.025,
            mu_i15: 2.16,
            beta_i17: 0.029,
            mu_i17: 2.34,
            q_igamma: 0.1,
            q_talpha: 0.14,
            q_i10: 0.15,
            q_i12: 1.11,
            q_i15: 0.2,
            // listed a second time as Q_I10 in the in-text list; the
            // tabulated Q_I17 has the same value
            q_i17: 0.317,
        }
    }

    /// Tabulated literature values, used for the heat-map validation.
    pub fn table_1() -> Self {
        ModelParams {
            omega: 0.0220,
            beta: 3.4400,
            gamma: 0.1795,
            mu1: 0.0018,
            delta: 0.2681,
            alpha: 0.0630,
            y: 0.0003,
            mu2: 0.5700,
            alpha_igamma: 0.0003,
            delta_igamma_talpha: 0.005540,
            delta_igamma_i12: 0.009030,
            delta_igamma_i15: 0.006250,
            delta_igamma_i17: 0.004990,
            mu_igamma: 2.1600,
            beta_talpha: 0.0040,
            mu_talpha: 1.1120,
            alpha_i10: 0.0440,
            delta_i10_igamma: 0.001460,
            mu_i10: 16.000,
            beta_i12: 0.0110,
            mu_i12: 1.8800,
            beta_i15: 0.0250,
            mu_i15: 2.1600,
            beta_i17: 0.0290,
            mu_i17: 2.3400,
            q_igamma: 0.1000,
            q_talpha: 0.1400,
            q_i10: 0.1500,
            q_i12: 1.1100,
            q_i15: 0.2000,
            q_i17: 0.3170,
        }
    }

    pub fn preset(preset: ParamPreset) -> Self {
        match preset {
            ParamPreset::Section52 => Self::section_5_2(),
            ParamPreset::Table1 => Self::table_1(),
        }
    }

    /// Overrides one named parameter.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = self
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        *slot = value;
        Ok(())
    }

    /// All values finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.entries() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Invalid(format!(
                    "parameter {name} must be finite and nonnegative, got {value}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::section_5_2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamPreset {
    Section52,
    Table1,
}

impl ParamPreset {
    pub fn name(self) -> &'static str {
        match self {
            ParamPreset::Section52 => "section-5-2",
            ParamPreset::Table1 => "table-1",
        }
    }
}

impl fmt::Display for ParamPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "section-5-2" => Ok(ParamPreset::Section52),
            "table-1" => Ok(ParamPreset::Table1),
            other => Err(Error::Invalid(format!(
                "unknown parameter preset `{other}`"
            ))),
        }
    }
}

/// Named initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitialPreset {
    /// Starting point of the drug-therapy simulations.
    Simulation,
    /// Early-infection starting point of the heat-map validation.
    Validation,
}

impl InitialPreset {
    pub fn name(self) -> &'static str {
        match self {
            InitialPreset::Simulation => "simulation",
            InitialPreset::Validation => "validation",
        }
    }

    pub fn state(self) -> StateVec {
        match self {
            InitialPreset::Simulation => {
                StateVec([520.0, 275.0, 250.0, 50.0, 50.0, 75.0, 125.0, 125.0, 100.0])
            }
            InitialPreset::Validation => {
                StateVec([5200.0, 0.0, 40.0, 5.0, 5.0, 15.0, 12.0, 12.0, 10.0])
            }
        }
    }
}

impl FromStr for InitialPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulation" => Ok(InitialPreset::Simulation),
            "validation" => Ok(InitialPreset::Validation),
            other => Err(Error::Invalid(format!(
                "unknown initial-state preset `{other}`"
            ))),
        }
    }
}

/// Penalty weights on the three drugs, proportional to their hazard ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    /// Rifampin.
    pub p: f64,
    /// Dapsone.
    pub q: f64,
    /// Clofazimine.
    pub r: f64,
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("P", self.p), ("Q", self.q), ("R", self.r)] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Invalid(format!(
                    "weight {name} must be finite and nonnegative, got {w}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            p: 1.0,
            q: 1.99,
            r: 7.1,
        }
    }
}

/// Converts a doubling (or halving) time into a per-day rate, `ln 2 / t`.
///
/// This is the exact form of the "70 / doubling time" percentage rule once
/// the percentage is divided by 100.
pub fn rate_from_doubling_time(doubling_time: f64) -> f64 {
    std::f64::consts::LN_2 / doubling_time
}
